#include <deeprank/data.hpp>
#include <deeprank/model_io.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

namespace deeprank::data {

namespace {

constexpr std::uint64_t data_stream = 0x64617461; // "data"
constexpr double nonlinear_frequency = 3.0;
constexpr double category_spread = 2.0;

std::string_view trim(std::string_view text)
{
	const auto first = text.find_first_not_of(" \t\r\n");
	if (first == std::string_view::npos)
		return {};
	const auto last = text.find_last_not_of(" \t\r\n");
	return text.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view text, char separator)
{
	std::vector<std::string_view> fields;
	std::size_t start = 0;
	while (true) {
		const auto pos = text.find(separator, start);
		fields.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
		if (pos == std::string_view::npos)
			break;
		start = pos + 1;
	}
	return fields;
}

bool skip_line(std::string_view line)
{
	const auto content = trim(line);
	return content.empty() || content.front() == '#';
}

Eigen::VectorXd unit_gaussian(Rng& rng, std::size_t d)
{
	Eigen::VectorXd v(static_cast<Eigen::Index>(d));
	for (Eigen::Index k = 0; k < v.size(); ++k)
		v[k] = rng.normal();
	return v;
}

Eigen::VectorXd random_direction(Rng& rng, std::size_t d)
{
	Eigen::VectorXd v;
	do {
		v = unit_gaussian(rng, d);
	} while (!(v.norm() > 1e-12));
	return v / v.norm();
}

std::string item_id(std::size_t index, std::size_t count)
{
	std::size_t width = 4;
	for (std::size_t n = count > 0 ? count - 1 : 0; n >= 10000; n /= 10)
		++width;
	return fmt::format("item{:0{}}", index, width);
}

std::ifstream open(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw ValidationError(fmt::format("cannot open '{}'", path.string()));
	return in;
}

} // namespace

std::string to_string(SynthMode mode)
{
	switch (mode) {
	case SynthMode::Linear:
		return "linear";
	case SynthMode::Nonlinear:
		return "nonlinear";
	case SynthMode::Category:
		return "category";
	}
	return "linear";
}

SynthMode parse_mode(const std::string& text)
{
	if (text == "linear")
		return SynthMode::Linear;
	if (text == "nonlinear")
		return SynthMode::Nonlinear;
	if (text == "category")
		return SynthMode::Category;
	throw ValidationError(fmt::format("unknown synthesis mode '{}' (expected linear, nonlinear or category)", text));
}

void SynthSpec::validate() const
{
	if (dimension == 0)
		throw ValidationError("synthetic dimension must be positive");
	if (mode == SynthMode::Nonlinear && dimension < 2)
		throw ValidationError("nonlinear mode needs at least two dimensions");
	if (mode == SynthMode::Category && n_categories == 0)
		throw ValidationError("category mode needs at least one category");
	if (!(similarity_threshold >= 0.0) || !std::isfinite(similarity_threshold))
		throw ValidationError("similarity threshold must be finite and non-negative");
	if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
		throw ValidationError("noise sigma must be finite and non-negative");
	if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
		throw ValidationError("test fraction must lie in [0, 1]");
	if (n_ordered_pairs + n_similar_pairs > 0 && n_items < 2)
		throw ValidationError("sampling pairs needs at least two items");
	if (attribute.empty())
		throw ValidationError("attribute name must not be empty");
}

double LatentTruth::of(const std::string& id) const
{
	for (std::size_t k = 0; k < ids.size(); ++k) {
		if (ids[k] == id)
			return strength[k];
	}
	throw ValidationError(fmt::format("no latent strength for item '{}'", id));
}

Synthetic generate(const SynthSpec& spec)
{
	spec.validate();
	Rng rng(spec.seed, data_stream);
	const std::size_t d = spec.dimension;
	const std::size_t n = spec.n_items;

	LatentTruth truth;
	std::vector<FeatureVector> items;
	items.reserve(n);

	switch (spec.mode) {
	case SynthMode::Linear: {
		const Eigen::VectorXd v = random_direction(rng, d);
		truth.description = "linear: s(x) = v.x with v a random unit vector";
		for (std::size_t i = 0; i < n; ++i) {
			items.push_back({item_id(i, n), unit_gaussian(rng, d)});
			truth.strength.push_back(v.dot(items.back().values));
		}
		break;
	}
	case SynthMode::Nonlinear: {
		Eigen::VectorXd v1 = random_direction(rng, d);
		Eigen::VectorXd v2;
		do {
			v2 = unit_gaussian(rng, d);
			v2 -= v2.dot(v1) * v1;
		} while (!(v2.norm() > 1e-9));
		v2 /= v2.norm();
		truth.description = "nonlinear: s(x) = sin(3 v1.x) + (v2.x)^2 with v1, v2 random orthonormal";
		for (std::size_t i = 0; i < n; ++i) {
			items.push_back({item_id(i, n), unit_gaussian(rng, d)});
			const auto& x = items.back().values;
			const double b = v2.dot(x);
			truth.strength.push_back(std::sin(nonlinear_frequency * v1.dot(x)) + b * b);
		}
		break;
	}
	case SynthMode::Category: {
		const std::size_t k = spec.n_categories;
		std::vector<double> rank(k);
		std::iota(rank.begin(), rank.end(), 0.0);
		rng.shuffle(rank);
		std::vector<Eigen::VectorXd> centres;
		for (std::size_t c = 0; c < k; ++c)
			centres.push_back(category_spread * unit_gaussian(rng, d));
		truth.description = "category: s(x) = rank of the item's category";
		for (std::size_t i = 0; i < n; ++i) {
			const std::size_t c = rng.index(k);
			items.push_back({item_id(i, n), centres[c] + unit_gaussian(rng, d)});
			truth.category.push_back(c);
			truth.strength.push_back(rank[c]);
		}
		break;
	}
	}
	for (const auto& item : items)
		truth.ids.push_back(item.id);

	std::vector<PairConstraint> ordered;
	std::vector<PairConstraint> similar;
	const std::size_t wanted = spec.n_ordered_pairs + spec.n_similar_pairs;
	const std::size_t max_draws = std::max<std::size_t>(1000000, 100 * wanted);
	std::size_t draws = 0;
	while (ordered.size() < spec.n_ordered_pairs || similar.size() < spec.n_similar_pairs) {
		if (draws++ >= max_draws)
			throw ValidationError(fmt::format(
				"could not sample {} ordered and {} similar pairs in {} draws (got {} and {}); check the threshold",
				spec.n_ordered_pairs, spec.n_similar_pairs, max_draws, ordered.size(), similar.size()));
		const std::size_t i = rng.index(n);
		std::size_t j = rng.index(n - 1);
		if (j >= i)
			++j;
		double si = truth.strength[i];
		double sj = truth.strength[j];
		if (spec.noise_sigma > 0.0) {
			si += rng.normal(0.0, spec.noise_sigma);
			sj += rng.normal(0.0, spec.noise_sigma);
		}
		if (std::abs(si - sj) > spec.similarity_threshold) {
			if (ordered.size() < spec.n_ordered_pairs) {
				const RawLabel label = si > sj ? RawLabel::FirstStronger : RawLabel::SecondStronger;
				ordered.push_back(canonicalize_pair({items[i].id, items[j].id}, label));
			}
		} else if (similar.size() < spec.n_similar_pairs) {
			similar.push_back(canonicalize_pair({items[i].id, items[j].id}, RawLabel::Equal));
		}
	}

	auto tag_tests = [&](std::vector<PairConstraint>& list) {
		const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(list.size())));
		for (std::size_t k = list.size() - std::min(n_test, list.size()); k < list.size(); ++k)
			list[k].split = Split::Test;
	};
	tag_tests(ordered);
	tag_tests(similar);

	std::vector<PairConstraint> pairs = std::move(ordered);
	pairs.insert(pairs.end(), similar.begin(), similar.end());

	std::map<std::size_t, std::vector<PairConstraint>> by_attribute;
	by_attribute[0] = std::move(pairs);
	Dataset dataset(d, std::move(items), {{spec.attribute, 0}}, std::move(by_attribute));
	return {std::move(dataset), std::move(truth)};
}

train::BatchSampler truth_pair_sampler(const Dataset& dataset, const LatentTruth& truth, double similarity_threshold)
{
	if (dataset.size() < 2)
		throw ValidationError("pair sampling needs at least two items");
	std::vector<Eigen::VectorXd> features;
	std::vector<double> strength;
	for (const auto& item : dataset.items()) {
		features.push_back(item.values);
		strength.push_back(truth.of(item.id));
	}
	return [features = std::move(features), strength = std::move(strength),
	        similarity_threshold](Rng& rng, std::size_t batch_size) {
		std::vector<train::PairExample> batch;
		batch.reserve(batch_size);
		const std::size_t n = features.size();
		while (batch.size() < batch_size) {
			const std::size_t i = rng.index(n);
			std::size_t j = rng.index(n - 1);
			if (j >= i)
				++j;
			const double delta = strength[i] - strength[j];
			if (std::abs(delta) <= similarity_threshold)
				batch.push_back({Relation::Similar, features[i], features[j]});
			else if (delta > 0.0)
				batch.push_back({Relation::Ordered, features[i], features[j]});
			else
				batch.push_back({Relation::Ordered, features[j], features[i]});
		}
		return batch;
	};
}

FeatureMap read_features(std::istream& in, std::vector<std::string>* order)
{
	FeatureMap features;
	std::optional<std::size_t> dimension;
	std::size_t line_number = 0;
	for (std::string line; std::getline(in, line);) {
		++line_number;
		if (skip_line(line))
			continue;
		const auto fields = split(trim(line), ',');
		if (fields.size() < 2)
			throw ValidationError(fmt::format("feature file line {}: expected an id and at least one value", line_number));
		const std::string id(trim(fields[0]));
		if (id.empty())
			throw ValidationError(fmt::format("feature file line {}: empty id", line_number));

		Eigen::VectorXd values(static_cast<Eigen::Index>(fields.size() - 1));
		for (std::size_t k = 1; k < fields.size(); ++k) {
			const auto text = trim(fields[k]);
			double value = 0.0;
			auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
			if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
				throw ValidationError(fmt::format("feature file line {}: invalid number '{}'", line_number, text));
			if (!std::isfinite(value))
				throw ValidationError(fmt::format("feature file line {}: non-finite value '{}'", line_number, text));
			values[static_cast<Eigen::Index>(k - 1)] = value;
		}
		if (dimension && *dimension != static_cast<std::size_t>(values.size()))
			throw DimensionError(fmt::format("feature file line {}: item '{}' has {} values, expected {}", line_number,
			                                 id, values.size(), *dimension));
		dimension = static_cast<std::size_t>(values.size());
		if (features.contains(id))
			throw ValidationError(fmt::format("feature file line {}: duplicate id '{}'", line_number, id));
		features.emplace(id, FeatureVector{id, std::move(values)});
		if (order)
			order->push_back(id);
	}
	if (features.empty())
		warn("feature file contains no items");
	return features;
}

FeatureMap load_features(const std::filesystem::path& path, std::vector<std::string>* order)
{
	auto in = open(path);
	return read_features(in, order);
}

PairMap read_pairs(std::istream& in)
{
	PairMap pairs;
	std::size_t line_number = 0;
	for (std::string line; std::getline(in, line);) {
		++line_number;
		if (skip_line(line))
			continue;
		if (!line.empty() && line.back() == '\r')
			line.pop_back();
		const auto fields = split(line, '\t');
		if (fields.size() != 4 && fields.size() != 5)
			throw ValidationError(fmt::format("pair file line {}: expected 4 or 5 tab-separated fields, found {}",
			                                  line_number, fields.size()));
		const std::string attribute(trim(fields[0]));
		PairConstraint pair{std::string(trim(fields[1])), std::string(trim(fields[2]))};
		if (attribute.empty() || pair.first.empty() || pair.second.empty())
			throw ValidationError(fmt::format("pair file line {}: empty attribute or id", line_number));

		const auto relation = trim(fields[3]);
		RawLabel label;
		if (relation == "more")
			label = RawLabel::FirstStronger;
		else if (relation == "less")
			label = RawLabel::SecondStronger;
		else if (relation == "equal")
			label = RawLabel::Equal;
		else
			throw ValidationError(fmt::format("pair file line {}: unknown relation '{}' (expected more, less or equal)",
			                                  line_number, relation));

		if (fields.size() == 5) {
			const auto tag = trim(fields[4]);
			if (tag == "train")
				pair.split = Split::Train;
			else if (tag == "test")
				pair.split = Split::Test;
			else
				throw ValidationError(fmt::format("pair file line {}: unknown split '{}' (expected train or test)",
				                                  line_number, tag));
		}
		pairs[attribute].push_back(canonicalize_pair(std::move(pair), label));
	}
	return pairs;
}

PairMap load_pairs(const std::filesystem::path& path)
{
	auto in = open(path);
	return read_pairs(in);
}

Dataset make_dataset(const FeatureMap& features, const PairMap& pairs, const std::vector<std::string>* order)
{
	if (features.empty())
		throw ValidationError("dataset has no items");
	std::vector<FeatureVector> items;
	if (order) {
		for (const auto& id : *order)
			items.push_back(features.at(id));
	} else {
		for (const auto& [id, item] : features)
			items.push_back(item);
	}
	const auto dimension = static_cast<std::size_t>(items.front().values.size());

	std::vector<AttributeSpec> attributes;
	std::map<std::size_t, std::vector<PairConstraint>> by_index;
	for (const auto& [name, list] : pairs) {
		const std::size_t index = attributes.size();
		attributes.push_back({name, index});
		by_index[index] = list;
	}
	return Dataset(dimension, std::move(items), std::move(attributes), std::move(by_index));
}

void write_features(std::ostream& out, const Dataset& dataset)
{
	for (const auto& item : dataset.items()) {
		out << item.id;
		for (Eigen::Index k = 0; k < item.values.size(); ++k)
			out << ',' << io::format_double(item.values[k]);
		out << '\n';
	}
}

void write_pairs(std::ostream& out, const Dataset& dataset)
{
	for (const auto& attribute : dataset.attributes()) {
		for (const auto& pair : dataset.pairs(attribute.index)) {
			out << attribute.name << '\t' << pair.first << '\t' << pair.second << '\t'
			    << (pair.relation == Relation::Ordered ? "more" : "equal") << '\t'
			    << (pair.split == Split::Train ? "train" : "test") << '\n';
		}
	}
}

void write_truth(std::ostream& out, const LatentTruth& truth)
{
	for (std::size_t k = 0; k < truth.ids.size(); ++k)
		out << truth.ids[k] << '\t' << io::format_double(truth.strength[k]) << '\n';
}

std::map<std::string, double> read_truth(std::istream& in)
{
	std::map<std::string, double> truth;
	std::size_t line_number = 0;
	for (std::string line; std::getline(in, line);) {
		++line_number;
		if (skip_line(line))
			continue;
		const auto fields = split(trim(line), '\t');
		double value = 0.0;
		const auto text = fields.size() == 2 ? trim(fields[1]) : std::string_view{};
		auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
		if (fields.size() != 2 || text.empty() || ec != std::errc() || ptr != text.data() + text.size())
			throw ValidationError(fmt::format("truth file line {}: expected id<TAB>strength", line_number));
		truth[std::string(trim(fields[0]))] = value;
	}
	return truth;
}

} // namespace deeprank::data
