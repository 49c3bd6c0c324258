#include "helpers.hpp"

#include <deeprank/data.hpp>
#include <deeprank/model_io.hpp>

#include <doctest.h>

#include <sstream>

using namespace deeprank;
using namespace deeprank::data;

namespace {

FeatureMap features_from(const std::string& text, std::vector<std::string>* order = nullptr)
{
	std::istringstream in(text);
	return read_features(in, order);
}

PairMap pairs_from(const std::string& text)
{
	std::istringstream in(text);
	return read_pairs(in);
}

std::string features_text(const Dataset& ds)
{
	std::ostringstream out;
	write_features(out, ds);
	return out.str();
}

std::string pairs_text(const Dataset& ds)
{
	std::ostringstream out;
	write_pairs(out, ds);
	return out.str();
}

std::string truth_text(const LatentTruth& truth)
{
	std::ostringstream out;
	write_truth(out, truth);
	return out.str();
}

} // namespace

TEST_CASE("read_features")
{
	std::vector<std::string> order;
	const auto f = features_from("# comment\nb,0.5,-1.5\na,1.0,2.0\n\n", &order);
	REQUIRE(f.size() == 2);
	CHECK(f.at("a").values == test::vec({1.0, 2.0}));
	CHECK(f.at("b").values == test::vec({0.5, -1.5}));
	CHECK(order == std::vector<std::string>{"b", "a"});

	try {
		features_from("a,1,2\nb,1,2,3\n");
		FAIL("expected DimensionError");
	} catch (const DimensionError& e) {
		CHECK(std::string(e.what()).find("line 2") != std::string::npos);
	}
	CHECK_THROWS_AS(features_from("a,1,x\n"), ValidationError);
	CHECK_THROWS_AS(features_from("a,1,nan\n"), ValidationError);
	CHECK_THROWS_AS(features_from("a\n"), ValidationError);
	CHECK_THROWS_AS(features_from("a,1\na,2\n"), ValidationError);

	test::WarningCapture warnings;
	CHECK(features_from("").empty());
	CHECK(warnings.messages.size() == 1);
}

TEST_CASE("read_pairs")
{
	const auto p = pairs_from("smiling\ta\tb\tmore\nsmiling\ta\tb\tless\nsmiling\ta\tb\tequal\ttest\nopen\tc\td\tmore\ttrain\n");
	REQUIRE(p.at("smiling").size() == 3);
	CHECK(p.at("smiling")[0] == PairConstraint{"a", "b", Relation::Ordered, Split::Train});
	CHECK(p.at("smiling")[1] == PairConstraint{"b", "a", Relation::Ordered, Split::Train});
	CHECK(p.at("smiling")[2] == PairConstraint{"a", "b", Relation::Similar, Split::Test});
	CHECK(p.at("open").size() == 1);

	CHECK_THROWS_AS(pairs_from("smiling\ta\tb\n"), ValidationError);
	CHECK_THROWS_AS(pairs_from("smiling\ta\tb\tbigger\n"), ValidationError);
	CHECK_THROWS_AS(pairs_from("smiling\ta\tb\tmore\tvalidation\n"), ValidationError);
	try {
		pairs_from("s\ta\tb\tmore\ns\ta\tb\tmaybe\n");
		FAIL("expected ValidationError");
	} catch (const ValidationError& e) {
		CHECK(std::string(e.what()).find("line 2") != std::string::npos);
	}
}

TEST_CASE("make_dataset")
{
	std::vector<std::string> order;
	const auto f = features_from("b,1\na,2\nc,3\n", &order);
	const auto p = pairs_from("z\ta\tb\tmore\ny\tb\tc\tequal\n");
	const auto ds = make_dataset(f, p, &order);
	CHECK(ds.items()[0].id == "b");
	CHECK(ds.attribute("y").index == 0);
	CHECK(ds.attribute("z").index == 1);
	CHECK_THROWS_AS(make_dataset(f, pairs_from("z\ta\tq\tmore\n")), ValidationError);
	CHECK(make_dataset(f, {}).items()[0].id == "a");
}

TEST_CASE("generate")
{
	SUBCASE("counts, splits and determinism")
	{
		SynthSpec spec;
		spec.seed = 7;
		const auto a = generate(spec);
		const auto b = generate(spec);
		CHECK(features_text(a.dataset) == features_text(b.dataset));
		CHECK(pairs_text(a.dataset) == pairs_text(b.dataset));
		CHECK(truth_text(a.truth) == truth_text(b.truth));

		const auto& pairs = a.dataset.pairs(0);
		const auto n_ordered = std::count_if(pairs.begin(), pairs.end(), [](auto& p) { return p.relation == Relation::Ordered; });
		CHECK(n_ordered == 500);
		CHECK(pairs.size() == 600);
		CHECK(a.dataset.pairs(0, Split::Test).size() == 100 + 20);
		CHECK(a.dataset.size() == 200);
		CHECK(a.dataset.dimension() == 10);
		CHECK(a.dataset.attributes().front().name == "strength");

		for (const auto& pair : pairs) {
			CHECK(pair.first != pair.second);
			const double gap = a.truth.of(pair.first) - a.truth.of(pair.second);
			if (pair.relation == Relation::Ordered)
				CHECK(gap > spec.similarity_threshold);
			else
				CHECK(std::abs(gap) <= spec.similarity_threshold);
		}
		spec.seed = 8;
		CHECK(features_text(generate(spec).dataset) != features_text(a.dataset));
	}
	SUBCASE("zero threshold")
	{
		SynthSpec spec;
		spec.similarity_threshold = 0.0;
		spec.n_similar_pairs = 0;
		const auto s = generate(spec);
		for (const auto& pair : s.dataset.pairs(0))
			CHECK(pair.relation == Relation::Ordered);
	}
	SUBCASE("empty pair lists")
	{
		SynthSpec spec;
		spec.n_ordered_pairs = 0;
		spec.n_similar_pairs = 0;
		const auto s = generate(spec);
		CHECK(s.dataset.pairs(0).empty());
		CHECK(pairs_text(s.dataset).empty());
	}
	SUBCASE("nonlinear")
	{
		SynthSpec spec;
		spec.mode = SynthMode::Nonlinear;
		const auto s = generate(spec);
		CHECK(s.truth.description.find("sin") != std::string::npos);
		CHECK(s.dataset.pairs(0).size() == 600);
	}
	SUBCASE("category labels follow category ranks")
	{
		SynthSpec spec;
		spec.mode = SynthMode::Category;
		spec.n_categories = 8;
		spec.seed = 2;
		const auto s = generate(spec);
		REQUIRE(s.truth.category.size() == s.truth.ids.size());
		std::map<std::size_t, double> rank_of;
		for (std::size_t k = 0; k < s.truth.ids.size(); ++k) {
			const auto [it, inserted] = rank_of.emplace(s.truth.category[k], s.truth.strength[k]);
			CHECK(it->second == s.truth.strength[k]);
		}
		for (const auto& pair : s.dataset.pairs(0)) {
			if (pair.relation == Relation::Ordered)
				CHECK(s.truth.of(pair.first) > s.truth.of(pair.second));
			else
				CHECK(s.truth.of(pair.first) == s.truth.of(pair.second));
		}
	}
	SUBCASE("noisy labels")
	{
		SynthSpec spec;
		spec.noise_sigma = 0.5;
		const auto s = generate(spec);
		std::size_t flipped = 0;
		for (const auto& pair : s.dataset.pairs(0)) {
			if (pair.relation == Relation::Ordered && s.truth.of(pair.first) < s.truth.of(pair.second))
				++flipped;
		}
		CHECK(flipped > 0);
	}
	SUBCASE("validation")
	{
		SynthSpec spec;
		spec.dimension = 0;
		CHECK_THROWS_AS(generate(spec), ValidationError);
		spec = {};
		spec.mode = SynthMode::Nonlinear;
		spec.dimension = 1;
		CHECK_THROWS_AS(generate(spec), ValidationError);
		spec = {};
		spec.test_fraction = 1.5;
		CHECK_THROWS_AS(generate(spec), ValidationError);
		spec = {};
		spec.n_items = 3;
		spec.similarity_threshold = 100;
		spec.n_ordered_pairs = 1;
		CHECK_THROWS_AS(generate(spec), ValidationError);
		CHECK_THROWS_AS(parse_mode("quadratic"), ValidationError);
		CHECK(parse_mode("category") == SynthMode::Category);
		CHECK(to_string(SynthMode::Nonlinear) == "nonlinear");
	}
}

TEST_CASE("file formats round trip")
{
	SynthSpec spec;
	spec.n_items = 30;
	spec.n_ordered_pairs = 40;
	spec.n_similar_pairs = 10;
	spec.dimension = 3;
	const auto s = generate(spec);
	std::vector<std::string> order;
	const auto ds = make_dataset(features_from(features_text(s.dataset), &order), pairs_from(pairs_text(s.dataset)), &order);
	CHECK(features_text(ds) == features_text(s.dataset));
	CHECK(pairs_text(ds) == pairs_text(s.dataset));
	for (std::size_t k = 0; k < ds.size(); ++k)
		CHECK(ds.items()[k].values == s.dataset.items()[k].values);
	CHECK(ds.pairs(0) == s.dataset.pairs(0));

	std::istringstream truth_in(truth_text(s.truth));
	const auto truth = read_truth(truth_in);
	for (std::size_t k = 0; k < s.truth.ids.size(); ++k)
		CHECK(truth.at(s.truth.ids[k]) == s.truth.strength[k]);
	std::istringstream bad("a\tb\tc\n");
	CHECK_THROWS_AS(read_truth(bad), ValidationError);
}

TEST_CASE("truth_pair_sampler")
{
	SynthSpec spec;
	spec.mode = SynthMode::Category;
	spec.n_items = 50;
	spec.n_categories = 5;
	const auto s = generate(spec);
	const auto sampler = truth_pair_sampler(s.dataset, s.truth, 0.5);
	Rng rng(1);
	const auto batch = sampler(rng, 100);
	CHECK(batch.size() == 100);
	// An ordered example must put the higher-ranked item first.
	std::map<std::vector<double>, double> strength;
	for (const auto& item : s.dataset.items())
		strength[std::vector<double>(item.values.begin(), item.values.end())] = s.truth.of(item.id);
	for (const auto& e : batch) {
		const double a = strength.at(std::vector<double>(e.first.begin(), e.first.end()));
		const double b = strength.at(std::vector<double>(e.second.begin(), e.second.end()));
		if (e.relation == Relation::Ordered)
			CHECK(a > b);
		else
			CHECK(a == b);
	}
}
