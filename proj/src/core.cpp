#include <deeprank/core.hpp>

#include <fmt/format.h>

#include <cmath>
#include <iostream>
#include <mutex>
#include <set>
#include <utility>

namespace deeprank {

namespace {

std::mutex warning_mutex;

WarningHandler& warning_handler()
{
	static WarningHandler handler = [](std::string_view message) {
		std::cerr << "warning: " << message << '\n';
	};
	return handler;
}

} // namespace

WarningHandler set_warning_handler(WarningHandler handler)
{
	std::lock_guard lock(warning_mutex);
	return std::exchange(warning_handler(), std::move(handler));
}

void warn(std::string_view message)
{
	std::lock_guard lock(warning_mutex);
	if (warning_handler())
		warning_handler()(message);
}

PairConstraint canonicalize_pair(PairConstraint pair, RawLabel raw_label)
{
	switch (raw_label) {
	case RawLabel::FirstStronger:
		pair.relation = Relation::Ordered;
		break;
	case RawLabel::SecondStronger:
		std::swap(pair.first, pair.second);
		pair.relation = Relation::Ordered;
		break;
	case RawLabel::Equal:
		pair.relation = Relation::Similar;
		break;
	}
	return pair;
}

void LossConfig::validate() const
{
	if (!(c1 >= 0.0) || !(c2 >= 0.0) || !std::isfinite(c1) || !std::isfinite(c2))
		throw ValidationError(fmt::format("loss penalties must be finite and non-negative (c1={}, c2={})", c1, c2));
}

Dataset::Dataset(std::size_t dimension,
                 std::vector<FeatureVector> items,
                 std::vector<AttributeSpec> attributes,
                 std::map<std::size_t, std::vector<PairConstraint>> pairs)
	: dimension_(dimension)
	, items_(std::move(items))
	, attributes_(std::move(attributes))
	, pairs_(std::move(pairs))
{
	if (dimension_ == 0)
		throw ValidationError("dataset dimension must be positive");

	for (std::size_t i = 0; i < items_.size(); ++i) {
		const auto& item = items_[i];
		if (static_cast<std::size_t>(item.values.size()) != dimension_)
			throw DimensionError(fmt::format("item '{}' has {} values, dataset dimension is {}",
			                                 item.id, item.values.size(), dimension_));
		if (!item.values.allFinite())
			throw ValidationError(fmt::format("item '{}' has non-finite feature values", item.id));
		if (!index_.emplace(item.id, i).second)
			throw ValidationError(fmt::format("duplicate item id '{}'", item.id));
	}

	std::set<std::string> names;
	std::set<std::size_t> indices;
	for (const auto& attribute : attributes_) {
		if (!names.insert(attribute.name).second)
			throw ValidationError(fmt::format("duplicate attribute name '{}'", attribute.name));
		if (!indices.insert(attribute.index).second)
			throw ValidationError(fmt::format("duplicate attribute index {}", attribute.index));
	}

	for (const auto& [attribute_index, list] : pairs_) {
		if (!indices.contains(attribute_index))
			throw ValidationError(fmt::format("pairs given for undeclared attribute index {}", attribute_index));
		for (const auto& pair : list) {
			for (const auto* id : {&pair.first, &pair.second}) {
				if (!contains(*id))
					throw ValidationError(fmt::format("pair ({}, {}) references unknown item '{}'",
					                                  pair.first, pair.second, *id));
			}
			if (pair.first == pair.second && pair.relation == Relation::Ordered)
				warn(fmt::format("ordered self-pair ({0}, {0}) can never be satisfied", pair.first));
		}
	}
	for (const auto& attribute : attributes_)
		pairs_.try_emplace(attribute.index);
}

const FeatureVector& Dataset::item(const std::string& id) const
{
	auto it = index_.find(id);
	if (it == index_.end())
		throw ValidationError(fmt::format("unknown item id '{}'", id));
	return items_[it->second];
}

const AttributeSpec& Dataset::attribute(const std::string& name) const
{
	for (const auto& attribute : attributes_) {
		if (attribute.name == name)
			return attribute;
	}
	throw ValidationError(fmt::format("unknown attribute '{}'", name));
}

std::optional<AttributeSpec> Dataset::find_attribute(const std::string& name) const
{
	for (const auto& attribute : attributes_) {
		if (attribute.name == name)
			return attribute;
	}
	return std::nullopt;
}

const std::vector<PairConstraint>& Dataset::pairs(std::size_t attribute_index) const
{
	auto it = pairs_.find(attribute_index);
	if (it == pairs_.end())
		throw ValidationError(fmt::format("unknown attribute index {}", attribute_index));
	return it->second;
}

std::vector<PairConstraint> Dataset::pairs(std::size_t attribute_index, Split split) const
{
	std::vector<PairConstraint> selected;
	for (const auto& pair : pairs(attribute_index)) {
		if (pair.split == split)
			selected.push_back(pair);
	}
	return selected;
}

Dataset Dataset::standardized() const
{
	std::set<std::string> training_ids;
	for (const auto& [index, list] : pairs_) {
		for (const auto& pair : list) {
			if (pair.split == Split::Train) {
				training_ids.insert(pair.first);
				training_ids.insert(pair.second);
			}
		}
	}

	const auto d = static_cast<Eigen::Index>(dimension_);
	Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
	Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
	std::size_t count = 0;
	for (const auto& item : items_) {
		if (!training_ids.empty() && !training_ids.contains(item.id))
			continue;
		mean += item.values;
		++count;
	}
	if (count == 0)
		return *this;
	mean /= static_cast<double>(count);
	for (const auto& item : items_) {
		if (!training_ids.empty() && !training_ids.contains(item.id))
			continue;
		sq += (item.values - mean).cwiseAbs2();
	}
	Eigen::VectorXd scale = (sq / static_cast<double>(count)).cwiseSqrt();
	for (Eigen::Index k = 0; k < d; ++k) {
		if (!(scale[k] > 0.0))
			scale[k] = 1.0;
	}

	std::vector<FeatureVector> items = items_;
	for (auto& item : items)
		item.values = ((item.values - mean).array() / scale.array()).matrix();
	return Dataset(dimension_, std::move(items), attributes_, pairs_);
}

} // namespace deeprank
