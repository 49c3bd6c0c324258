#pragma once

#include <deeprank/error.hpp>

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace deeprank {

/// One item, already reduced to a fixed-length real vector.
struct FeatureVector {
	std::string id;
	Eigen::VectorXd values;
};

/// `Ordered` always means the attribute is strictly stronger in `first`.
enum class Relation { Ordered, Similar };

/// Annotation as it arrives from a file or a generator, before canonicalization.
enum class RawLabel { FirstStronger, SecondStronger, Equal };

enum class Split { Train, Test };

struct PairConstraint {
	std::string first;
	std::string second;
	Relation relation = Relation::Ordered;
	Split split = Split::Train;

	friend bool operator==(const PairConstraint&, const PairConstraint&) = default;
};

/// Rewrites an annotation so that `Ordered` means first-stronger.
PairConstraint canonicalize_pair(PairConstraint pair, RawLabel raw_label);

struct AttributeSpec {
	std::string name;
	std::size_t index = 0;

	friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

/// Per-pair penalties of the rank-SVM objective.
struct LossConfig {
	double c1 = 0.1; ///< squared hinge on ordered pairs
	double c2 = 0.1; ///< squared score difference on similar pairs

	void validate() const;
};

/// Items, attributes and the per-attribute pair annotations.
///
/// Construction validates everything: uniform dimension, finite features, unique
/// ids and attribute names, and every pair referencing an existing item. Ordered
/// self-pairs are accepted with a warning since they can never be satisfied.
class Dataset {
public:
	Dataset(std::size_t dimension,
	        std::vector<FeatureVector> items,
	        std::vector<AttributeSpec> attributes,
	        std::map<std::size_t, std::vector<PairConstraint>> pairs);

	std::size_t dimension() const { return dimension_; }
	std::size_t size() const { return items_.size(); }

	/// Items in insertion order.
	const std::vector<FeatureVector>& items() const { return items_; }
	const FeatureVector& item(const std::string& id) const;
	bool contains(const std::string& id) const { return index_.contains(id); }

	const std::vector<AttributeSpec>& attributes() const { return attributes_; }
	const AttributeSpec& attribute(const std::string& name) const;
	std::optional<AttributeSpec> find_attribute(const std::string& name) const;

	/// All pairs of one attribute, in annotation order.
	const std::vector<PairConstraint>& pairs(std::size_t attribute_index) const;
	std::vector<PairConstraint> pairs(std::size_t attribute_index, Split split) const;

	/// Copy with every feature dimension shifted and scaled to zero mean and unit
	/// variance over the items that appear in training pairs (all items when no
	/// training pair exists). Constant dimensions are only centred.
	Dataset standardized() const;

private:
	std::size_t dimension_;
	std::vector<FeatureVector> items_;
	std::map<std::string, std::size_t> index_;
	std::vector<AttributeSpec> attributes_;
	std::map<std::size_t, std::vector<PairConstraint>> pairs_;
};

} // namespace deeprank
