#pragma once

#include <deeprank/core.hpp>
#include <deeprank/rng.hpp>
#include <deeprank/trainer.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace deeprank::data {

enum class SynthMode { Linear, Nonlinear, Category };

std::string to_string(SynthMode mode);
SynthMode parse_mode(const std::string& text);

/// Recipe for a synthetic single-attribute dataset.
///
/// Linear:    s(x) = v . x for a random unit vector v.
/// Nonlinear: s(x) = sin(3 v1 . x) + (v2 . x)^2 for random orthonormal v1, v2.
/// Category:  items belong to one of `n_categories` groups scattered around
///            random centres; s(x) is the rank of the item's group.
///
/// Pairs are drawn uniformly over distinct items. With noisy strengths
/// s + N(0, noise_sigma^2), a pair is Ordered (stronger first) when the strengths
/// differ by more than `similarity_threshold`, else Similar. Of each relation the
/// last round(test_fraction * count) pairs are tagged as test.
struct SynthSpec {
	SynthMode mode = SynthMode::Linear;
	std::size_t dimension = 10;
	std::size_t n_items = 200;
	std::size_t n_ordered_pairs = 500;
	std::size_t n_similar_pairs = 100;
	double similarity_threshold = 0.1;
	double noise_sigma = 0.0;
	std::uint64_t seed = 0;
	std::size_t n_categories = 8;
	double test_fraction = 0.2;
	std::string attribute = "strength";

	void validate() const;
};

/// Ground-truth item strengths of a synthetic dataset, in dataset item order.
struct LatentTruth {
	std::vector<std::string> ids;
	std::vector<double> strength;
	std::vector<std::size_t> category; ///< Category mode only
	std::string description;

	double of(const std::string& id) const;
};

struct Synthetic {
	Dataset dataset;
	LatentTruth truth;
};

Synthetic generate(const SynthSpec& spec);

/// On-the-fly pairs labelled from the latent strengths, for training with
/// category-level annotations. Similar pairs are labelled with the same
/// threshold rule as generate().
train::BatchSampler truth_pair_sampler(const Dataset& dataset, const LatentTruth& truth, double similarity_threshold);

// Features: one `id,v1,...,vd` line per item; `#` lines are comments.
// Pairs:    `attribute<TAB>id_i<TAB>id_j<TAB>more|less|equal[<TAB>train|test]`.
// Truth:    `id<TAB>strength`.

using FeatureMap = std::map<std::string, FeatureVector>;
using PairMap = std::map<std::string, std::vector<PairConstraint>>;

/// Features keyed by id. `order`, if given, receives the ids in file order.
FeatureMap read_features(std::istream& in, std::vector<std::string>* order = nullptr);
FeatureMap load_features(const std::filesystem::path& path, std::vector<std::string>* order = nullptr);

PairMap read_pairs(std::istream& in);
PairMap load_pairs(const std::filesystem::path& path);

/// Builds a dataset from loaded files. Items keep file order when `order` is
/// given; attributes are indexed by name order.
Dataset make_dataset(const FeatureMap& features, const PairMap& pairs, const std::vector<std::string>* order = nullptr);

void write_features(std::ostream& out, const Dataset& dataset);
void write_pairs(std::ostream& out, const Dataset& dataset);
void write_truth(std::ostream& out, const LatentTruth& truth);

std::map<std::string, double> read_truth(std::istream& in);

} // namespace deeprank::data
