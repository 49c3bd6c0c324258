#pragma once

#include <deeprank/core.hpp>
#include <deeprank/net.hpp>

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace deeprank::eval {

/// Any per-item ranking score.
using Scorer = std::function<double(const Eigen::VectorXd&)>;

Scorer model_scorer(const net::DeepRankModel& model);
Scorer linear_scorer(Eigen::VectorXd weights);

struct EvalReport {
	std::string attribute;
	std::size_t n_ordered_pairs = 0;
	std::size_t n_correct = 0;
	double accuracy = 0.0;
	std::size_t n_similar_excluded = 0;
};

/// attr <name> acc <value> correct <n>/<N> excluded <k>
std::string format_report(const EvalReport& report);

/// 1 if score(x_first) - score(x_second) > 0, otherwise 0 (ties predict 0).
int predict_pair(const Scorer& scorer, const Eigen::VectorXd& x_first, const Eigen::VectorXd& x_second);

/// Fraction of Ordered pairs predicted in their annotated order. Similar pairs
/// are never scored, only counted. Throws when no Ordered pair is present.
EvalReport pairwise_accuracy(const Scorer& scorer, std::span<const PairConstraint> pairs, const Dataset& dataset,
                             const std::string& attribute = {});

struct RankedItem {
	std::string id;
	double score = 0.0;
};

/// Items by descending score, ties broken by ascending id. With `normalize` the
/// scores are min-max mapped onto [-1, 1]; a zero range maps everything to 0.
std::vector<RankedItem> rank_items(const Scorer& scorer, std::span<const std::string> ids, const Dataset& dataset,
                                   bool normalize);

/// Tie-corrected Kendall tau-b by pairwise enumeration.
double kendall_tau(std::span<const double> scores, std::span<const double> truth);

/// d score(x) / dx for a trained model.
Eigen::VectorXd input_attribution(const net::DeepRankModel& model, const Eigen::VectorXd& x);

} // namespace deeprank::eval
