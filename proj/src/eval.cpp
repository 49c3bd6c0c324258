#include <deeprank/eval.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace deeprank::eval {

Scorer model_scorer(const net::DeepRankModel& model)
{
	return [&model](const Eigen::VectorXd& x) { return net::score(model, x); };
}

Scorer linear_scorer(Eigen::VectorXd weights)
{
	return [w = std::move(weights)](const Eigen::VectorXd& x) {
		if (x.size() != w.size())
			throw DimensionError(fmt::format("input has {} values, linear model expects {}", x.size(), w.size()));
		return w.dot(x);
	};
}

std::string format_report(const EvalReport& report)
{
	return fmt::format("attr {} acc {:.4f} correct {}/{} excluded {}", report.attribute, report.accuracy,
	                   report.n_correct, report.n_ordered_pairs, report.n_similar_excluded);
}

int predict_pair(const Scorer& scorer, const Eigen::VectorXd& x_first, const Eigen::VectorXd& x_second)
{
	if (x_first.size() != x_second.size())
		throw DimensionError("pair members have different dimensions");
	return scorer(x_first) - scorer(x_second) > 0.0 ? 1 : 0;
}

EvalReport pairwise_accuracy(const Scorer& scorer, std::span<const PairConstraint> pairs, const Dataset& dataset,
                             const std::string& attribute)
{
	EvalReport report;
	report.attribute = attribute;
	for (const auto& pair : pairs) {
		if (pair.relation == Relation::Similar) {
			++report.n_similar_excluded;
			continue;
		}
		++report.n_ordered_pairs;
		report.n_correct += static_cast<std::size_t>(
			predict_pair(scorer, dataset.item(pair.first).values, dataset.item(pair.second).values));
	}
	if (report.n_ordered_pairs == 0)
		throw ValidationError(fmt::format("no ordered pairs to evaluate ({} similar pairs excluded)",
		                                  report.n_similar_excluded));
	report.accuracy = static_cast<double>(report.n_correct) / static_cast<double>(report.n_ordered_pairs);
	return report;
}

std::vector<RankedItem> rank_items(const Scorer& scorer, std::span<const std::string> ids, const Dataset& dataset,
                                   bool normalize)
{
	if (ids.empty())
		throw ValidationError("no items to rank");
	std::vector<RankedItem> ranked;
	ranked.reserve(ids.size());
	for (const auto& id : ids)
		ranked.push_back({id, scorer(dataset.item(id).values)});

	std::stable_sort(ranked.begin(), ranked.end(), [](const RankedItem& a, const RankedItem& b) {
		if (a.score != b.score)
			return a.score > b.score;
		return a.id < b.id;
	});

	if (normalize) {
		const double hi = ranked.front().score;
		const double lo = ranked.back().score;
		const double range = hi - lo;
		if (range > 0.0) {
			for (auto& item : ranked)
				item.score = item.score == hi ? 1.0 : item.score == lo ? -1.0 : 2.0 * (item.score - lo) / range - 1.0;
		} else {
			warn("all scores are equal; normalized scores set to 0");
			for (auto& item : ranked)
				item.score = 0.0;
		}
	}
	return ranked;
}

double kendall_tau(std::span<const double> scores, std::span<const double> truth)
{
	if (scores.size() != truth.size())
		throw DimensionError(fmt::format("kendall tau needs equal lengths ({} vs {})", scores.size(), truth.size()));
	if (scores.size() < 2)
		throw ValidationError("kendall tau needs at least two values");

	long long concordant = 0;
	long long discordant = 0;
	long long tied_scores = 0;
	long long tied_truth = 0;
	for (std::size_t i = 0; i < scores.size(); ++i) {
		for (std::size_t j = i + 1; j < scores.size(); ++j) {
			const double ds = scores[i] - scores[j];
			const double dt = truth[i] - truth[j];
			if (ds == 0.0 && dt == 0.0)
				continue;
			if (ds == 0.0)
				++tied_scores;
			else if (dt == 0.0)
				++tied_truth;
			else if ((ds > 0.0) == (dt > 0.0))
				++concordant;
			else
				++discordant;
		}
	}
	// tau-b: (C - D) / sqrt((C + D + T_x)(C + D + T_y)), joint ties excluded from both.
	const double base = static_cast<double>(concordant + discordant);
	const double n_scores = base + static_cast<double>(tied_truth);
	const double n_truth = base + static_cast<double>(tied_scores);
	if (n_truth == 0.0)
		throw ValidationError("kendall tau is undefined when every truth value is tied");
	if (n_scores == 0.0)
		throw ValidationError("kendall tau is undefined when every score is tied");
	return static_cast<double>(concordant - discordant) / std::sqrt(n_scores * n_truth);
}

Eigen::VectorXd input_attribution(const net::DeepRankModel& model, const Eigen::VectorXd& x)
{
	return net::input_gradient(model, x);
}

} // namespace deeprank::eval
