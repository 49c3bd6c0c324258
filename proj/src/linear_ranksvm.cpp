#include <deeprank/linear_ranksvm.hpp>

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <limits>

namespace deeprank::linear {

namespace {

void check_dimensions(const Eigen::VectorXd& w, const PairDeltas& deltas)
{
	for (const auto* list : {&deltas.ordered, &deltas.similar}) {
		for (const auto& delta : *list) {
			if (delta.size() != w.size())
				throw DimensionError(fmt::format("pair delta has length {}, weights have length {}",
				                                 delta.size(), w.size()));
		}
	}
}

constexpr int max_halvings = 64;

} // namespace

double exact_decrease(const Eigen::VectorXd& w, const Eigen::VectorXd& dir, double step, const PairDeltas& deltas,
                      const LossConfig& cfg)
{
	double decrease = step * w.dot(dir) - 0.5 * step * step * dir.squaredNorm();
	double hinge = 0.0;
	for (const auto& delta : deltas.ordered) {
		const double a = w.dot(delta);
		const double b = step * dir.dot(delta);
		const double moved = a - b;
		if (1.0 - a > 0.0 && 1.0 - moved > 0.0) {
			hinge += -b * (2.0 - a - moved);
		} else {
			const double before = std::max(0.0, 1.0 - a);
			const double after = std::max(0.0, 1.0 - moved);
			hinge += before * before - after * after;
		}
	}
	double similar = 0.0;
	for (const auto& delta : deltas.similar) {
		const double a = w.dot(delta);
		const double b = step * dir.dot(delta);
		similar += b * (2.0 * a - b);
	}
	decrease += cfg.c1 * hinge + cfg.c2 * similar;
	return decrease;
}

PairDeltas make_deltas(std::span<const PairConstraint> pairs, const Dataset& dataset)
{
	PairDeltas deltas;
	for (const auto& pair : pairs) {
		Eigen::VectorXd delta = dataset.item(pair.first).values - dataset.item(pair.second).values;
		if (pair.relation == Relation::Ordered)
			deltas.ordered.push_back(std::move(delta));
		else
			deltas.similar.push_back(std::move(delta));
	}
	return deltas;
}

double objective(const Eigen::VectorXd& w, const PairDeltas& deltas, const LossConfig& cfg)
{
	check_dimensions(w, deltas);
	double hinge = 0.0;
	for (const auto& delta : deltas.ordered) {
		const double slack = 1.0 - w.dot(delta);
		if (slack > 0.0)
			hinge += slack * slack;
	}
	double similar = 0.0;
	for (const auto& delta : deltas.similar) {
		const double s = w.dot(delta);
		similar += s * s;
	}
	return 0.5 * w.squaredNorm() + cfg.c1 * hinge + cfg.c2 * similar;
}

Eigen::VectorXd objective_gradient(const Eigen::VectorXd& w, const PairDeltas& deltas, const LossConfig& cfg)
{
	check_dimensions(w, deltas);
	Eigen::VectorXd grad = w;
	for (const auto& delta : deltas.ordered) {
		const double slack = 1.0 - w.dot(delta);
		if (slack > 0.0)
			grad -= (2.0 * cfg.c1 * slack) * delta;
	}
	for (const auto& delta : deltas.similar)
		grad += (2.0 * cfg.c2 * w.dot(delta)) * delta;
	return grad;
}

LinearRankModel solve(const PairDeltas& deltas, std::size_t dimension, const LossConfig& cfg,
                      const SolveOptions& options)
{
	cfg.validate();
	if (deltas.empty())
		throw ValidationError("linear solve needs at least one pair");
	if (!(options.tol > 0.0))
		throw ValidationError("solver tolerance must be positive");

	LinearRankModel model;
	model.loss_config = cfg;
	model.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));

	double value = objective(model.weights, deltas, cfg);
	Eigen::VectorXd grad = objective_gradient(model.weights, deltas, cfg);
	if (options.on_iteration)
		options.on_iteration(0, value);

	auto finish = [&](std::size_t iterations) {
		model.training_objective = value;
		model.gradient_norm = grad.lpNorm<Eigen::Infinity>();
		model.iterations = iterations;
	};

	for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
		if (grad.lpNorm<Eigen::Infinity>() <= options.tol) {
			finish(iter);
			return model;
		}

		double step = 1.0;
		bool accepted = false;
		Eigen::VectorXd candidate;
		double candidate_value = 0.0;
		for (int h = 0; h < max_halvings; ++h, step *= 0.5) {
			candidate = model.weights - step * grad;
			candidate_value = objective(candidate, deltas, cfg);
			if (candidate_value < value) {
				accepted = true;
				break;
			}
		}
		// Close to the optimum the decrease drops below the resolution of J. Fall
		// back to judging the step by its decrease computed without cancellation;
		// the evaluated J may then move by rounding noise only.
		step = 1.0;
		for (int h = 0; !accepted && h < max_halvings; ++h, step *= 0.5) {
			if (exact_decrease(model.weights, grad, step, deltas, cfg) > 0.0) {
				candidate = model.weights - step * grad;
				candidate_value = objective(candidate, deltas, cfg);
				accepted = candidate != model.weights;
			}
		}
		if (!accepted) {
			finish(iter);
			throw ConvergenceError(
				fmt::format("line search stalled at iteration {} with gradient norm {:.3e}", iter, model.gradient_norm),
				model);
		}

		model.weights = std::move(candidate);
		value = candidate_value;
		grad = objective_gradient(model.weights, deltas, cfg);
		if (options.on_iteration)
			options.on_iteration(iter + 1, value);
	}

	finish(options.max_iters);
	if (model.gradient_norm <= options.tol)
		return model;
	throw ConvergenceError(fmt::format("no convergence within {} iterations (gradient norm {:.3e})",
	                                   options.max_iters, model.gradient_norm),
	                       model);
}

LinearRankModel solve(std::span<const PairConstraint> pairs, const Dataset& dataset, const LossConfig& cfg,
                      const SolveOptions& options)
{
	return solve(make_deltas(pairs, dataset), dataset.dimension(), cfg, options);
}

Eigen::VectorXd brute_force_solve(const PairDeltas& deltas, std::size_t dimension, const LossConfig& cfg,
                                  double grid_bound, double grid_step)
{
	if (dimension == 0 || dimension > 3)
		throw ValidationError(fmt::format("brute force search supports 1 to 3 dimensions, got {}", dimension));
	if (!(grid_step > 0.0) || !(grid_bound >= 0.0))
		throw ValidationError("grid step must be positive and bound non-negative");
	const Eigen::VectorXd probe = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));
	check_dimensions(probe, deltas);

	const auto steps = static_cast<long>(std::floor(grid_bound / grid_step + 0.5));
	const auto d = static_cast<int>(dimension);

	// Flattened deltas; the inner loop must not allocate.
	std::vector<std::array<double, 3>> ordered, similar;
	for (const auto& delta : deltas.ordered)
		ordered.push_back({delta[0], d > 1 ? delta[1] : 0.0, d > 2 ? delta[2] : 0.0});
	for (const auto& delta : deltas.similar)
		similar.push_back({delta[0], d > 1 ? delta[1] : 0.0, d > 2 ? delta[2] : 0.0});

	auto evaluate = [&](const std::array<double, 3>& w) {
		double hinge = 0.0;
		for (const auto& delta : ordered) {
			const double slack = 1.0 - (w[0] * delta[0] + w[1] * delta[1] + w[2] * delta[2]);
			if (slack > 0.0)
				hinge += slack * slack;
		}
		double sim = 0.0;
		for (const auto& delta : similar) {
			const double s = w[0] * delta[0] + w[1] * delta[1] + w[2] * delta[2];
			sim += s * s;
		}
		return 0.5 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) + cfg.c1 * hinge + cfg.c2 * sim;
	};

	std::array<double, 3> best{0.0, 0.0, 0.0};
	double best_value = std::numeric_limits<double>::infinity();
	const long span = 2 * steps + 1;
	const long extent1 = d > 1 ? span : 1;
	const long extent2 = d > 2 ? span : 1;
	for (long a = 0; a < span; ++a) {
		for (long b = 0; b < extent1; ++b) {
			for (long c = 0; c < extent2; ++c) {
				const std::array<double, 3> w{
					static_cast<double>(a - steps) * grid_step,
					d > 1 ? static_cast<double>(b - steps) * grid_step : 0.0,
					d > 2 ? static_cast<double>(c - steps) * grid_step : 0.0,
				};
				const double value = evaluate(w);
				if (value < best_value) {
					best_value = value;
					best = w;
				}
			}
		}
	}

	Eigen::VectorXd result(d);
	for (int k = 0; k < d; ++k)
		result[k] = best[static_cast<std::size_t>(k)];
	return result;
}

Eigen::VectorXd brute_force_solve(std::span<const PairConstraint> pairs, const Dataset& dataset,
                                  const LossConfig& cfg, double grid_bound, double grid_step)
{
	return brute_force_solve(make_deltas(pairs, dataset), dataset.dimension(), cfg, grid_bound, grid_step);
}

} // namespace deeprank::linear
