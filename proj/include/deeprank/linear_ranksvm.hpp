#pragma once

#include <deeprank/core.hpp>

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace deeprank::linear {

/// Feature differences x_first - x_second, split by relation.
struct PairDeltas {
	std::vector<Eigen::VectorXd> ordered;
	std::vector<Eigen::VectorXd> similar;

	bool empty() const { return ordered.empty() && similar.empty(); }
};

PairDeltas make_deltas(std::span<const PairConstraint> pairs, const Dataset& dataset);

/// J(w) = 1/2 |w|^2 + c1 sum_ordered max(0, 1 - w.d)^2 + c2 sum_similar (w.d)^2
double objective(const Eigen::VectorXd& w, const PairDeltas& deltas, const LossConfig& cfg);

/// J(w) - J(w - step * dir), evaluated term by term so that the result keeps its
/// relative precision when it is far below the rounding error of J itself.
double exact_decrease(const Eigen::VectorXd& w, const Eigen::VectorXd& dir, double step, const PairDeltas& deltas,
                      const LossConfig& cfg);

/// Analytic gradient of objective(). A pair sitting exactly on the hinge
/// boundary contributes nothing, which is the exact derivative there.
Eigen::VectorXd objective_gradient(const Eigen::VectorXd& w, const PairDeltas& deltas, const LossConfig& cfg);

/// Bias-free linear ranker.
struct LinearRankModel {
	Eigen::VectorXd weights;
	LossConfig loss_config;
	double training_objective = 0.0;
	double gradient_norm = 0.0; ///< infinity norm at the returned iterate
	std::size_t iterations = 0;
};

struct SolveOptions {
	double tol = 1e-8;
	std::size_t max_iters = 100000;
	/// Called once per accepted iterate, including the initial point (iteration 0).
	std::function<void(std::size_t iteration, double objective)> on_iteration;
};

/// Raised when solve() runs out of iterations; carries the best iterate.
class ConvergenceError : public NumericalError {
public:
	ConvergenceError(const std::string& message, LinearRankModel best)
		: NumericalError(message)
		, best_(std::move(best))
	{
	}

	const LinearRankModel& best() const { return best_; }

private:
	LinearRankModel best_;
};

/// Full-batch gradient descent from w = 0 with a halving line search that starts
/// at step 1.0 on every iteration. Terminates when |grad J|_inf <= tol.
LinearRankModel solve(const PairDeltas& deltas, std::size_t dimension, const LossConfig& cfg,
                      const SolveOptions& options = {});

LinearRankModel solve(std::span<const PairConstraint> pairs, const Dataset& dataset, const LossConfig& cfg,
                      const SolveOptions& options = {});

/// Exhaustive grid minimization of objective() over [-bound, bound]^d, d <= 3.
/// Test oracle for solve().
Eigen::VectorXd brute_force_solve(const PairDeltas& deltas, std::size_t dimension, const LossConfig& cfg,
                                  double grid_bound, double grid_step);

Eigen::VectorXd brute_force_solve(std::span<const PairConstraint> pairs, const Dataset& dataset,
                                  const LossConfig& cfg, double grid_bound, double grid_step);

} // namespace deeprank::linear
