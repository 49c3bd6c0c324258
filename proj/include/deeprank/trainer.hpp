#pragma once

#include <deeprank/core.hpp>
#include <deeprank/linear_ranksvm.hpp>
#include <deeprank/net.hpp>
#include <deeprank/rng.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace deeprank::train {

struct TrainConfig {
	LossConfig loss;
	double learning_rate = 1e-5;
	std::size_t batch_size = 48;
	std::size_t epochs = 200;
	double rho = 0.9;      ///< RMSProp decay of the squared-gradient average
	double epsilon = 1e-7; ///< RMSProp denominator offset
	std::uint64_t seed = 0;
	bool shuffle_each_epoch = true;
	double weight_decay_hidden = 0.0; ///< L2 on hidden weight matrices; ranking weights use the 1/2|w|^2 term
	double feature_jitter = 0.0;      ///< stddev of additive Gaussian noise on training features, 0 = off

	void validate() const;
};

/// Running average of squared gradients, one entry per parameter.
struct OptimizerState {
	net::Parameters accumulator;

	static OptimizerState zeros_like(const net::Parameters& params);
};

/// A pair with its feature vectors resolved.
struct PairExample {
	Relation relation = Relation::Ordered;
	Eigen::VectorXd first;
	Eigen::VectorXd second;
};

std::vector<PairExample> make_examples(std::span<const PairConstraint> pairs, const Dataset& dataset);

struct BatchLoss {
	double loss = 0.0;
	net::ParameterGradients gradients;
};

/// Summed rank-SVM loss over the batch plus 1/2|w|^2 on the ranking weights, and
/// its gradient with respect to every parameter.
BatchLoss batch_loss(const net::DeepRankModel& model, std::span<const PairExample> batch, const LossConfig& cfg,
                     double weight_decay_hidden = 0.0);

/// acc <- rho acc + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(acc) + eps)
void rmsprop_step(net::Parameters& params, const net::ParameterGradients& grads, OptimizerState& state,
                  const TrainConfig& cfg);

/// Order in which the pairs are visited in `epoch` (0-based); a pure function of
/// (seed, epoch, n).
std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t n);

/// epoch <k> loss <value> pairs <n>
std::string format_epoch_log(std::size_t epoch, double loss, std::size_t pairs);

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss, std::size_t pairs)>;

struct TrainResult {
	net::DeepRankModel model;
	std::vector<double> history; ///< mean batch loss of each epoch
};

/// Mini-batch RMSProp on a fixed pair list. Epochs are numbered from 1 in the
/// callback. The final short batch of an epoch is kept.
TrainResult train_examples(std::span<const PairExample> examples, const net::NetArchitecture& arch,
                           const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Trains one model for `attribute` on its training-split pairs.
TrainResult train(const Dataset& dataset, const AttributeSpec& attribute, const net::NetArchitecture& arch,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Draws a fresh batch of labelled pairs.
using BatchSampler = std::function<std::vector<PairExample>(Rng& rng, std::size_t batch_size)>;

/// One RMSProp step per iteration on batches drawn from `sampler`, for
/// annotations that are cheaper to sample than to enumerate (category-level
/// labels). history holds the loss of each iteration.
TrainResult train_sampled(const BatchSampler& sampler, const net::NetArchitecture& arch, const TrainConfig& cfg,
                          std::size_t iterations, const EpochCallback& on_iteration = {});

struct RankingFit {
	std::vector<double> history; ///< loss after each accepted step, starting with the initial loss
	std::size_t iterations = 0;
	double gradient_norm = 0.0;
	/// True when no step lowered the evaluated loss before the gradient reached
	/// tol: the loss is flat to rounding around the final weights.
	bool stalled = false;
};

/// Full-batch gradient descent with halving line search on the ranking weights
/// only; hidden layers stay frozen. Used to tie the deep loss back to the convex
/// linear problem. The recorded loss never increases.
RankingFit fit_ranking_layer(net::DeepRankModel& model, std::span<const PairExample> examples, const LossConfig& cfg,
                             const linear::SolveOptions& options = {});

} // namespace deeprank::train
