#pragma once

#include <deeprank/core.hpp>
#include <deeprank/rng.hpp>

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace deeprank::net {

enum class Activation { ReLU, Tanh };

std::string to_string(Activation activation);
Activation parse_activation(const std::string& text);

struct NetArchitecture {
	std::size_t input_dim = 1;
	std::vector<std::size_t> hidden_dims{64, 64};
	std::size_t embedding_dim = 32;
	Activation activation = Activation::ReLU;

	void validate() const;

	friend bool operator==(const NetArchitecture&, const NetArchitecture&) = default;
};

/// y = W x + b. The embedding layer keeps an empty bias.
struct DenseLayer {
	Eigen::MatrixXd weight;
	Eigen::VectorXd bias;
};

/// Everything trainable: the hidden layers, the (linear) embedding layer as the
/// last entry of `layers`, and the bias-free ranking weights. There is exactly
/// one copy, used by both branches of a pair.
struct Parameters {
	std::vector<DenseLayer> layers;
	Eigen::VectorXd ranking;

	static Parameters zeros_like(const Parameters& other);

	/// Views over every tensor in a fixed order (layer weights and biases, then
	/// ranking). Element order inside a view is Eigen's storage order.
	std::vector<std::span<double>> tensors();
	std::vector<std::span<const double>> tensors() const;
	std::vector<std::string> tensor_names() const;

	std::size_t count() const;
	bool all_finite() const;
	bool same_shape(const Parameters& other) const;
};

using ParameterGradients = Parameters;

/// Siamese ranking network: h(x) from an MLP, score w . h(x) with no bias.
class DeepRankModel {
public:
	DeepRankModel(NetArchitecture arch, Parameters params);

	const NetArchitecture& arch() const { return arch_; }
	const Parameters& params() const { return params_; }

	/// Mutable access invalidates outstanding forward caches.
	Parameters& mutable_params()
	{
		++version_;
		return params_;
	}

	std::uint64_t version() const { return version_; }

private:
	NetArchitecture arch_;
	Parameters params_;
	std::uint64_t version_ = 0;
};

/// Xavier-uniform hidden and embedding weights, zero hidden biases, ranking weights from
/// N(0, 0.01^2). Fully determined by `seed`.
DeepRankModel init(const NetArchitecture& arch, std::uint64_t seed);

constexpr double ranking_init_stddev = 0.01;

/// Linear ranker w . x expressed as a network: no hidden layers, identity
/// embedding, ranking weights w.
DeepRankModel linear_model(const Eigen::VectorXd& weights);

Eigen::VectorXd embed(const DeepRankModel& model, const Eigen::VectorXd& x);
double score(const DeepRankModel& model, const Eigen::VectorXd& x);

/// Activations of one branch, kept for the backward pass.
struct BranchCache {
	std::vector<Eigen::VectorXd> inputs; ///< input to each layer; inputs[0] = x
	std::vector<Eigen::VectorXd> pre;    ///< pre-activation of each hidden layer
	Eigen::VectorXd embedding;
};

struct ForwardCache {
	double diff_score = 0.0;
	BranchCache first;
	BranchCache second;
	const DeepRankModel* model = nullptr;
	std::uint64_t version = 0;
};

/// diff_score = w . (h(x_first) - h(x_second)); both embeddings are computed
/// before the single subtraction, so swapping the inputs negates the score exactly.
ForwardCache pair_forward(const DeepRankModel& model, const Eigen::VectorXd& x_first,
                          const Eigen::VectorXd& x_second);

/// Gradient of diff_score times `upstream` with respect to every parameter. Both
/// branches accumulate into the same gradient set.
ParameterGradients pair_backward(const DeepRankModel& model, const ForwardCache& cache, double upstream);

/// As pair_backward, adding into an existing gradient set.
void accumulate_pair_backward(const DeepRankModel& model, const ForwardCache& cache, double upstream,
                              ParameterGradients& grads);

/// d score(x) / d x.
Eigen::VectorXd input_gradient(const DeepRankModel& model, const Eigen::VectorXd& x);

/// Smallest |pre-activation| over all hidden units for input x; +inf for Tanh
/// or when there are no hidden layers.
double relu_margin(const DeepRankModel& model, const Eigen::VectorXd& x);

/// Draws a pair of N(0, I) inputs, redrawing until every ReLU pre-activation of
/// both branches is at least `margin` away from the kink.
std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_smooth_pair(const DeepRankModel& model, Rng& rng,
                                                               double margin = 1e-3);

using GradientHook = std::function<void(ParameterGradients&)>;

/// Maximum relative error |a-b| / max(|a|, |b|, 1e-12) between central
/// differences of diff_score and pair_backward, over every parameter. `hook`, if
/// set, may alter the analytic gradients before the comparison.
double grad_check(const DeepRankModel& model, const Eigen::VectorXd& x_first, const Eigen::VectorXd& x_second,
                  double step = 1e-5, const GradientHook& hook = {});

} // namespace deeprank::net
