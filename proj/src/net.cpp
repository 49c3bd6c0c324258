#include <deeprank/net.hpp>
#include <deeprank/rng.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace deeprank::net {

namespace {

void check_input(const DeepRankModel& model, const Eigen::VectorXd& x)
{
	if (static_cast<std::size_t>(x.size()) != model.arch().input_dim)
		throw DimensionError(fmt::format("input has {} values, model expects {}", x.size(), model.arch().input_dim));
}

void activate(Activation activation, const Eigen::VectorXd& pre, Eigen::VectorXd& out)
{
	if (activation == Activation::ReLU)
		out = pre.cwiseMax(0.0);
	else
		out = pre.array().tanh().matrix();
}

// Multiplies `grad` in place by the activation derivative at `pre`.
void activation_backward(Activation activation, const Eigen::VectorXd& pre, Eigen::VectorXd& grad)
{
	if (activation == Activation::ReLU) {
		for (Eigen::Index k = 0; k < grad.size(); ++k) {
			if (!(pre[k] > 0.0))
				grad[k] = 0.0;
		}
	} else {
		grad.array() *= 1.0 - pre.array().tanh().square();
	}
}

void forward_branch(const DeepRankModel& model, const Eigen::VectorXd& x, BranchCache& cache)
{
	const auto& layers = model.params().layers;
	const std::size_t hidden = layers.size() - 1;
	cache.inputs.resize(layers.size());
	cache.pre.resize(hidden);
	cache.inputs[0] = x;
	for (std::size_t l = 0; l < hidden; ++l) {
		cache.pre[l].noalias() = layers[l].weight * cache.inputs[l];
		cache.pre[l] += layers[l].bias;
		activate(model.arch().activation, cache.pre[l], cache.inputs[l + 1]);
	}
	cache.embedding.noalias() = layers[hidden].weight * cache.inputs[hidden];
}

// Backpropagates d(out)/d(embedding) = grad_embedding through one branch.
// Returns the gradient with respect to the branch input.
Eigen::VectorXd backward_branch(const DeepRankModel& model, const BranchCache& cache,
                                Eigen::VectorXd grad, ParameterGradients* grads)
{
	const auto& layers = model.params().layers;
	for (std::size_t l = layers.size(); l-- > 0;) {
		if (l + 1 < layers.size())
			activation_backward(model.arch().activation, cache.pre[l], grad);
		if (grads) {
			grads->layers[l].weight.noalias() += grad * cache.inputs[l].transpose();
			if (grads->layers[l].bias.size() > 0)
				grads->layers[l].bias += grad;
		}
		Eigen::VectorXd next = layers[l].weight.transpose() * grad;
		grad = std::move(next);
	}
	return grad;
}

#if defined(__SIZEOF_FLOAT128__)
using ReluProbeScalar = __float128;
#else
using ReluProbeScalar = long double;
#endif

// Copy of the parameters in a wider scalar type, for finite-difference probes.
// Views follow Parameters::tensors() order and Eigen's column-major layout.
template <typename T>
struct WideParameters {
	struct Layer {
		std::size_t rows = 0;
		std::size_t cols = 0;
		std::vector<T> weight;
		std::vector<T> bias;
	};
	std::vector<Layer> layers;
	std::vector<T> ranking;
	Activation activation;

	WideParameters(const Parameters& params, Activation act)
		: activation(act)
	{
		for (const auto& layer : params.layers) {
			Layer wide{static_cast<std::size_t>(layer.weight.rows()), static_cast<std::size_t>(layer.weight.cols()),
			           widen(layer.weight.data(), layer.weight.size()), widen(layer.bias.data(), layer.bias.size())};
			layers.push_back(std::move(wide));
		}
		ranking = widen(params.ranking.data(), params.ranking.size());
	}

	static std::vector<T> widen(const double* data, Eigen::Index n)
	{
		return std::vector<T>(data, data + n);
	}

	std::vector<std::span<T>> tensors()
	{
		std::vector<std::span<T>> views;
		for (auto& layer : layers) {
			views.emplace_back(layer.weight);
			if (!layer.bias.empty())
				views.emplace_back(layer.bias);
		}
		views.emplace_back(ranking);
		return views;
	}

	std::vector<T> embed(std::vector<T> x) const
	{
		for (std::size_t l = 0; l < layers.size(); ++l) {
			const auto& layer = layers[l];
			std::vector<T> y = layer.bias.empty() ? std::vector<T>(layer.rows, T(0)) : layer.bias;
			for (std::size_t c = 0; c < layer.cols; ++c) {
				for (std::size_t r = 0; r < layer.rows; ++r)
					y[r] += layer.weight[c * layer.rows + r] * x[c];
			}
			if (l + 1 < layers.size()) {
				for (auto& v : y) {
					if (activation == Activation::ReLU)
						v = v > T(0) ? v : T(0);
					else
						v = static_cast<T>(std::tanh(static_cast<long double>(v)));
				}
			}
			x = std::move(y);
		}
		return x;
	}

	T diff_score(const std::vector<T>& a, const std::vector<T>& b) const
	{
		const auto ea = embed(a);
		const auto eb = embed(b);
		T total = 0;
		for (std::size_t k = 0; k < ranking.size(); ++k)
			total += ranking[k] * (ea[k] - eb[k]);
		return total;
	}
};

template <typename T>
double max_probe_error(const DeepRankModel& model, const Parameters& analytic, const Eigen::VectorXd& x_first,
                       const Eigen::VectorXd& x_second, double step)
{
	WideParameters<T> probe(model.params(), model.arch().activation);
	const auto a = WideParameters<T>::widen(x_first.data(), x_first.size());
	const auto b = WideParameters<T>::widen(x_second.data(), x_second.size());
	const T h = step;
	const auto analytic_views = analytic.tensors();
	auto probe_views = probe.tensors();
	double worst = 0.0;
	for (std::size_t t = 0; t < analytic_views.size(); ++t) {
		for (std::size_t k = 0; k < analytic_views[t].size(); ++k) {
			T& theta = probe_views[t][k];
			const T saved = theta;
			theta = saved + h;
			const T plus = probe.diff_score(a, b);
			theta = saved - h;
			const T minus = probe.diff_score(a, b);
			theta = saved;

			const auto numeric = static_cast<double>((plus - minus) / (T(2) * h));
			const double exact = analytic_views[t][k];
			const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-12});
			worst = std::max(worst, std::abs(numeric - exact) / denom);
		}
	}
	return worst;
}

} // namespace

std::string to_string(Activation activation)
{
	return activation == Activation::ReLU ? "relu" : "tanh";
}

Activation parse_activation(const std::string& text)
{
	std::string lower = text;
	std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
	if (lower == "relu")
		return Activation::ReLU;
	if (lower == "tanh")
		return Activation::Tanh;
	throw ValidationError(fmt::format("unknown activation '{}' (expected relu or tanh)", text));
}

void NetArchitecture::validate() const
{
	if (input_dim == 0 || embedding_dim == 0)
		throw ValidationError("network dimensions must be at least 1");
	for (auto width : hidden_dims) {
		if (width == 0)
			throw ValidationError("hidden layer widths must be at least 1");
	}
}

Parameters Parameters::zeros_like(const Parameters& other)
{
	Parameters zeros;
	zeros.layers.reserve(other.layers.size());
	for (const auto& layer : other.layers) {
		zeros.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
		                        Eigen::VectorXd::Zero(layer.bias.size())});
	}
	zeros.ranking = Eigen::VectorXd::Zero(other.ranking.size());
	return zeros;
}

std::vector<std::span<double>> Parameters::tensors()
{
	std::vector<std::span<double>> views;
	for (auto& layer : layers) {
		views.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
		if (layer.bias.size() > 0)
			views.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
	}
	views.emplace_back(ranking.data(), static_cast<std::size_t>(ranking.size()));
	return views;
}

std::vector<std::span<const double>> Parameters::tensors() const
{
	std::vector<std::span<const double>> views;
	for (const auto& layer : layers) {
		views.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
		if (layer.bias.size() > 0)
			views.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
	}
	views.emplace_back(ranking.data(), static_cast<std::size_t>(ranking.size()));
	return views;
}

std::vector<std::string> Parameters::tensor_names() const
{
	std::vector<std::string> names;
	for (std::size_t l = 0; l < layers.size(); ++l) {
		names.push_back(fmt::format("layer{}.weight", l));
		if (layers[l].bias.size() > 0)
			names.push_back(fmt::format("layer{}.bias", l));
	}
	names.emplace_back("ranking.weight");
	return names;
}

std::size_t Parameters::count() const
{
	std::size_t total = 0;
	for (const auto& view : tensors())
		total += view.size();
	return total;
}

bool Parameters::all_finite() const
{
	for (const auto& view : tensors()) {
		for (double v : view) {
			if (!std::isfinite(v))
				return false;
		}
	}
	return true;
}

bool Parameters::same_shape(const Parameters& other) const
{
	if (layers.size() != other.layers.size() || ranking.size() != other.ranking.size())
		return false;
	for (std::size_t l = 0; l < layers.size(); ++l) {
		if (layers[l].weight.rows() != other.layers[l].weight.rows() ||
		    layers[l].weight.cols() != other.layers[l].weight.cols() ||
		    layers[l].bias.size() != other.layers[l].bias.size())
			return false;
	}
	return true;
}

DeepRankModel::DeepRankModel(NetArchitecture arch, Parameters params)
	: arch_(std::move(arch))
	, params_(std::move(params))
{
	arch_.validate();
	const std::size_t expected_layers = arch_.hidden_dims.size() + 1;
	if (params_.layers.size() != expected_layers)
		throw DimensionError(fmt::format("model has {} layers, architecture needs {}", params_.layers.size(),
		                                 expected_layers));
	std::size_t fan_in = arch_.input_dim;
	for (std::size_t l = 0; l < expected_layers; ++l) {
		const std::size_t fan_out = l < arch_.hidden_dims.size() ? arch_.hidden_dims[l] : arch_.embedding_dim;
		const auto& layer = params_.layers[l];
		const std::size_t bias_size = l < arch_.hidden_dims.size() ? fan_out : 0;
		if (static_cast<std::size_t>(layer.weight.rows()) != fan_out ||
		    static_cast<std::size_t>(layer.weight.cols()) != fan_in ||
		    static_cast<std::size_t>(layer.bias.size()) != bias_size)
			throw DimensionError(fmt::format("layer {} has shape {}x{} (bias {}), architecture needs {}x{} (bias {})",
			                                 l, layer.weight.rows(), layer.weight.cols(), layer.bias.size(), fan_out,
			                                 fan_in, bias_size));
		fan_in = fan_out;
	}
	if (static_cast<std::size_t>(params_.ranking.size()) != arch_.embedding_dim)
		throw DimensionError(fmt::format("ranking weights have length {}, embedding dimension is {}",
		                                 params_.ranking.size(), arch_.embedding_dim));
	if (!params_.all_finite())
		throw NumericalError("model parameters must be finite");
}

DeepRankModel init(const NetArchitecture& arch, std::uint64_t seed)
{
	arch.validate();
	Rng rng(seed, 0x696e6974 /* "init" */);
	Parameters params;
	std::size_t fan_in = arch.input_dim;
	const std::size_t n_layers = arch.hidden_dims.size() + 1;
	for (std::size_t l = 0; l < n_layers; ++l) {
		const std::size_t fan_out = l < arch.hidden_dims.size() ? arch.hidden_dims[l] : arch.embedding_dim;
		const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
		// The embedding layer has no bias: it would cancel in every score difference.
		const std::size_t bias_size = l + 1 < n_layers ? fan_out : 0;
		DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(bias_size)};
		// Row-major draw order so the stream does not depend on Eigen's storage.
		for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
			for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
				layer.weight(r, c) = rng.uniform(-limit, limit);
		}
		params.layers.push_back(std::move(layer));
		fan_in = fan_out;
	}
	params.ranking.resize(static_cast<Eigen::Index>(arch.embedding_dim));
	for (Eigen::Index k = 0; k < params.ranking.size(); ++k)
		params.ranking[k] = rng.normal(0.0, ranking_init_stddev);
	return DeepRankModel(arch, std::move(params));
}

DeepRankModel linear_model(const Eigen::VectorXd& weights)
{
	const auto d = static_cast<std::size_t>(weights.size());
	NetArchitecture arch{d, {}, d, Activation::ReLU};
	Parameters params;
	params.layers.push_back({Eigen::MatrixXd::Identity(weights.size(), weights.size()), Eigen::VectorXd()});
	params.ranking = weights;
	return DeepRankModel(std::move(arch), std::move(params));
}

Eigen::VectorXd embed(const DeepRankModel& model, const Eigen::VectorXd& x)
{
	check_input(model, x);
	BranchCache cache;
	forward_branch(model, x, cache);
	return cache.embedding;
}

double score(const DeepRankModel& model, const Eigen::VectorXd& x)
{
	return model.params().ranking.dot(embed(model, x));
}

ForwardCache pair_forward(const DeepRankModel& model, const Eigen::VectorXd& x_first,
                          const Eigen::VectorXd& x_second)
{
	check_input(model, x_first);
	check_input(model, x_second);
	ForwardCache cache;
	forward_branch(model, x_first, cache.first);
	forward_branch(model, x_second, cache.second);
	const Eigen::VectorXd diff = cache.first.embedding - cache.second.embedding;
	cache.diff_score = model.params().ranking.dot(diff);
	cache.model = &model;
	cache.version = model.version();
	return cache;
}

void accumulate_pair_backward(const DeepRankModel& model, const ForwardCache& cache, double upstream,
                              ParameterGradients& grads)
{
	if (cache.model != &model || cache.version != model.version())
		throw ValidationError("forward cache does not belong to the current model state");
	if (!grads.same_shape(model.params()))
		throw DimensionError("gradient buffer does not match model parameters");
	if (upstream == 0.0)
		return;

	const Eigen::VectorXd& w = model.params().ranking;
	grads.ranking += upstream * (cache.first.embedding - cache.second.embedding);
	const Eigen::VectorXd g_first = upstream * w;
	const Eigen::VectorXd g_second = -g_first;
	backward_branch(model, cache.first, g_first, &grads);
	backward_branch(model, cache.second, g_second, &grads);
}

ParameterGradients pair_backward(const DeepRankModel& model, const ForwardCache& cache, double upstream)
{
	ParameterGradients grads = Parameters::zeros_like(model.params());
	accumulate_pair_backward(model, cache, upstream, grads);
	return grads;
}

Eigen::VectorXd input_gradient(const DeepRankModel& model, const Eigen::VectorXd& x)
{
	check_input(model, x);
	BranchCache cache;
	forward_branch(model, x, cache);
	return backward_branch(model, cache, model.params().ranking, nullptr);
}

double relu_margin(const DeepRankModel& model, const Eigen::VectorXd& x)
{
	check_input(model, x);
	double margin = std::numeric_limits<double>::infinity();
	if (model.arch().activation != Activation::ReLU)
		return margin;
	BranchCache cache;
	forward_branch(model, x, cache);
	for (const auto& pre : cache.pre) {
		if (pre.size() > 0)
			margin = std::min(margin, pre.cwiseAbs().minCoeff());
	}
	return margin;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_smooth_pair(const DeepRankModel& model, Rng& rng, double margin)
{
	const auto d = static_cast<Eigen::Index>(model.arch().input_dim);
	auto draw = [&] {
		for (int attempt = 0; attempt < 100000; ++attempt) {
			Eigen::VectorXd x(d);
			for (Eigen::Index k = 0; k < d; ++k)
				x[k] = rng.normal();
			if (relu_margin(model, x) >= margin)
				return x;
		}
		throw NumericalError("could not draw an input away from every ReLU kink");
	};
	Eigen::VectorXd first = draw();
	Eigen::VectorXd second = draw();
	return {std::move(first), std::move(second)};
}

double grad_check(const DeepRankModel& model, const Eigen::VectorXd& x_first, const Eigen::VectorXd& x_second,
                  double step, const GradientHook& hook)
{
	if (!(step > 0.0))
		throw ValidationError("finite-difference step must be positive");
	ParameterGradients analytic = pair_backward(model, pair_forward(model, x_first, x_second), 1.0);
	if (hook)
		hook(analytic);

	// Probes run in a wider type than the model. A bias feeding a ReLU unit that
	// is active in both branches cancels exactly, so its true derivative is 0,
	// and a double probe would report one ulp of diff_score / (2 step) against it.
	if (model.arch().activation == Activation::ReLU)
		return max_probe_error<ReluProbeScalar>(model, analytic, x_first, x_second, step);
	return max_probe_error<long double>(model, analytic, x_first, x_second, step);
}

} // namespace deeprank::net
