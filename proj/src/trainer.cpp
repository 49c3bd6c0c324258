#include <deeprank/trainer.hpp>

#include <fmt/format.h>

#include <cmath>
#include <numeric>

namespace deeprank::train {

namespace {

constexpr std::uint64_t shuffle_stream = 0x73687566; // "shuf"
constexpr std::uint64_t jitter_stream = 0x6a697474;  // "jitt"
constexpr std::uint64_t sample_stream = 0x73616d70;  // "samp"

void check_examples(std::span<const PairExample> examples, std::size_t input_dim)
{
	for (const auto& example : examples) {
		if (static_cast<std::size_t>(example.first.size()) != input_dim ||
		    static_cast<std::size_t>(example.second.size()) != input_dim)
			throw DimensionError(fmt::format("pair features have {} and {} values, model expects {}",
			                                 example.first.size(), example.second.size(), input_dim));
	}
}

void jitter(std::vector<PairExample>& batch, double sigma, Rng& rng)
{
	for (auto& example : batch) {
		for (auto* x : {&example.first, &example.second}) {
			for (Eigen::Index k = 0; k < x->size(); ++k)
				(*x)[k] += rng.normal(0.0, sigma);
		}
	}
}

void take_step(net::DeepRankModel& model, const BatchLoss& result, OptimizerState& state, const TrainConfig& cfg,
               std::size_t epoch, std::size_t batch)
{
	if (!std::isfinite(result.loss))
		throw NumericalError(fmt::format("non-finite loss at epoch {} batch {}", epoch, batch));
	rmsprop_step(model.mutable_params(), result.gradients, state, cfg);
	if (!model.params().all_finite())
		throw NumericalError(fmt::format("non-finite parameters after epoch {} batch {}", epoch, batch));
}

} // namespace

void TrainConfig::validate() const
{
	loss.validate();
	if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
		throw ValidationError("learning rate must be positive");
	if (batch_size == 0)
		throw ValidationError("batch size must be positive");
	if (!(rho > 0.0 && rho < 1.0))
		throw ValidationError("RMSProp decay must lie in (0, 1)");
	if (!(epsilon >= 0.0))
		throw ValidationError("RMSProp epsilon must be non-negative");
	if (!(weight_decay_hidden >= 0.0))
		throw ValidationError("hidden weight decay must be non-negative");
	if (!(feature_jitter >= 0.0))
		throw ValidationError("feature jitter must be non-negative");
}

OptimizerState OptimizerState::zeros_like(const net::Parameters& params)
{
	return {net::Parameters::zeros_like(params)};
}

std::vector<PairExample> make_examples(std::span<const PairConstraint> pairs, const Dataset& dataset)
{
	std::vector<PairExample> examples;
	examples.reserve(pairs.size());
	for (const auto& pair : pairs)
		examples.push_back({pair.relation, dataset.item(pair.first).values, dataset.item(pair.second).values});
	return examples;
}

BatchLoss batch_loss(const net::DeepRankModel& model, std::span<const PairExample> batch, const LossConfig& cfg,
                     double weight_decay_hidden)
{
	if (batch.empty())
		throw ValidationError("batch must contain at least one pair");
	cfg.validate();
	check_examples(batch, model.arch().input_dim);

	BatchLoss result{0.0, net::Parameters::zeros_like(model.params())};
	double hinge = 0.0;
	double similar = 0.0;
	for (const auto& example : batch) {
		const auto cache = net::pair_forward(model, example.first, example.second);
		const double s = cache.diff_score;
		double upstream = 0.0;
		if (example.relation == Relation::Ordered) {
			const double slack = 1.0 - s;
			if (slack > 0.0) {
				hinge += slack * slack;
				upstream = -2.0 * cfg.c1 * slack;
			}
		} else {
			similar += s * s;
			upstream = 2.0 * cfg.c2 * s;
		}
		net::accumulate_pair_backward(model, cache, upstream, result.gradients);
	}

	const auto& w = model.params().ranking;
	result.loss = 0.5 * w.squaredNorm() + cfg.c1 * hinge + cfg.c2 * similar;
	result.gradients.ranking += w;

	if (weight_decay_hidden > 0.0) {
		const auto& layers = model.params().layers;
		for (std::size_t l = 0; l < layers.size(); ++l) {
			result.loss += 0.5 * weight_decay_hidden * layers[l].weight.squaredNorm();
			result.gradients.layers[l].weight += weight_decay_hidden * layers[l].weight;
		}
	}
	return result;
}

void rmsprop_step(net::Parameters& params, const net::ParameterGradients& grads, OptimizerState& state,
                  const TrainConfig& cfg)
{
	if (!params.same_shape(grads) || !params.same_shape(state.accumulator))
		throw DimensionError("parameter, gradient and optimizer state shapes differ");
	auto theta = params.tensors();
	const auto g = grads.tensors();
	auto acc = state.accumulator.tensors();
	for (std::size_t t = 0; t < theta.size(); ++t) {
		for (std::size_t k = 0; k < theta[t].size(); ++k) {
			const double gk = g[t][k];
			acc[t][k] = cfg.rho * acc[t][k] + (1.0 - cfg.rho) * gk * gk;
			if (gk != 0.0)
				theta[t][k] -= cfg.learning_rate * gk / (std::sqrt(acc[t][k]) + cfg.epsilon);
		}
	}
}

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t n)
{
	std::vector<std::size_t> order(n);
	std::iota(order.begin(), order.end(), std::size_t{0});
	Rng rng(Rng::mix(seed ^ shuffle_stream), epoch);
	rng.shuffle(order);
	return order;
}

std::string format_epoch_log(std::size_t epoch, double loss, std::size_t pairs)
{
	return fmt::format("epoch {} loss {:.17g} pairs {}", epoch, loss, pairs);
}

TrainResult train_examples(std::span<const PairExample> examples, const net::NetArchitecture& arch,
                           const TrainConfig& cfg, const EpochCallback& on_epoch)
{
	cfg.validate();
	if (examples.empty())
		throw ValidationError("training needs at least one pair");
	check_examples(examples, arch.input_dim);

	TrainResult result{net::init(arch, cfg.seed), {}};
	auto state = OptimizerState::zeros_like(result.model.params());
	Rng jitter_rng(cfg.seed, jitter_stream);

	std::vector<std::size_t> order(examples.size());
	std::iota(order.begin(), order.end(), std::size_t{0});
	std::vector<PairExample> batch;
	batch.reserve(cfg.batch_size);

	for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
		if (cfg.shuffle_each_epoch)
			order = epoch_permutation(cfg.seed, epoch, examples.size());
		double total = 0.0;
		std::size_t n_batches = 0;
		for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
			const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
			batch.clear();
			for (std::size_t k = start; k < stop; ++k)
				batch.push_back(examples[order[k]]);
			if (cfg.feature_jitter > 0.0)
				jitter(batch, cfg.feature_jitter, jitter_rng);

			const auto loss = batch_loss(result.model, batch, cfg.loss, cfg.weight_decay_hidden);
			take_step(result.model, loss, state, cfg, epoch + 1, n_batches + 1);
			total += loss.loss;
			++n_batches;
		}
		const double mean = total / static_cast<double>(n_batches);
		result.history.push_back(mean);
		if (on_epoch)
			on_epoch(epoch + 1, mean, examples.size());
	}
	return result;
}

TrainResult train(const Dataset& dataset, const AttributeSpec& attribute, const net::NetArchitecture& arch,
                  const TrainConfig& cfg, const EpochCallback& on_epoch)
{
	if (arch.input_dim != dataset.dimension())
		throw DimensionError(fmt::format("architecture input dimension {} does not match dataset dimension {}",
		                                 arch.input_dim, dataset.dimension()));
	const auto pairs = dataset.pairs(attribute.index, Split::Train);
	if (pairs.empty())
		throw ValidationError(fmt::format("attribute '{}' has no training pairs", attribute.name));
	const auto examples = make_examples(pairs, dataset);
	return train_examples(examples, arch, cfg, on_epoch);
}

TrainResult train_sampled(const BatchSampler& sampler, const net::NetArchitecture& arch, const TrainConfig& cfg,
                          std::size_t iterations, const EpochCallback& on_iteration)
{
	cfg.validate();
	TrainResult result{net::init(arch, cfg.seed), {}};
	auto state = OptimizerState::zeros_like(result.model.params());
	Rng rng(cfg.seed, sample_stream);
	Rng jitter_rng(cfg.seed, jitter_stream);
	for (std::size_t iter = 0; iter < iterations; ++iter) {
		auto batch = sampler(rng, cfg.batch_size);
		if (batch.empty())
			throw ValidationError(fmt::format("pair sampler returned an empty batch at iteration {}", iter + 1));
		if (cfg.feature_jitter > 0.0)
			jitter(batch, cfg.feature_jitter, jitter_rng);
		const auto loss = batch_loss(result.model, batch, cfg.loss, cfg.weight_decay_hidden);
		take_step(result.model, loss, state, cfg, iter + 1, 1);
		result.history.push_back(loss.loss);
		if (on_iteration)
			on_iteration(iter + 1, loss.loss, batch.size());
	}
	return result;
}

RankingFit fit_ranking_layer(net::DeepRankModel& model, std::span<const PairExample> examples, const LossConfig& cfg,
                             const linear::SolveOptions& options)
{
	if (!(options.tol > 0.0))
		throw ValidationError("solver tolerance must be positive");
	RankingFit fit;
	auto evaluate = [&] { return batch_loss(model, examples, cfg); };

	// With the embedding frozen, the loss in w is the linear objective over
	// embedding differences. Used to judge steps below the resolution of the loss.
	linear::PairDeltas deltas;
	for (const auto& e : examples) {
		const Eigen::VectorXd diff = net::embed(model, e.first) - net::embed(model, e.second);
		(e.relation == Relation::Ordered ? deltas.ordered : deltas.similar).push_back(diff);
	}

	auto current = evaluate();
	fit.history.push_back(current.loss);
	if (options.on_iteration)
		options.on_iteration(0, current.loss);

	for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
		const Eigen::VectorXd grad = current.gradients.ranking;
		fit.gradient_norm = grad.lpNorm<Eigen::Infinity>();
		fit.iterations = iter;
		if (fit.gradient_norm <= options.tol)
			return fit;

		const Eigen::VectorXd start = model.params().ranking;
		bool accepted = false;
		double step = 1.0;
		for (int h = 0; h < 64; ++h, step *= 0.5) {
			model.mutable_params().ranking = start - step * grad;
			auto candidate = evaluate();
			if (candidate.loss < current.loss) {
				current = std::move(candidate);
				accepted = true;
				break;
			}
		}
		step = 1.0;
		for (int h = 0; !accepted && h < 64; ++h, step *= 0.5) {
			if (linear::exact_decrease(start, grad, step, deltas, cfg) > 0.0) {
				model.mutable_params().ranking = start - step * grad;
				auto candidate = evaluate();
				if (candidate.loss <= current.loss && model.params().ranking != start) {
					current = std::move(candidate);
					accepted = true;
				}
			}
		}
		if (!accepted) {
			model.mutable_params().ranking = start;
			fit.stalled = true;
			return fit;
		}
		fit.history.push_back(current.loss);
		if (options.on_iteration)
			options.on_iteration(iter + 1, current.loss);
	}
	fit.iterations = options.max_iters;
	fit.gradient_norm = current.gradients.ranking.lpNorm<Eigen::Infinity>();
	if (fit.gradient_norm > options.tol)
		throw NumericalError(fmt::format("ranking-layer fit did not converge within {} iterations", options.max_iters));
	return fit;
}

} // namespace deeprank::train
