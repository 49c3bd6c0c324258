#include "helpers.hpp"

#include <deeprank/net.hpp>

#include <doctest.h>

#include <cstring>

using namespace deeprank;
using namespace deeprank::net;
using test::vec;

namespace {

/// W1 = [[1, -1]], b1 = [0], ReLU, W2 = [[2]].
DeepRankModel hand_model(double w)
{
	NetArchitecture arch{2, {1}, 1, Activation::ReLU};
	Parameters p;
	p.layers.push_back({Eigen::MatrixXd{{1, -1}}, Eigen::VectorXd::Zero(1)});
	p.layers.push_back({Eigen::MatrixXd{{2}}, Eigen::VectorXd()});
	p.ranking = vec({w});
	return DeepRankModel(arch, p);
}

bool same_bytes(const Parameters& a, const Parameters& b)
{
	const auto ta = a.tensors();
	const auto tb = b.tensors();
	if (ta.size() != tb.size())
		return false;
	for (std::size_t k = 0; k < ta.size(); ++k) {
		if (ta[k].size() != tb[k].size() || std::memcmp(ta[k].data(), tb[k].data(), ta[k].size_bytes()) != 0)
			return false;
	}
	return true;
}

Eigen::VectorXd random_input(Rng& rng, std::size_t d)
{
	Eigen::VectorXd x(static_cast<Eigen::Index>(d));
	for (auto& v : x)
		v = rng.normal();
	return x;
}

} // namespace

TEST_CASE("activation names")
{
	CHECK(parse_activation("relu") == Activation::ReLU);
	CHECK(parse_activation("tanh") == Activation::Tanh);
	CHECK(to_string(Activation::Tanh) == "tanh");
	CHECK_THROWS_AS(parse_activation("sigmoid"), ValidationError);
}

TEST_CASE("init")
{
	const NetArchitecture arch{5, {7, 3}, 4, Activation::ReLU};
	const auto a = init(arch, 17);
	const auto b = init(arch, 17);
	CHECK(same_bytes(a.params(), b.params()));
	CHECK_FALSE(same_bytes(a.params(), init(arch, 18).params()));

	const auto& p = a.params();
	REQUIRE(p.layers.size() == 3);
	CHECK(p.layers[0].weight.rows() == 7);
	CHECK(p.layers[0].weight.cols() == 5);
	CHECK(p.layers[2].weight.rows() == 4);
	CHECK(p.ranking.size() == 4);
	for (const auto& layer : p.layers) {
		const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
		CHECK(layer.weight.cwiseAbs().maxCoeff() <= limit);
		CHECK(layer.bias.isZero(0.0));
	}
	CHECK(p.layers[0].bias.size() == 7);
	CHECK(p.layers[2].bias.size() == 0);
	CHECK(p.ranking.cwiseAbs().maxCoeff() < 0.06);
	CHECK(p.count() == 7 * 5 + 7 + 3 * 7 + 3 + 4 * 3 + 4);
	CHECK(p.tensor_names().front() == "layer0.weight");
	CHECK(p.tensor_names().back() == "ranking.weight");

	SUBCASE("no hidden layers")
	{
		const auto m = init(NetArchitecture{3, {}, 2, Activation::ReLU}, 1);
		REQUIRE(m.params().layers.size() == 1);
		CHECK(m.params().layers[0].weight.rows() == 2);
		CHECK(m.params().layers[0].weight.cols() == 3);
	}
	SUBCASE("invalid architecture")
	{
		CHECK_THROWS_AS(init(NetArchitecture{0, {}, 2, Activation::ReLU}, 1), ValidationError);
		CHECK_THROWS_AS(init(NetArchitecture{2, {0}, 2, Activation::ReLU}, 1), ValidationError);
	}
}

TEST_CASE("ranking weights follow N(0, 0.01^2)")
{
	const auto m = init(NetArchitecture{2, {}, 4000, Activation::ReLU}, 3);
	const auto& w = m.params().ranking;
	const double mean = w.mean();
	const double sd = std::sqrt((w.array() - mean).square().mean());
	CHECK(std::abs(mean) < 1e-3);
	CHECK(sd == doctest::Approx(ranking_init_stddev).epsilon(0.05));
}

TEST_CASE("model construction validates shapes")
{
	auto p = hand_model(1.0).params();
	p.ranking = vec({1, 2});
	CHECK_THROWS_AS(DeepRankModel(hand_model(1.0).arch(), p), DimensionError);
	p = hand_model(1.0).params();
	p.layers[1].bias = vec({0});
	CHECK_THROWS_AS(DeepRankModel(hand_model(1.0).arch(), p), DimensionError);
	p = hand_model(1.0).params();
	p.layers[0].weight(0, 0) = std::nan("");
	CHECK_THROWS_AS(DeepRankModel(hand_model(1.0).arch(), p), NumericalError);
}

TEST_CASE("embed and score examples")
{
	const auto identity = linear_model(vec({0.5, 0.5}));
	CHECK(embed(identity, vec({1, 2})) == vec({1, 2}));

	const auto m = hand_model(0.5);
	CHECK(embed(m, vec({3, 1}))[0] == 4.0);
	CHECK(score(m, vec({3, 1})) == 2.0);
	CHECK(embed(m, vec({0, 0})).isZero(0.0));
	CHECK(score(hand_model(0.0), vec({3, 1})) == 0.0);
	CHECK_THROWS_AS(score(m, vec({1, 2, 3})), DimensionError);
}

TEST_CASE("pair_forward")
{
	const auto m = init(NetArchitecture{4, {6, 5}, 3, Activation::Tanh}, 2);
	Rng rng(1);
	for (int trial = 0; trial < 50; ++trial) {
		const auto a = random_input(rng, 4);
		const auto b = random_input(rng, 4);
		const auto ab = pair_forward(m, a, b);
		const auto ba = pair_forward(m, b, a);
		CHECK(ab.diff_score == -ba.diff_score);
		CHECK(pair_forward(m, a, a).diff_score == 0.0);
		CHECK(ab.diff_score == doctest::Approx(score(m, a) - score(m, b)).epsilon(1e-12));
	}
	const auto h = hand_model(0.5);
	CHECK(pair_forward(h, vec({3, 1}), vec({0, 0})).diff_score == 2.0);
}

TEST_CASE("pair_backward degenerate cases")
{
	const auto m = init(NetArchitecture{3, {4}, 2, Activation::ReLU}, 4);
	const auto x = vec({0.3, -0.2, 0.9});
	const auto same = pair_forward(m, x, x);
	const auto g = pair_backward(m, same, 1.0);
	for (const auto& view : g.tensors()) {
		for (double v : view)
			CHECK(v == 0.0);
	}
	const auto other = pair_forward(m, x, vec({1, 1, 1}));
	const auto z = pair_backward(m, other, 0.0);
	for (const auto& view : z.tensors()) {
		for (double v : view)
			CHECK(v == 0.0);
	}
}

TEST_CASE("stale caches are rejected")
{
	auto m = init(NetArchitecture{2, {3}, 2, Activation::ReLU}, 1);
	const auto cache = pair_forward(m, vec({1, 0}), vec({0, 1}));
	m.mutable_params().ranking[0] += 1.0;
	CHECK_THROWS_AS(pair_backward(m, cache, 1.0), ValidationError);
	const auto other = init(NetArchitecture{2, {3}, 2, Activation::ReLU}, 1);
	CHECK_THROWS_AS(pair_backward(other, pair_forward(m, vec({1, 0}), vec({0, 1})), 1.0), ValidationError);
}

TEST_CASE("accumulate_pair_backward adds")
{
	const auto m = init(NetArchitecture{3, {4}, 2, Activation::Tanh}, 8);
	const auto cache = pair_forward(m, vec({1, 2, 3}), vec({0, -1, 0.5}));
	auto grads = pair_backward(m, cache, 0.5);
	accumulate_pair_backward(m, cache, 0.5, grads);
	const auto once = pair_backward(m, cache, 1.0);
	const auto a = grads.tensors();
	const auto b = once.tensors();
	for (std::size_t t = 0; t < a.size(); ++t) {
		for (std::size_t k = 0; k < a[t].size(); ++k)
			CHECK(a[t][k] == doctest::Approx(b[t][k]).epsilon(1e-14));
	}
	auto wrong = Parameters::zeros_like(init(NetArchitecture{3, {5}, 2, Activation::Tanh}, 8).params());
	CHECK_THROWS_AS(accumulate_pair_backward(m, cache, 1.0, wrong), DimensionError);
}

TEST_CASE("grad_check")
{
	for (std::uint64_t seed = 0; seed < 10; ++seed) {
		const NetArchitecture relu{6, {8, 5}, 4, Activation::ReLU};
		const NetArchitecture tanh{6, {8, 5}, 4, Activation::Tanh};
		const auto mr = init(relu, seed);
		const auto mt = init(tanh, seed);
		Rng rng(seed, 1);
		const auto [a, b] = sample_smooth_pair(mr, rng);
		CHECK(relu_margin(mr, a) >= 1e-3);
		CHECK(grad_check(mr, a, b) < 1e-4);
		const auto [c, d] = sample_smooth_pair(mt, rng);
		CHECK(grad_check(mt, c, d) < 1e-6);
	}
	const auto m = init(NetArchitecture{4, {6}, 3, Activation::Tanh}, 1);
	Rng rng(2);
	const auto [a, b] = sample_smooth_pair(m, rng);
	const double corrupted = grad_check(m, a, b, 1e-5, [](ParameterGradients& g) { g.layers[0].weight(0, 0) *= 2; });
	CHECK(corrupted > 1e-2);
	CHECK_THROWS_AS(grad_check(m, a, b, 0.0), ValidationError);
}

TEST_CASE("grad_check with a cancelling bias")
{
	// Both inputs keep the single hidden unit active, so its bias drops out of
	// h(a) - h(b) and the exact derivative is 0.
	NetArchitecture arch{2, {1}, 1, Activation::ReLU};
	Parameters p;
	p.layers.push_back({Eigen::MatrixXd{{0.3, -0.7}}, vec({0.1})});
	p.layers.push_back({Eigen::MatrixXd{{1.3}}, Eigen::VectorXd()});
	p.ranking = vec({0.011});
	const DeepRankModel m(arch, p);
	const auto a = vec({2.1, 0.3});
	const auto b = vec({1.7, -0.2});
	CHECK(pair_backward(m, pair_forward(m, a, b), 1.0).layers[0].bias[0] == 0.0);
	CHECK(grad_check(m, a, b) < 1e-10);
}

TEST_CASE("relu_margin")
{
	const auto h = hand_model(1.0);
	CHECK(relu_margin(h, vec({3, 1})) == 2.0);
	CHECK(relu_margin(h, vec({1, 1})) == 0.0);
	const auto t = init(NetArchitecture{2, {3}, 2, Activation::Tanh}, 1);
	CHECK(std::isinf(relu_margin(t, vec({0, 0}))));
}

TEST_CASE("input_gradient")
{
	const auto lin = linear_model(vec({1, -2, 0.5}));
	CHECK(input_gradient(lin, vec({4, 4, 4})) == vec({1, -2, 0.5}));

	const auto m = init(NetArchitecture{3, {5}, 2, Activation::Tanh}, 6);
	const auto x = vec({0.2, -0.4, 1.1});
	const auto g = input_gradient(m, x);
	for (Eigen::Index k = 0; k < 3; ++k) {
		Eigen::VectorXd plus = x, minus = x;
		plus[k] += 1e-6;
		minus[k] -= 1e-6;
		CHECK(g[k] == doctest::Approx((score(m, plus) - score(m, minus)) / 2e-6).epsilon(1e-6));
	}
}
