#include "helpers.hpp"

#include <deeprank/linear_ranksvm.hpp>
#include <deeprank/rng.hpp>

#include <doctest.h>

#include <cmath>

using namespace deeprank;
using namespace deeprank::linear;
using test::vec;

namespace {

PairDeltas random_deltas(Rng& rng, std::size_t dim, std::size_t n_ordered, std::size_t n_similar)
{
	PairDeltas deltas;
	auto draw = [&] {
		Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
		for (auto& x : v)
			x = rng.normal();
		return v;
	};
	for (std::size_t k = 0; k < n_ordered; ++k)
		deltas.ordered.push_back(draw());
	for (std::size_t k = 0; k < n_similar; ++k)
		deltas.similar.push_back(draw());
	return deltas;
}

} // namespace

TEST_CASE("objective examples")
{
	const LossConfig cfg;
	CHECK(objective(vec({0, 0}), {{vec({2, 0})}, {}}, cfg) == doctest::Approx(0.1));
	CHECK(objective(vec({1}), {{vec({1})}, {}}, cfg) == doctest::Approx(0.5));
	CHECK(objective(vec({0, 0, 0}), {}, cfg) == 0.0);
}

TEST_CASE("gradient examples")
{
	const LossConfig cfg;
	CHECK(objective_gradient(vec({0}), {{vec({2})}, {}}, cfg)[0] == doctest::Approx(-0.4));
	CHECK(objective_gradient(vec({1}), {{vec({2})}, {}}, cfg)[0] == doctest::Approx(1.0));
	CHECK(objective_gradient(vec({0}), {{}, {vec({1})}}, cfg)[0] == 0.0);
}

TEST_CASE("gradient matches central differences")
{
	Rng rng(11);
	const LossConfig cfg{0.3, 0.2};
	for (int trial = 0; trial < 20; ++trial) {
		const auto deltas = random_deltas(rng, 4, 6, 3);
		Eigen::VectorXd w(4);
		for (auto& x : w)
			x = rng.normal(0.0, 0.5);
		const auto g = objective_gradient(w, deltas, cfg);
		for (Eigen::Index k = 0; k < w.size(); ++k) {
			const double h = 1e-6;
			Eigen::VectorXd plus = w, minus = w;
			plus[k] += h;
			minus[k] -= h;
			const double fd = (objective(plus, deltas, cfg) - objective(minus, deltas, cfg)) / (2 * h);
			CHECK(g[k] == doctest::Approx(fd).epsilon(1e-6).scale(1e-3));
		}
	}
}

TEST_CASE("objective is convex along random chords")
{
	Rng rng(5);
	const LossConfig cfg;
	for (int trial = 0; trial < 200; ++trial) {
		const auto deltas = random_deltas(rng, 3, 4, 2);
		Eigen::VectorXd a(3), b(3);
		for (Eigen::Index k = 0; k < 3; ++k) {
			a[k] = rng.normal(0, 2);
			b[k] = rng.normal(0, 2);
		}
		const double t = rng.uniform();
		const double mid = objective(t * a + (1 - t) * b, deltas, cfg);
		const double chord = t * objective(a, deltas, cfg) + (1 - t) * objective(b, deltas, cfg);
		CHECK(mid <= chord + 1e-12 * (1 + std::abs(chord)));
	}
}

TEST_CASE("exact_decrease agrees with differenced objective")
{
	Rng rng(11);
	const auto deltas = random_deltas(rng, 4, 30, 10);
	const LossConfig cfg;
	for (int trial = 0; trial < 20; ++trial) {
		Eigen::VectorXd w(4), dir(4);
		for (Eigen::Index k = 0; k < 4; ++k) {
			w[k] = rng.normal();
			dir[k] = rng.normal();
		}
		for (double step : {1.0, 0.1, 1e-3}) {
			const double direct = objective(w, deltas, cfg) - objective(w - step * dir, deltas, cfg);
			CHECK(exact_decrease(w, dir, step, deltas, cfg) == doctest::Approx(direct).epsilon(1e-8).scale(1.0));
		}
	}
}

TEST_CASE("solve closed forms")
{
	const LossConfig cfg;
	SUBCASE("single ordered pair")
	{
		const auto m = solve({{vec({2, 0})}, {}}, 2, cfg);
		CHECK(m.weights[0] == doctest::Approx(2.0 / 9).epsilon(1e-7));
		CHECK(std::abs(m.weights[1]) < 1e-12);
		CHECK(m.training_objective == doctest::Approx(1.0 / 18).epsilon(1e-7));
		CHECK(m.gradient_norm <= 1e-8);
	}
	SUBCASE("single similar pair")
	{
		const auto m = solve({{}, {vec({1, 0})}}, 2, cfg);
		CHECK(m.weights.isZero(0.0));
		CHECK(m.iterations == 0);
	}
	SUBCASE("mixed one-dimensional")
	{
		const auto m = solve({{vec({1})}, {vec({1})}}, 1, cfg);
		CHECK(m.weights[0] == doctest::Approx(1.0 / 7).epsilon(1e-7));
	}
	SUBCASE("no pairs")
	{
		CHECK_THROWS_AS(solve(PairDeltas{}, 3, cfg), ValidationError);
	}
}

TEST_CASE("solve descends monotonically")
{
	Rng rng(3);
	const auto deltas = random_deltas(rng, 5, 40, 10);
	std::vector<double> trace;
	SolveOptions options;
	options.on_iteration = [&](std::size_t, double j) { trace.push_back(j); };
	const auto m = solve(deltas, 5, LossConfig{}, options);
	REQUIRE(trace.size() == m.iterations + 1);
	for (std::size_t k = 1; k < trace.size(); ++k)
		CHECK(trace[k] <= trace[k - 1] + 4 * std::numeric_limits<double>::epsilon() * trace[k - 1]);
	CHECK(trace.back() < trace.front());
}

TEST_CASE("solve raises with the best iterate when out of iterations")
{
	Rng rng(9);
	const auto deltas = random_deltas(rng, 3, 20, 5);
	SolveOptions options;
	options.max_iters = 2;
	try {
		(void)solve(deltas, 3, LossConfig{}, options);
		FAIL("expected ConvergenceError");
	} catch (const ConvergenceError& e) {
		CHECK(e.best().iterations == 2);
		CHECK(e.best().training_objective < objective(Eigen::VectorXd::Zero(3), deltas, LossConfig{}));
	}
}

TEST_CASE("solve rejects bad input")
{
	CHECK_THROWS_AS(solve({{vec({1, 2})}, {}}, 3, LossConfig{}), DimensionError);
	SolveOptions options;
	options.tol = 0;
	CHECK_THROWS(solve({{vec({1})}, {}}, 1, LossConfig{}, options));
	CHECK_THROWS_AS(solve({{vec({1})}, {}}, 1, LossConfig{-1, 0}), ValidationError);
}

TEST_CASE("brute force examples")
{
	const LossConfig cfg;
	const auto w = brute_force_solve({{vec({2, 0})}, {}}, 2, cfg, 1.0, 1e-3);
	CHECK(w[0] == doctest::Approx(0.222).epsilon(1e-9));
	CHECK(w[1] == doctest::Approx(0.0).scale(1));
	CHECK(brute_force_solve(PairDeltas{}, 2, cfg, 1.0, 1e-3).isZero(1e-12));
	CHECK(std::abs(brute_force_solve({{}, {vec({1})}}, 1, cfg, 1.0, 1e-3)[0]) < 1e-12);
	CHECK_THROWS(brute_force_solve(PairDeltas{}, 4, cfg, 1.0, 0.5));
}

TEST_CASE("solver agrees with the grid oracle")
{
	const LossConfig cfg;
	for (std::uint64_t seed = 0; seed < 5; ++seed) {
		Rng rng(seed, 99);
		const auto deltas = random_deltas(rng, 2, 1 + rng.index(4), rng.index(3));
		const auto fast = solve(deltas, 2, cfg);
		const auto grid = brute_force_solve(deltas, 2, cfg, 2.0, 1e-2);
		CHECK(objective(fast.weights, deltas, cfg) <= objective(grid, deltas, cfg) + 1e-12);
		CHECK(objective(grid, deltas, cfg) - fast.training_objective < 1e-3);
	}
}

TEST_CASE("dataset overloads")
{
	const Dataset ds(2, {{"a", vec({2, 1})}, {"b", vec({0, 1})}, {"c", vec({1, 1})}}, {{"s", 0}},
	                 {{0, {test::ordered("a", "b"), test::similar("c", "c")}}});
	const auto deltas = make_deltas(ds.pairs(0), ds);
	REQUIRE(deltas.ordered.size() == 1);
	CHECK(deltas.ordered[0] == vec({2, 0}));
	CHECK(deltas.similar[0] == vec({0, 0}));
	const auto m = solve(ds.pairs(0), ds, LossConfig{});
	CHECK(m.weights[0] == doctest::Approx(2.0 / 9).epsilon(1e-7));
	const auto grid = brute_force_solve(ds.pairs(0), ds, LossConfig{}, 1.0, 1e-3);
	CHECK(grid[0] == doctest::Approx(0.222).epsilon(1e-9));
}
