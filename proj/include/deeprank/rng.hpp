#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace deeprank {

/// Seeded generator with platform-independent output.
///
/// std::mt19937_64 is fully specified by the standard, but the std::*_distribution
/// adaptors are not, so the conversions to uniform, Gaussian and index draws live
/// here. Streams are derived from (seed, stream id) so that each consumer (an
/// epoch shuffle, the initializer, feature jitter) is a pure function of its key.
class Rng {
public:
	explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
		: engine_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL)))
	{
	}

	std::uint64_t next_u64() { return engine_(); }

	/// Uniform on [0, 1) with 53 random bits.
	double uniform()
	{
		return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
	}

	double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

	/// Box-Muller; the second variate is cached.
	double normal()
	{
		if (has_spare_) {
			has_spare_ = false;
			return spare_;
		}
		double u1 = 0.0;
		do {
			u1 = uniform();
		} while (u1 <= 0.0);
		const double u2 = uniform();
		const double radius = std::sqrt(-2.0 * std::log(u1));
		const double angle = 2.0 * std::numbers::pi * u2;
		spare_ = radius * std::sin(angle);
		has_spare_ = true;
		return radius * std::cos(angle);
	}

	double normal(double mean, double stddev) { return mean + stddev * normal(); }

	/// Uniform integer in [0, n), unbiased by rejection. n must be > 0.
	std::size_t index(std::size_t n)
	{
		const std::uint64_t bound = static_cast<std::uint64_t>(n);
		const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
		std::uint64_t draw = 0;
		do {
			draw = engine_();
		} while (draw >= limit);
		return static_cast<std::size_t>(draw % bound);
	}

	/// Fisher-Yates.
	template<typename T>
	void shuffle(std::span<T> values)
	{
		for (std::size_t i = values.size(); i > 1; --i) {
			const std::size_t j = index(i);
			std::swap(values[i - 1], values[j]);
		}
	}

	template<typename T>
	void shuffle(std::vector<T>& values)
	{
		shuffle(std::span<T>(values));
	}

	/// splitmix64 finalizer.
	static constexpr std::uint64_t mix(std::uint64_t z)
	{
		z += 0x9e3779b97f4a7c15ULL;
		z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
		z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
		return z ^ (z >> 31);
	}

private:
	std::mt19937_64 engine_;
	double spare_ = 0.0;
	bool has_spare_ = false;
};

} // namespace deeprank
