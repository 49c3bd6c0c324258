#pragma once

#include <deeprank/core.hpp>
#include <deeprank/error.hpp>

#include <Eigen/Dense>

#include <initializer_list>
#include <string>
#include <vector>

namespace test {

inline Eigen::VectorXd vec(std::initializer_list<double> values)
{
	Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
	Eigen::Index k = 0;
	for (double x : values)
		v[k++] = x;
	return v;
}

inline deeprank::PairConstraint ordered(std::string a, std::string b, deeprank::Split split = deeprank::Split::Train)
{
	return {std::move(a), std::move(b), deeprank::Relation::Ordered, split};
}

inline deeprank::PairConstraint similar(std::string a, std::string b, deeprank::Split split = deeprank::Split::Train)
{
	return {std::move(a), std::move(b), deeprank::Relation::Similar, split};
}

/// Collects warnings for the lifetime of the guard.
class WarningCapture {
public:
	WarningCapture()
		: previous_(deeprank::set_warning_handler([this](std::string_view m) { messages.emplace_back(m); }))
	{
	}
	~WarningCapture() { deeprank::set_warning_handler(previous_); }
	WarningCapture(const WarningCapture&) = delete;
	WarningCapture& operator=(const WarningCapture&) = delete;

	std::vector<std::string> messages;

private:
	deeprank::WarningHandler previous_;
};

} // namespace test
