#pragma once

#include <deeprank/data.hpp>
#include <deeprank/net.hpp>
#include <deeprank/trainer.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace deeprank::cli {

enum ExitCode : int {
	exit_ok = 0,
	exit_usage = 1,     ///< validation or usage error
	exit_numerical = 2, ///< non-finite loss, failed gradient check
};

/// Every tunable setting of the tool. Defaults match the library defaults.
struct CliConfig {
	data::SynthSpec synth;
	train::TrainConfig train;
	net::NetArchitecture arch;
	std::string solver = "deep"; ///< deep | linear
	double tol = 1e-8;           ///< linear solver gradient tolerance
	std::size_t max_iters = 100000;
};

/// One `key = value` setting, also reachable as `--key` on the command line
/// (underscores and dashes are interchangeable).
struct ConfigKey {
	std::string name;
	std::string help;
	std::function<void(CliConfig&, const std::string&)> set;
	std::function<std::string(const CliConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

/// Parses `key = value` lines with `#` comments. Unknown keys are an error.
std::map<std::string, std::string> read_config(std::istream& in);
std::map<std::string, std::string> load_config(const std::filesystem::path& path);

/// Applies settings in key order; throws ValidationError on an unknown key or a
/// malformed value.
void apply_config(CliConfig& cfg, const std::map<std::string, std::string>& settings);

std::string normalize_key(std::string key);

/// Runs the tool; data goes to `out`, diagnostics to `err`. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace deeprank::cli
