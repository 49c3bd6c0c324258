#pragma once

#include <deeprank/net.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace deeprank::io {

/// Text model format, version 1:
///
///     deeprank-model 1
///     input_dim 10
///     hidden_dims 64 64
///     embedding_dim 32
///     activation relu
///     tensor layer0.weight 64 10
///     <64*10 values, row-major, space separated>
///     ...
///     tensor ranking.weight 32
///     <32 values>
///     end
///
/// Values are written with 17 significant digits so every double round-trips exactly.
constexpr int model_format_version = 1;

void write_model(std::ostream& out, const net::DeepRankModel& model);
net::DeepRankModel read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const net::DeepRankModel& model);
net::DeepRankModel load_model(const std::filesystem::path& path);

std::string format_double(double value);

} // namespace deeprank::io
