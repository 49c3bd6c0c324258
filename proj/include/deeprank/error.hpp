#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace deeprank {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Vector lengths or tensor shapes that do not agree.
class DimensionError : public Error {
public:
	using Error::Error;
};

/// Malformed input, unknown references or violated preconditions.
class ValidationError : public Error {
public:
	using Error::Error;
};

/// Non-finite values, failed gradient checks and similar numerical failures.
class NumericalError : public Error {
public:
	using Error::Error;
};

using WarningHandler = std::function<void(std::string_view)>;

/// Installs the sink for non-fatal diagnostics and returns the previous one.
/// The default handler writes to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

} // namespace deeprank
