#pragma once

#include <stdexcept>
#include <string>

namespace mritherm {

// Shape/extent violations: zero extents, mismatched dimensions, rank overflow.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed external data: PNM streams, weight containers, CSV files.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration values (thresholds, hyperparameters, splits).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing or mis-shaped named tensor in a weight store.
struct LookupError : std::runtime_error {
    explicit LookupError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (loss, gradients).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mritherm
