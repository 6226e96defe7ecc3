#pragma once

#include <stdexcept>
#include <string>

namespace bvcl {

// Error categories mapped to CLI exit codes: config -> 1, data -> 2, numeric -> 3.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inputs that make a statistic undefined (constant samples, all-tied ranks).
struct DegenerateInputError : std::invalid_argument {
    explicit DegenerateInputError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace bvcl
