#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpw {

/// Bad or inconsistent configuration (missing files, invalid plans, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input data that cannot support the requested estimate (e.g. constant
/// series handed to an autocovariance fit).
struct DegenerateInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parse failure; carries a one-based row and the offending column name.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t row, std::string column)
        : std::runtime_error(msg), row(row), column(std::move(column)) {}
    std::size_t row = 0;
    std::string column;
};

/// Training loop produced a non-finite loss.
struct TrainingDivergedError : std::runtime_error {
    TrainingDivergedError(const std::string& msg, std::size_t iteration)
        : std::runtime_error(msg), iteration(iteration) {}
    std::size_t iteration = 0;
};

} // namespace cpw
