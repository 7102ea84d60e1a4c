#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qcard {

// Error taxonomy shared by the library and the CLI. The CLI maps each class
// to a distinct exit code: usage/config -> 1, data/parse -> 2, numeric -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration: bad qubit counts, parameter-length mismatches,
// unsupported layer widths.
struct ConfigError : Error {
    using Error::Error;
};

// API misuse: out-of-range qubit indices, mismatched report lengths.
struct UsageError : Error {
    using Error::Error;
};

// Bad input data: malformed workload files, type mismatches, queries the
// encoding cannot represent.
struct WorkloadError : Error {
    using Error::Error;
};

// SQL text outside the supported subset. Carries the byte offset of the
// offending token.
struct ParseError : WorkloadError {
    ParseError(const std::string& what, std::size_t position)
        : WorkloadError(what + " at offset " + std::to_string(position)),
          position(position) {}
    std::size_t position;
};

// Non-finite values during optimization.
struct NumericError : Error {
    using Error::Error;
};

} // namespace qcard
