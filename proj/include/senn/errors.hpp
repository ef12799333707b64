#pragma once

#include <stdexcept>

namespace senn {

// Base for all library errors. The CLI catches this and prints one
// diagnostic line before exiting nonzero.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParameterError : Error { using Error::Error; };    // bad argument or config value
struct FormatError : Error { using Error::Error; };       // malformed file content
struct InputError : Error { using Error::Error; };        // missing, truncated or empty input
struct ConsistencyError : Error { using Error::Error; };  // cross-structure mismatch
struct BudgetError : Error { using Error::Error; };       // connection budget exceeded
struct NumericError : Error { using Error::Error; };      // non-finite values during training

}  // namespace senn
