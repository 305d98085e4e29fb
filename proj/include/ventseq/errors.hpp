#pragma once

#include <stdexcept>
#include <string>

namespace ventseq {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or axis mismatch between tensors.
struct DimensionError : Error {
  using Error::Error;
};

// API misuse (backward without cache, unknown column, ...).
struct UsageError : Error {
  using Error::Error;
};

// Malformed or inconsistent input data.
struct DataError : Error {
  using Error::Error;
};

// Corrupt or incompatible checkpoint / file format.
struct FormatError : Error {
  using Error::Error;
};

// Non-finite loss or gradient during training.
struct TrainingError : Error {
  using Error::Error;
};

} // namespace ventseq
