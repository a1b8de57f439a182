#pragma once

#include <stdexcept>
#include <string>

namespace nudge {

/// Base class for all project errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Matrix/tensor dimension mismatch.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid or inconsistent configuration values.
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed dataset, checkpoint, or report files.
struct ParseError : Error {
  using Error::Error;
};

/// Non-finite losses or gradients during optimization.
struct TrainingError : Error {
  using Error::Error;
};

/// Missing checkpoints or inconsistent report inputs.
struct ReportError : Error {
  using Error::Error;
};

/// API misuse: empty tape, non-one-hot command, degenerate inputs.
struct UsageError : Error {
  using Error::Error;
};

/// Masked pooling over an all-zero mask; callers route these as no-text.
struct PoolingError : Error {
  using Error::Error;
};

}  // namespace nudge
