#ifndef SERVOTUNE_ERRORS_HPP
#define SERVOTUNE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace servotune {

/// Invalid physical parameters or a degenerate model construction.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input to a numerical routine (dimension mismatch, empty window).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Gram matrix could not be factorized even after jitter escalation.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tuning procedure could not produce a result (no oscillation found, ...).
class TuningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration file, unknown preset, unparsable value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace servotune

#endif  // SERVOTUNE_ERRORS_HPP
