#pragma once

#include <stdexcept>
#include <string>

namespace ttp {

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is well-formed but numerically degenerate (e.g. a zero-norm embedding).
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bad configuration detected before any work runs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset layout problem; the message carries the offending path.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class E = InvalidArgument>
inline void require(bool ok, const std::string& message) {
  if (!ok) throw E(message);
}

}  // namespace detail
}  // namespace ttp
