#pragma once

#include <stdexcept>
#include <string>

namespace wlticket {

/// Malformed or inconsistent input data (dataset files, fixtures, CSV).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment or CLI configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition on a numeric routine was violated (domain, shape, empty input).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace wlticket
