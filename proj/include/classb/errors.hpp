#pragma once

#include <stdexcept>
#include <string>

namespace classb {

/// Invalid parameters, options or configuration input.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// NaN/Inf, cutoff exhaustion, or an ill-posed numerical request.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace classb
