#pragma once

#include <stdexcept>
#include <string>

namespace ssmctb {

// Bad shapes, bad configuration values, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite losses, gradients or probe values.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ssmctb
