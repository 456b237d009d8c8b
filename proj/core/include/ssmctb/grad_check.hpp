#pragma once

#include <functional>
#include <string>

#include "ssmctb/autodiff.hpp"
#include "ssmctb/parameter_store.hpp"

namespace ssmctb {

/// Builds a scalar on a fresh tape, binding parameters with
/// `tape.parameter(store, path)`.
using ScalarFunction = std::function<ad::Var(ad::Tape&, const ParameterStore&)>;

struct GradCheckReport {
  /// max over probed elements of |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
  double max_relative_error = 0.0;
  std::string worst_path;
  std::size_t worst_index = 0;
  std::size_t probes = 0;
  bool finite = true;
  /// Set when a probe evaluated to a non-finite value.
  std::string failure;

  bool passed(double tolerance) const { return finite && max_relative_error < tolerance; }
};

struct GradCheckOptions {
  double step = 1e-5;
  /// 0 probes every element; otherwise a strided subset of at most this
  /// many elements per parameter.
  std::size_t max_probes_per_parameter = 0;
};

/// Compares reverse-mode gradients with central differences
/// (f(theta + h) - f(theta - h)) / 2h for every parameter element.
GradCheckReport grad_check(const ScalarFunction& f, const ParameterStore& params, const GradCheckOptions& options = {});

}  // namespace ssmctb
