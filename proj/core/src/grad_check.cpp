#include "ssmctb/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ssmctb/error.hpp"

namespace ssmctb {

GradCheckReport grad_check(const ScalarFunction& f, const ParameterStore& params, const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ValidationError("grad_check step must be positive");
  GradCheckReport report;

  Gradients analytic;
  {
    ad::Tape tape;
    ad::Var out = f(tape, params);
    if (!std::isfinite(out.value().item())) {
      report.finite = false;
      report.failure = "non-finite function value at the unperturbed point";
      return report;
    }
    analytic = tape.backward(out);
  }

  auto evaluate = [&](const ParameterStore& store) {
    ad::Tape tape;
    return f(tape, store).value().item();
  };

  ParameterStore probe = params;
  for (const auto& path : params.paths()) {
    const Tensor& base = params.get(path);
    auto it = analytic.find(path);
    const Tensor ad_grad = it != analytic.end() ? it->second : Tensor::zeros(base.shape());
    std::size_t stride = 1;
    if (options.max_probes_per_parameter > 0 && base.size() > options.max_probes_per_parameter) {
      stride = (base.size() + options.max_probes_per_parameter - 1) / options.max_probes_per_parameter;
    }
    Tensor& slot = probe.mutable_get(path);
    for (std::size_t i = 0; i < base.size(); i += stride) {
      const double original = base[i];
      slot[i] = original + options.step;
      const double up = evaluate(probe);
      slot[i] = original - options.step;
      const double down = evaluate(probe);
      slot[i] = original;
      ++report.probes;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.finite = false;
        report.failure = "non-finite probe at " + path + "[" + std::to_string(i) + "]";
        report.worst_path = path;
        report.worst_index = i;
        return report;
      }
      const double fd = (up - down) / (2.0 * options.step);
      const double g = ad_grad[i];
      const double rel = std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)});
      if (report.worst_path.empty() || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_path = path;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace ssmctb
