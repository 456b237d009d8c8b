#include "ssmctb/adam.hpp"

#include <cmath>

#include "ssmctb/error.hpp"

namespace ssmctb {

void AdamConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ValidationError("learning rate must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("Adam moment coefficients must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("Adam epsilon must be positive");
}

Adam::Adam(AdamConfig config) : config_(config) { config_.validate(); }

void Adam::step(ParameterStore& params, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (const auto& [path, g] : grads) {
    Tensor& p = params.mutable_get(path);
    if (p.shape() != g.shape()) throw ValidationError("gradient shape mismatch for " + path);
    auto [it, fresh] = moments_.try_emplace(path);
    if (fresh) it->second = {Tensor::zeros(p.shape()), Tensor::zeros(p.shape())};
    auto m = it->second.m.mutable_data();
    auto v = it->second.v.mutable_data();
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace ssmctb
