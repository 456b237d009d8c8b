#pragma once

#include <map>
#include <string>

#include "ssmctb/parameter_store.hpp"

namespace ssmctb {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Bias-corrected Adam. Moment buffers are created lazily per parameter path.
class Adam {
 public:
  explicit Adam(AdamConfig config);

  /// Applies one update; parameters without a gradient entry are left alone.
  void step(ParameterStore& params, const Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  struct Moments {
    Tensor m, v;
  };

  AdamConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace ssmctb
