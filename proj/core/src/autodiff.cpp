#include "ssmctb/autodiff.hpp"

#include <cmath>

#include "ssmctb/error.hpp"

namespace ssmctb::ad {

const Tensor& Var::value() const {
  if (!tape_) throw ValidationError("use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owner(Var v) const {
  if (v.tape() != this) throw ValidationError("Var belongs to a different tape");
}

Var Tape::constant(Tensor value) { return push({std::move(value), {}, false, std::nullopt}); }

Var Tape::variable(Tensor value) { return push({std::move(value), {}, true, std::nullopt}); }

Var Tape::parameter(const ParameterStore& store, const std::string& path) {
  if (auto it = named_.find(path); it != named_.end()) return Var(this, it->second);
  return parameter(path, store.get(path));
}

Var Tape::parameter(const std::string& path, Tensor value) {
  if (named_.contains(path)) throw ValidationError("parameter " + path + " already recorded");
  Var v = variable(std::move(value));
  named_.emplace(path, v.id());
  return v;
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const auto& in : inputs) {
    check_owner(in);
    needs = needs || nodes_[in.id()].needs_grad;
  }
  if (!needs) backward = nullptr;
  return push({std::move(value), std::move(backward), needs, std::nullopt});
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Tensor& Tape::grad_buffer(std::size_t id) {
  auto& node = nodes_.at(id);
  if (!node.grad) node.grad = Tensor::zeros(node.value.shape());
  return *node.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  auto& node = nodes_.at(id);
  if (!node.needs_grad) return;
  if (g.shape() != node.value.shape()) {
    throw ValidationError("gradient shape " + shape_string(g.shape()) + " does not match node shape " +
                          shape_string(node.value.shape()));
  }
  if (!node.grad) {
    node.grad = g;
    return;
  }
  auto dst = node.grad->mutable_data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Gradients Tape::backward(Var output) {
  check_owner(output);
  if (output.value().size() != 1) {
    throw ValidationError("backward requires a single-element output, got " + shape_string(output.shape()));
  }
  for (auto& node : nodes_) node.grad.reset();
  nodes_[output.id()].grad = Tensor::full(output.shape(), 1.0);
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.grad || !node.backward || !node.needs_grad) continue;
    node.backward(*node.grad, *this);
  }
  Gradients out;
  for (const auto& [path, id] : named_) out.emplace(path, grad(Var(this, id)));
  return out;
}

Tensor Tape::grad(Var v) const {
  check_owner(v);
  const auto& node = nodes_.at(v.id());
  return node.grad ? *node.grad : Tensor::zeros(node.value.shape());
}

Gradients backward(Tape& tape, Var output) { return tape.backward(output); }

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) throw ValidationError("operands live on different tapes");
  return *a.tape();
}

}  // namespace

Var add(Var a, Var b) {
  auto& tape = same_tape(a, b);
  return tape.record(ssmctb::add(a.value(), b.value()), {a, b}, [a, b](const Tensor& g, Tape& t) {
    t.accumulate(a.id(), g);
    t.accumulate(b.id(), g);
  });
}

Var sub(Var a, Var b) {
  auto& tape = same_tape(a, b);
  return tape.record(ssmctb::sub(a.value(), b.value()), {a, b}, [a, b](const Tensor& g, Tape& t) {
    t.accumulate(a.id(), g);
    if (t.needs_grad(b.id())) t.accumulate(b.id(), ssmctb::scale(g, -1.0));
  });
}

Var mul(Var a, Var b) {
  auto& tape = same_tape(a, b);
  return tape.record(ssmctb::mul(a.value(), b.value()), {a, b}, [a, b](const Tensor& g, Tape& t) {
    if (t.needs_grad(a.id())) t.accumulate(a.id(), ssmctb::mul(g, b.value()));
    if (t.needs_grad(b.id())) t.accumulate(b.id(), ssmctb::mul(g, a.value()));
  });
}

Var scale(Var a, double factor) {
  return a.tape()->record(ssmctb::scale(a.value(), factor), {a}, [a, factor](const Tensor& g, Tape& t) {
    t.accumulate(a.id(), ssmctb::scale(g, factor));
  });
}

Var square(Var a) {
  return a.tape()->record(ssmctb::mul(a.value(), a.value()), {a}, [a](const Tensor& g, Tape& t) {
    Tensor d = ssmctb::mul(g, a.value());
    t.accumulate(a.id(), ssmctb::scale(d, 2.0));
  });
}

Var relu(Var a) {
  return a.tape()->record(ssmctb::relu(a.value()), {a}, [a](const Tensor& g, Tape& t) {
    Tensor d = g;
    auto x = a.value().data();
    auto dd = d.mutable_data();
    for (std::size_t i = 0; i < dd.size(); ++i) {
      if (!(x[i] > 0.0)) dd[i] = 0.0;
    }
    t.accumulate(a.id(), d);
  });
}

Var sigmoid(Var a) {
  Tensor s = ssmctb::sigmoid(a.value());
  return a.tape()->record(s, {a}, [a, s](const Tensor& g, Tape& t) {
    Tensor d = g;
    auto dd = d.mutable_data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= s[i] * (1.0 - s[i]);
    t.accumulate(a.id(), d);
  });
}

Var matmul(Var a, Var b) {
  auto& tape = same_tape(a, b);
  return tape.record(ssmctb::matmul(a.value(), b.value()), {a, b}, [a, b](const Tensor& g, Tape& t) {
    if (t.needs_grad(a.id())) t.accumulate(a.id(), ssmctb::matmul(g, ssmctb::transpose(b.value())));
    if (t.needs_grad(b.id())) t.accumulate(b.id(), ssmctb::matmul(ssmctb::transpose(a.value()), g));
  });
}

Var matmul_order_free(Var a, Var b) {
  auto& tape = same_tape(a, b);
  return tape.record(ssmctb::matmul_order_free(a.value(), b.value()), {a, b}, [a, b](const Tensor& g, Tape& t) {
    if (t.needs_grad(a.id())) t.accumulate(a.id(), ssmctb::matmul(g, ssmctb::transpose(b.value())));
    if (t.needs_grad(b.id())) t.accumulate(b.id(), ssmctb::matmul(ssmctb::transpose(a.value()), g));
  });
}

Var transpose(Var a) {
  return a.tape()->record(ssmctb::transpose(a.value()), {a},
                          [a](const Tensor& g, Tape& t) { t.accumulate(a.id(), ssmctb::transpose(g)); });
}

Var softmax_rows(Var a) {
  Tensor y = ssmctb::softmax_rows(a.value());
  return a.tape()->record(y, {a}, [a, y](const Tensor& g, Tape& t) {
    const auto m = y.extent(0), n = y.extent(1);
    Tensor d = Tensor::zeros(y.shape());
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = y[i * n + j] * (g[i * n + j] - dot);
    }
    t.accumulate(a.id(), d);
  });
}

Var reshape(Var a, Shape shape) {
  const Shape original = a.shape();
  return a.tape()->record(ssmctb::reshape(a.value(), std::move(shape)), {a},
                          [a, original](const Tensor& g, Tape& t) {
                            t.accumulate(a.id(), ssmctb::reshape(g, original));
                          });
}

Var sum(Var a) {
  return a.tape()->record(Tensor::scalar(ssmctb::sum(a.value())), {a}, [a](const Tensor& g, Tape& t) {
    t.accumulate(a.id(), Tensor::full(a.shape(), g.item()));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return a.tape()->record(Tensor::scalar(ssmctb::mean(a.value())), {a}, [a, n](const Tensor& g, Tape& t) {
    t.accumulate(a.id(), Tensor::full(a.shape(), g.item() / n));
  });
}

Var mse(Var a, Var b) {
  auto& tape = same_tape(a, b);
  Tensor diff = ssmctb::sub(a.value(), b.value());
  double acc = 0.0;
  for (double v : diff.data()) acc += v * v;
  const double n = static_cast<double>(diff.size());
  return tape.record(Tensor::scalar(acc / n), {a, b}, [a, b, diff, n](const Tensor& g, Tape& t) {
    Tensor d = ssmctb::scale(diff, 2.0 * g.item() / n);
    if (t.needs_grad(b.id())) t.accumulate(b.id(), ssmctb::scale(d, -1.0));
    t.accumulate(a.id(), d);
  });
}

Var mean_rows(Var a) {
  const auto& x = a.value();
  if (x.rank() != 2) throw ValidationError("mean_rows expects rank 2, got " + shape_string(x.shape()));
  const auto m = x.extent(0), n = x.extent(1);
  Tensor out = Tensor::zeros({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += x[i * n + j];
    out[i] = acc / static_cast<double>(n);
  }
  return a.tape()->record(std::move(out), {a}, [a, m, n](const Tensor& g, Tape& t) {
    Tensor d = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = g[i] / static_cast<double>(n);
    t.accumulate(a.id(), d);
  });
}

Var add_bias(Var x, Var b) {
  auto& tape = same_tape(x, b);
  const auto n = b.value().size();
  if (b.value().rank() != 1 || x.shape().empty() || x.shape().back() != n) {
    throw ValidationError("add_bias: bias " + shape_string(b.shape()) + " does not match last axis of " +
                          shape_string(x.shape()));
  }
  Tensor out = x.value();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += b.value()[i % n];
  return tape.record(std::move(out), {x, b}, [x, b, n](const Tensor& g, Tape& t) {
    t.accumulate(x.id(), g);
    if (t.needs_grad(b.id())) {
      Tensor db = Tensor::zeros({n});
      for (std::size_t i = 0; i < g.size(); ++i) db[i % n] += g[i];
      t.accumulate(b.id(), db);
    }
  });
}

Var mul_channels(Var x, Var gate) {
  auto& tape = same_tape(x, gate);
  const auto c = gate.value().size();
  if (gate.value().rank() != 1 || x.shape().empty() || x.shape().back() != c) {
    throw ValidationError("mul_channels: gate " + shape_string(gate.shape()) + " does not match channels of " +
                          shape_string(x.shape()));
  }
  Tensor out = x.value();
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= gate.value()[i % c];
  return tape.record(std::move(out), {x, gate}, [x, gate, c](const Tensor& g, Tape& t) {
    if (t.needs_grad(x.id())) {
      Tensor dx = g;
      auto d = dx.mutable_data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= gate.value()[i % c];
      t.accumulate(x.id(), dx);
    }
    if (t.needs_grad(gate.id())) {
      Tensor dg = Tensor::zeros({c});
      const auto& xv = x.value();
      for (std::size_t i = 0; i < g.size(); ++i) dg[i % c] += g[i] * xv[i];
      t.accumulate(gate.id(), dg);
    }
  });
}

Var affine(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  auto& tape = same_tape(x, gamma);
  same_tape(x, beta);
  const auto& xv = x.value();
  if (xv.rank() != 2) throw ValidationError("layer_norm expects rank 2, got " + shape_string(xv.shape()));
  const auto m = xv.extent(0), n = xv.extent(1);
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw ValidationError("layer_norm: scale/shift must have " + std::to_string(n) + " elements");
  }
  Tensor normed = Tensor::zeros({m, n});
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xv[i * n + j] - mu) * (xv[i * n + j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) normed[i * n + j] = (xv[i * n + j] - mu) * inv_std[i];
  }
  Tensor out = normed;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = gamma.value()[j] * normed[i * n + j] + beta.value()[j];

  return tape.record(std::move(out), {x, gamma, beta},
                     [x, gamma, beta, normed, inv_std, m, n](const Tensor& g, Tape& t) {
                       if (t.needs_grad(gamma.id()) || t.needs_grad(beta.id())) {
                         Tensor dgamma = Tensor::zeros({n});
                         Tensor dbeta = Tensor::zeros({n});
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) {
                             dgamma[j] += g[i * n + j] * normed[i * n + j];
                             dbeta[j] += g[i * n + j];
                           }
                         }
                         t.accumulate(gamma.id(), dgamma.reshaped(gamma.shape()));
                         t.accumulate(beta.id(), dbeta.reshaped(beta.shape()));
                       }
                       if (!t.needs_grad(x.id())) return;
                       Tensor dx = Tensor::zeros({m, n});
                       const double nn = static_cast<double>(n);
                       for (std::size_t i = 0; i < m; ++i) {
                         double s1 = 0.0, s2 = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           const double gh = g[i * n + j] * gamma.value()[j];
                           s1 += gh;
                           s2 += gh * normed[i * n + j];
                         }
                         for (std::size_t j = 0; j < n; ++j) {
                           const double gh = g[i * n + j] * gamma.value()[j];
                           dx[i * n + j] = inv_std[i] / nn * (nn * gh - s1 - normed[i * n + j] * s2);
                         }
                       }
                       t.accumulate(x.id(), dx);
                     });
}

Var pad_zero(Var a, const std::vector<std::pair<std::size_t, std::size_t>>& pads) {
  return a.tape()->record(ssmctb::pad_zero(a.value(), pads), {a},
                          [a, pads](const Tensor& g, Tape& t) { t.accumulate(a.id(), ssmctb::crop(g, pads)); });
}

Var adaptive_avg_pool(Var a, const Shape& target_spatial) {
  return a.tape()->record(ssmctb::adaptive_avg_pool(a.value(), target_spatial), {a},
                          [a](const Tensor& g, Tape& t) {
                            t.accumulate(a.id(), ssmctb::adaptive_avg_pool_backward(g, a.shape()));
                          });
}

}  // namespace ssmctb::ad
