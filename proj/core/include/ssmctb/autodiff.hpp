#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssmctb/parameter_store.hpp"
#include "ssmctb/tensor.hpp"

namespace ssmctb::ad {

class Tape;

/// Handle to a node of one Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run computation record. Nodes are appended in evaluation order,
/// so inputs always precede the nodes that consume them. A tape is rebuilt
/// for every forward pass and is owned by a single thread.
class Tape {
 public:
  /// Propagates the gradient of one node into its inputs via accumulate().
  using Backward = std::function<void(const Tensor& grad, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Unnamed leaf that receives a gradient (inspect with grad()).
  Var variable(Tensor value);
  /// Named leaf bound to a store entry. Repeated calls with the same path
  /// return the same node, so fan-out is accumulated in one place.
  Var parameter(const ParameterStore& store, const std::string& path);
  Var parameter(const std::string& path, Tensor value);

  Var record(Tensor value, std::span<const Var> inputs, Backward backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into the gradient buffer of node `id`; no-op for nodes that do
  /// not lead to any leaf requiring a gradient.
  void accumulate(std::size_t id, const Tensor& g);
  /// Zero-initialized gradient buffer for in-place accumulation.
  Tensor& grad_buffer(std::size_t id);

  /// Reverse sweep from a single-element output. Returns the gradient of
  /// every named parameter recorded on this tape; parameters not on a path
  /// to `output` receive zeros.
  Gradients backward(Var output);

  /// Gradient of a leaf after backward(); zeros if it was never reached.
  Tensor grad(Var v) const;

 private:
  struct Node {
    Tensor value;
    Backward backward;
    bool needs_grad = false;
    std::optional<Tensor> grad;
  };

  Var push(Node node);
  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> named_;
};

Gradients backward(Tape& tape, Var output);

// Differentiable primitives. All operands must live on the same tape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var square(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var matmul(Var a, Var b);
/// matmul with the value computed by matmul_order_free; same gradients.
Var matmul_order_free(Var a, Var b);
Var transpose(Var a);
Var softmax_rows(Var a);
Var reshape(Var a, Shape shape);
Var sum(Var a);
Var mean(Var a);
/// mean((a - b)^2) over all elements.
Var mse(Var a, Var b);
/// Rank-2 c x n -> rank-1 c of row means.
Var mean_rows(Var a);
/// x (..., n) + b (n), broadcast over leading axes.
Var add_bias(Var x, Var b);
/// x (..., c) * g (c): per-channel scaling.
Var mul_channels(Var x, Var g);
/// x * W + b for rank-2 x.
Var affine(Var x, Var w, Var b);
/// Row-wise layer normalization of a rank-2 tensor with learnable scale/shift.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var pad_zero(Var a, const std::vector<std::pair<std::size_t, std::size_t>>& pads);
Var adaptive_avg_pool(Var a, const Shape& target_spatial);

}  // namespace ssmctb::ad
