#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

#include "dvfy/numerics/tensor.hpp"

namespace dvfy::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

class Tape;

// Receives the tape and the gradient flowing into the node's output; pushes
// gradients into the node's inputs through Tape::accumulate.
using BackwardFn = std::function<void(Tape&, const Tensor&)>;

/// Reverse-mode recording of one forward pass. Single-use and single-threaded;
/// build a fresh tape per forward pass.
class Tape {
 public:
  Tape() = default;
  /// A tape that records values only: parameters enter as constants and no
  /// backward functions are kept.
  static Tape inference() {
    Tape t;
    t.grad_enabled_ = false;
    return t;
  }

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var constant(Tensor value);
  /// Leaf whose gradient is added into `param.grad` during backward().
  Var parameter(Parameter& param);

  /// Records an op output. The node requires a gradient when any input does;
  /// otherwise `fn` is dropped.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient of the last backward() w.r.t. `v`; empty when it never received one.
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  void accumulate(Var v, const Tensor& g);
  /// Adds `g` into `v`'s gradient buffer, allocating it on first use.
  Tensor& grad_buffer(Var v);

  /// Seeds d(loss)/d(loss) = 1 for a single-element `loss` and runs every
  /// recorded backward function once, in reverse recording order.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace dvfy::nn
