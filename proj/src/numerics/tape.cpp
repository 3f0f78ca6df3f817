#include "dvfy/numerics/tape.hpp"

#include "dvfy/error.hpp"

namespace dvfy::nn {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, nullptr});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(Parameter& param) {
  if (!grad_enabled_) return constant(param.value);
  Parameter* target = &param;
  nodes_.push_back(Node{param.value, Tensor(), true, [target](Tape&, const Tensor& g) {
                          auto dst = target->grad.data();
                          auto src = g.data();
                          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
                        }});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
  nodes_.push_back(Node{std::move(value), Tensor(), needs, needs ? std::move(fn) : nullptr});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.empty()) node.grad = Tensor::zeros_like(node.value);
  return node.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  if (!nodes_[v.id].requires_grad) return;
  Tensor& dst = grad_buffer(v);
  require(dst.size() == g.size(), ErrorKind::kShape, "gradient shape mismatch on backward");
  auto d = dst.data();
  auto s = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void Tape::backward(Var loss) {
  require(nodes_[loss.id].value.size() == 1, ErrorKind::kShape, "backward() needs a scalar loss");
  for (auto& node : nodes_) node.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    // No nodes are appended during backward, so the reference stays valid.
    node.backward(*this, node.grad);
  }
}

}  // namespace dvfy::nn
