#include "dvfy/numerics/adam.hpp"

#include <cmath>

#include "dvfy/error.hpp"

namespace dvfy::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  require(cfg_.learning_rate > 0.0, ErrorKind::kConfig, "Adam learning rate must be positive");
  require(cfg_.weight_decay >= 0.0, ErrorKind::kConfig, "Adam weight decay must be non-negative");
  for (const Parameter* p : params_) {
    m_.push_back(Tensor::zeros_like(p->value));
    v_.push_back(Tensor::zeros_like(p->value));
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  ++steps_;
  const Real t = static_cast<Real>(steps_);
  const Real c1 = 1.0 - std::pow(cfg_.beta1, t);
  const Real c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    require(p.grad.shape() == p.value.shape() && m_[k].shape() == p.value.shape(), ErrorKind::kShape,
            "Adam: shape mismatch for " + p.name);
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      Real gi = g[i];
      if (!cfg_.decoupled_weight_decay) gi += cfg_.weight_decay * w[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const Real mhat = m[i] / c1;
      const Real vhat = v[i] / c2;
      if (cfg_.decoupled_weight_decay) w[i] -= cfg_.learning_rate * cfg_.weight_decay * w[i];
      w[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace dvfy::nn
