#pragma once

#include <cstdint>
#include <vector>

#include "dvfy/numerics/tensor.hpp"

namespace dvfy::nn {

struct AdamConfig {
  Real learning_rate = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
  Real weight_decay = 5e-4;
  // false: weight decay enters the gradient as an L2 term.
  // true: decoupled decay applied directly to the parameter.
  bool decoupled_weight_decay = false;
};

/// Adam over a fixed parameter list. Moment buffers are indexed like the list.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  /// One bias-corrected update from the gradients currently held by the parameters.
  void step();
  void zero_grad();

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return steps_; }
  const std::vector<Parameter*>& params() const { return params_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_step_count(std::uint64_t steps) { steps_ = steps; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
};

}  // namespace dvfy::nn
