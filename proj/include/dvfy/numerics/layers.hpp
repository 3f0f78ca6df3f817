#pragma once

#include <string>
#include <vector>

#include "dvfy/numerics/ops.hpp"
#include "dvfy/numerics/rng.hpp"

namespace dvfy::nn {

enum class Mode { kTrain, kEval };

/// Fully connected layer. Weights and biases start uniform in +-1/sqrt(fan_in).
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var forward(Tape& tape, Var x);
  void collect(std::vector<Parameter*>& out);
  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }

  Parameter weight;
  Parameter bias;
};

/// Linear layers with ReLU between them (none after the last).
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}.
  Mlp(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng);

  Var forward(Tape& tape, Var x);
  void collect(std::vector<Parameter*>& out);
  std::size_t out_features() const { return layers_.back().out_features(); }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

struct ConvBlockConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 16;
  std::size_t kernel_width = 9;
  std::size_t pool_kernel = 2;
  std::size_t pool_stride = 2;
  Real bn_eps = 1e-5;
  Real bn_momentum = 0.1;
};

/// conv(1 x k) -> max-pool(1 x 2, stride 2) -> batch-norm -> ReLU.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const std::string& name, const ConvBlockConfig& cfg, Rng& rng);

  Var forward(Tape& tape, Var x, Mode mode);
  void collect(std::vector<Parameter*>& out);
  /// Throws kShape when the input is shorter than the kernel or the pool window.
  std::size_t output_length(std::size_t input_length) const;
  const ConvBlockConfig& config() const { return cfg_; }

  Parameter conv_weight;
  Parameter conv_bias;
  Parameter bn_gamma;
  Parameter bn_beta;
  Tensor running_mean;
  Tensor running_var;

 private:
  ConvBlockConfig cfg_;
};

}  // namespace dvfy::nn
