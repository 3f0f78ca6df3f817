#include "dvfy/numerics/layers.hpp"

#include <cmath>

#include "dvfy/error.hpp"

namespace dvfy::nn {

namespace {

Tensor uniform_tensor(Shape shape, Real bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(in));
  weight = Parameter(name + ".weight", uniform_tensor({out, in}, bound, rng));
  bias = Parameter(name + ".bias", uniform_tensor({out}, bound, rng));
}

Var Linear::forward(Tape& tape, Var x) {
  return linear(tape, x, tape.parameter(weight), tape.parameter(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng) {
  require(widths.size() >= 2, ErrorKind::kInput, "Mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers_.emplace_back(name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
}

Var Mlp::forward(Tape& tape, Var x) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(tape, x);
    if (i + 1 < layers_.size()) x = relu(tape, x);
  }
  return x;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers_) l.collect(out);
}

ConvBlock::ConvBlock(const std::string& name, const ConvBlockConfig& cfg, Rng& rng) : cfg_(cfg) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(cfg.in_channels * cfg.kernel_width));
  conv_weight = Parameter(name + ".conv.weight",
                          uniform_tensor({cfg.out_channels, cfg.in_channels, 1, cfg.kernel_width}, bound, rng));
  conv_bias = Parameter(name + ".conv.bias", uniform_tensor({cfg.out_channels}, bound, rng));
  bn_gamma = Parameter(name + ".bn.gamma", Tensor({cfg.out_channels}, 1.0));
  bn_beta = Parameter(name + ".bn.beta", Tensor({cfg.out_channels}, 0.0));
  running_mean = Tensor({cfg.out_channels}, 0.0);
  running_var = Tensor({cfg.out_channels}, 1.0);
}

std::size_t ConvBlock::output_length(std::size_t input_length) const {
  require(input_length >= cfg_.kernel_width, ErrorKind::kShape,
          "length " + std::to_string(input_length) + " shorter than kernel width " +
              std::to_string(cfg_.kernel_width));
  const std::size_t conv_len = input_length - cfg_.kernel_width + 1;
  require(conv_len >= cfg_.pool_kernel, ErrorKind::kShape,
          "convolution output length " + std::to_string(conv_len) + " shorter than pool kernel");
  return (conv_len - cfg_.pool_kernel) / cfg_.pool_stride + 1;
}

Var ConvBlock::forward(Tape& tape, Var x, Mode mode) {
  output_length(tape.value(x).dim(3));
  Var h = conv1xk(tape, x, tape.parameter(conv_weight), tape.parameter(conv_bias));
  h = max_pool_1xk(tape, h, cfg_.pool_kernel, cfg_.pool_stride);
  BatchNormOptions bn{mode == Mode::kTrain, cfg_.bn_momentum, cfg_.bn_eps};
  h = batch_norm(tape, h, tape.parameter(bn_gamma), tape.parameter(bn_beta), running_mean, running_var, bn);
  return relu(tape, h);
}

void ConvBlock::collect(std::vector<Parameter*>& out) {
  out.push_back(&conv_weight);
  out.push_back(&conv_bias);
  out.push_back(&bn_gamma);
  out.push_back(&bn_beta);
}

}  // namespace dvfy::nn
