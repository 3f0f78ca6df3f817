#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dvfy/numerics/layers.hpp"

namespace dvfy::model {

using nn::Real;
using nn::Tensor;

struct ArchConfig {
  std::size_t channels = 1;
  std::size_t window = 200;
  int classes = 2;
  int latent_domains = 2;
  std::size_t kernel_width = 9;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t pool_kernel = 2;
  std::size_t pool_stride = 2;
  std::size_t bottleneck_dim = 256;
  std::size_t adversary_hidden = 256;
  std::size_t adversary_layers = 2;
  Real bn_eps = 1e-5;
  Real bn_momentum = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const ArchConfig&) const = default;
};

/// Two conv blocks followed by a flatten: h_f.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(const ArchConfig& arch, Rng& rng);

  nn::Var forward(nn::Tape& tape, nn::Var x, nn::Mode mode);
  void collect(std::vector<nn::Parameter*>& out);
  std::size_t output_dim() const { return output_dim_; }

  nn::ConvBlock block1;
  nn::ConvBlock block2;

 private:
  std::size_t output_dim_ = 0;
};

/// Per-step heads: bottleneck h_b, classifier h_c and, for steps 3 and 4, the
/// adversary h_adv that sits behind a gradient reversal.
struct HeadGroup {
  nn::Linear bottleneck;
  nn::Linear classifier;
  std::optional<nn::Mlp> adversary;

  void collect(std::vector<nn::Parameter*>& out);
};

struct Predictions {
  std::vector<int> labels;
  Tensor scores;  // softmax over classes, [N x C]
};

/// Shared backbone plus the three step head groups and the centroid table.
class ModelBundle {
 public:
  ModelBundle() = default;
  /// Deterministic given arch.seed. Throws kShape when the kernel does not fit
  /// the window.
  explicit ModelBundle(const ArchConfig& arch);

  const ArchConfig& arch() const { return arch_; }
  FeatureExtractor& backbone() { return backbone_; }
  HeadGroup& heads(int step);
  const HeadGroup& heads(int step) const;

  /// Steps 2..4 in order; also fixes which head group predict() uses.
  int inference_step() const { return inference_step_; }
  void set_inference_step(int step);

  /// h_f over a whole input tensor in eval mode, chunked; [N x flat_dim].
  Tensor backbone_features(const Tensor& inputs);
  /// h_b^(step) applied to precomputed backbone features (not recorded).
  Tensor bottleneck_features(int step, const Tensor& backbone_out);
  /// h_b^(step)(h_f(x)) for a [B x C x 1 x W] batch.
  Tensor features(int step, const Tensor& inputs, nn::Mode mode);
  /// Eval-mode argmax of h_c(h_b(h_f(x))) for the inference step.
  Predictions predict(const Tensor& inputs);

  std::vector<nn::Parameter*> backbone_parameters();
  std::vector<nn::Parameter*> head_parameters(int step);
  std::vector<nn::Parameter*> all_parameters();
  /// Every persisted array (parameters, batch-norm buffers, centroids) by name.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();

  Tensor centroids;  // [K x bottleneck_dim]

 private:
  void check_input(const Tensor& inputs) const;

  ArchConfig arch_;
  FeatureExtractor backbone_;
  HeadGroup step2_;
  HeadGroup step3_;
  HeadGroup step4_;
  int inference_step_ = 4;
};

/// Adversary widths {in, hidden x layers, out}.
std::vector<std::size_t> adversary_widths(const ArchConfig& arch, std::size_t out);

}  // namespace dvfy::model
