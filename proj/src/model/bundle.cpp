#include "dvfy/model/bundle.hpp"

#include <algorithm>

#include "dvfy/error.hpp"
#include "dvfy/numerics/rng.hpp"

namespace dvfy::model {

namespace {

constexpr std::size_t kEvalChunk = 256;

nn::ConvBlockConfig block_config(const ArchConfig& arch, std::size_t in, std::size_t out) {
  return nn::ConvBlockConfig{in, out, arch.kernel_width, arch.pool_kernel, arch.pool_stride, arch.bn_eps,
                             arch.bn_momentum};
}

HeadGroup make_heads(const std::string& name, const ArchConfig& arch, std::size_t in, std::size_t classifier_out,
                     std::optional<std::size_t> adversary_out, std::uint64_t seed) {
  Rng rng(seed);
  HeadGroup g;
  g.bottleneck = nn::Linear(name + ".bottleneck", in, arch.bottleneck_dim, rng);
  g.classifier = nn::Linear(name + ".classifier", arch.bottleneck_dim, classifier_out, rng);
  if (adversary_out) g.adversary = nn::Mlp(name + ".adversary", adversary_widths(arch, *adversary_out), rng);
  return g;
}

}  // namespace

std::vector<std::size_t> adversary_widths(const ArchConfig& arch, std::size_t out) {
  std::vector<std::size_t> widths{arch.bottleneck_dim};
  for (std::size_t i = 0; i < arch.adversary_layers; ++i) widths.push_back(arch.adversary_hidden);
  widths.push_back(out);
  return widths;
}

FeatureExtractor::FeatureExtractor(const ArchConfig& arch, Rng& rng) {
  block1 = nn::ConvBlock("h_f.block1", block_config(arch, arch.channels, arch.conv1_channels), rng);
  block2 = nn::ConvBlock("h_f.block2", block_config(arch, arch.conv1_channels, arch.conv2_channels), rng);
  output_dim_ = arch.conv2_channels * block2.output_length(block1.output_length(arch.window));
}

nn::Var FeatureExtractor::forward(nn::Tape& tape, nn::Var x, nn::Mode mode) {
  nn::Var h = block1.forward(tape, x, mode);
  h = block2.forward(tape, h, mode);
  return nn::flatten(tape, h);
}

void FeatureExtractor::collect(std::vector<nn::Parameter*>& out) {
  block1.collect(out);
  block2.collect(out);
}

void HeadGroup::collect(std::vector<nn::Parameter*>& out) {
  bottleneck.collect(out);
  classifier.collect(out);
  if (adversary) adversary->collect(out);
}

ModelBundle::ModelBundle(const ArchConfig& arch) : arch_(arch) {
  require(arch.classes >= 1 && arch.latent_domains >= 1, ErrorKind::kConfig, "model needs classes >= 1 and K >= 1");
  require(arch.channels >= 1 && arch.bottleneck_dim >= 1, ErrorKind::kConfig, "model dimensions must be positive");
  require(arch.kernel_width <= arch.window, ErrorKind::kShape,
          "kernel width " + std::to_string(arch.kernel_width) + " larger than window " + std::to_string(arch.window));
  Rng rng(derive_seed(arch.seed, "h_f"));
  backbone_ = FeatureExtractor(arch, rng);
  const auto C = static_cast<std::size_t>(arch.classes);
  const auto K = static_cast<std::size_t>(arch.latent_domains);
  const std::size_t in = backbone_.output_dim();
  step2_ = make_heads("step2", arch, in, K * C, std::nullopt, derive_seed(arch.seed, "step2"));
  step3_ = make_heads("step3", arch, in, K, C, derive_seed(arch.seed, "step3"));
  step4_ = make_heads("step4", arch, in, C, K, derive_seed(arch.seed, "step4"));
  centroids = Tensor({K, arch.bottleneck_dim}, 0.0);
}

HeadGroup& ModelBundle::heads(int step) {
  return const_cast<HeadGroup&>(std::as_const(*this).heads(step));
}

const HeadGroup& ModelBundle::heads(int step) const {
  switch (step) {
    case 2: return step2_;
    case 3: return step3_;
    case 4: return step4_;
    default: fail(ErrorKind::kInput, "step must be 2, 3 or 4, got " + std::to_string(step));
  }
}

void ModelBundle::set_inference_step(int step) {
  heads(step);
  require(static_cast<int>(heads(step).classifier.out_features()) == arch_.classes, ErrorKind::kInput,
          "step " + std::to_string(step) + " classifier does not predict classes");
  inference_step_ = step;
}

void ModelBundle::check_input(const Tensor& inputs) const {
  require(inputs.rank() == 4 && inputs.dim(1) == arch_.channels && inputs.dim(2) == 1 && inputs.dim(3) == arch_.window,
          ErrorKind::kShape,
          "input " + nn::shape_string(inputs.shape()) + " does not match model [N x " + std::to_string(arch_.channels) +
              " x 1 x " + std::to_string(arch_.window) + "]");
}

Tensor ModelBundle::backbone_features(const Tensor& inputs) {
  check_input(inputs);
  const std::size_t n = inputs.dim(0), per = inputs.size() / n, dim = backbone_.output_dim();
  Tensor out({n, dim});
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, n - start);
    std::vector<Real> chunk(inputs.data().begin() + static_cast<std::ptrdiff_t>(start * per),
                            inputs.data().begin() + static_cast<std::ptrdiff_t>((start + count) * per));
    nn::Tape tape = nn::Tape::inference();
    nn::Var x = tape.constant(Tensor({count, inputs.dim(1), 1, inputs.dim(3)}, std::move(chunk)));
    const Tensor& f = tape.value(backbone_.forward(tape, x, nn::Mode::kEval));
    std::copy(f.data().begin(), f.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * dim));
  }
  return out;
}

Tensor ModelBundle::bottleneck_features(int step, const Tensor& backbone_out) {
  nn::Tape tape = nn::Tape::inference();
  return tape.value(heads(step).bottleneck.forward(tape, tape.constant(backbone_out)));
}

Tensor ModelBundle::features(int step, const Tensor& inputs, nn::Mode mode) {
  check_input(inputs);
  if (mode == nn::Mode::kEval) return bottleneck_features(step, backbone_features(inputs));
  nn::Tape tape = nn::Tape::inference();
  nn::Var h = backbone_.forward(tape, tape.constant(inputs), mode);
  return tape.value(heads(step).bottleneck.forward(tape, h));
}

Predictions ModelBundle::predict(const Tensor& inputs) {
  HeadGroup& g = heads(inference_step_);
  Tensor f = backbone_features(inputs);
  nn::Tape tape = nn::Tape::inference();
  nn::Var logits = g.classifier.forward(tape, g.bottleneck.forward(tape, tape.constant(std::move(f))));
  Predictions p;
  p.scores = nn::softmax_rows(tape.value(logits));
  const Tensor& lv = tape.value(logits);
  const std::size_t n = lv.dim(0), c = lv.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (lv.at(i, k) > lv.at(i, best)) best = k;
    p.labels.push_back(static_cast<int>(best));
  }
  return p;
}

std::vector<nn::Parameter*> ModelBundle::backbone_parameters() {
  std::vector<nn::Parameter*> out;
  backbone_.collect(out);
  return out;
}

std::vector<nn::Parameter*> ModelBundle::head_parameters(int step) {
  std::vector<nn::Parameter*> out;
  heads(step).collect(out);
  return out;
}

std::vector<nn::Parameter*> ModelBundle::all_parameters() {
  auto out = backbone_parameters();
  for (int step : {2, 3, 4}) heads(step).collect(out);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> ModelBundle::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (nn::Parameter* p : all_parameters()) out.emplace_back(p->name, &p->value);
  for (auto* block : {&backbone_.block1, &backbone_.block2}) {
    const std::string prefix = block == &backbone_.block1 ? "h_f.block1" : "h_f.block2";
    out.emplace_back(prefix + ".bn.running_mean", &block->running_mean);
    out.emplace_back(prefix + ".bn.running_var", &block->running_var);
  }
  out.emplace_back("centroids", &centroids);
  return out;
}

}  // namespace dvfy::model
