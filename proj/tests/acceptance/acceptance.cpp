// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.
// `acceptance 1 4 8` runs a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "dvfy/analysis/divergence.hpp"
#include "dvfy/analysis/metrics.hpp"
#include "dvfy/cli/experiment.hpp"
#include "dvfy/dataio/io.hpp"
#include "dvfy/dataio/synth.hpp"
#include "dvfy/diversify/trainer.hpp"
#include "dvfy/numerics/gradcheck.hpp"
#include "dvfy/numerics/layers.hpp"
#include "dvfy/numerics/ops.hpp"
#include "oracles.hpp"

namespace {

using namespace dvfy;
using namespace dvfy_test;
using diversify::Method;
using nn::Mode;
using nn::Parameter;
using nn::Tape;
using nn::Var;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(nn::Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

// ---- 1: gradients ----------------------------------------------------------

// Smallest |pre-activation| over the hidden layers of an MLP, from plain loops.
double mlp_margin(const nn::Mlp& mlp, const Tensor& x) {
  Matrix h = to_matrix(x);
  double margin = 1e300;
  const auto& layers = mlp.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const Tensor& w = layers[l].weight.value;
    const Tensor& b = layers[l].bias.value;
    Matrix next(h.size(), std::vector<double>(w.dim(0)));
    for (std::size_t i = 0; i < h.size(); ++i)
      for (std::size_t o = 0; o < w.dim(0); ++o) {
        double a = b[o];
        for (std::size_t k = 0; k < w.dim(1); ++k) a += w.at(o, k) * h[i][k];
        margin = std::min(margin, std::abs(a));
        next[i][o] = std::max(a, 0.0);
      }
    h = std::move(next);
  }
  return margin;
}

struct ConvCase {
  nn::ConvBlock block;
  nn::Linear head;
  Tensor input;
  std::vector<int> targets;
};

ConvCase conv_case(std::uint64_t seed) {
  Rng rng(seed);
  ConvCase c;
  c.block = nn::ConvBlock("b", nn::ConvBlockConfig{2, 3, 4}, rng);
  c.head = nn::Linear("fc", 3 * 6, 3, rng);
  c.input = random_tensor({4, 2, 1, 15}, rng);
  for (int b = 0; b < 4; ++b) c.targets.push_back(static_cast<int>(rng.below(3)));
  for (auto& v : c.block.running_mean.data()) v = 0.1 * rng.normal();
  for (auto& v : c.block.running_var.data()) v = 0.5 + rng.uniform();
  for (auto& v : c.block.bn_gamma.value.data()) v = 0.5 + rng.uniform();
  for (auto& v : c.block.bn_beta.value.data()) v = 0.1 * rng.normal();
  return c;
}

// Distance of the nearest max-pool comparison / ReLU input from its kink.
double conv_margin(ConvCase& c, Mode mode) {
  Tape t = Tape::inference();
  auto& b = c.block;
  Var conv = nn::conv1xk(t, t.constant(c.input), t.parameter(b.conv_weight), t.parameter(b.conv_bias));
  const Tensor& cv = t.value(conv);
  double margin = 1e300;
  for (std::size_t i = 0; i + 1 < cv.size(); i += 2) margin = std::min(margin, std::abs(cv[i] - cv[i + 1]));
  Tensor rm = b.running_mean, rv = b.running_var;
  Var bn = nn::batch_norm(t, nn::max_pool_1xk(t, conv), t.parameter(b.bn_gamma), t.parameter(b.bn_beta), rm, rv,
                          nn::BatchNormOptions{mode == Mode::kTrain, 0.1, 1e-5});
  for (double v : t.value(bn).data()) margin = std::min(margin, std::abs(v));
  return margin;
}

Outcome criterion1() {
  constexpr double kTol = 1e-4;
  constexpr double kLambda = 0.5;
  double worst = 0.0;
  std::string worst_case = "none";
  auto record = [&](const std::string& what, std::uint64_t seed, const nn::GradCheckResult& r) {
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_case = what + " seed " + std::to_string(seed);
    }
  };
  std::size_t checks = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(7, seed));
    {
      Parameter logits("logits", random_tensor({4, 3}, rng));
      const std::vector<int> y{0, 2, 1, 2};
      Parameter* ps[] = {&logits};
      record("cross_entropy", seed,
             nn::finite_difference_check([&](Tape& t) { return nn::cross_entropy(t, t.parameter(logits), y); }, ps));
    }
    {
      nn::Linear fc("fc", 5, 4, rng);
      const Tensor x = random_tensor({6, 5}, rng);
      const std::vector<int> y{0, 1, 2, 3, 0, 1};
      std::vector<Parameter*> ps;
      fc.collect(ps);
      record("linear", seed,
             nn::finite_difference_check([&](Tape& t) { return nn::cross_entropy(t, fc.forward(t, t.constant(x)), y); },
                                         ps));
    }
    {
      nn::Mlp mlp;
      Tensor x;
      for (std::uint64_t j = 0;; ++j) {
        Rng r2(derive_seed(seed, j));
        mlp = nn::Mlp("mlp", {5, 7, 3}, r2);
        x = random_tensor({6, 5}, r2);
        if (mlp_margin(mlp, x) >= 1e-4) break;
      }
      const std::vector<int> y{0, 1, 2, 0, 1, 2};
      std::vector<Parameter*> ps;
      mlp.collect(ps);
      record("mlp_relu", seed,
             nn::finite_difference_check([&](Tape& t) { return nn::cross_entropy(t, mlp.forward(t, t.constant(x)), y); },
                                         ps));
    }
    for (Mode mode : {Mode::kTrain, Mode::kEval}) {
      ConvCase c;
      for (std::uint64_t j = 0;; ++j) {
        c = conv_case(seed * 1000 + j);
        if (conv_margin(c, mode) >= 1e-4) break;
      }
      Parameter x("x", c.input);
      std::vector<Parameter*> ps{&x};
      c.block.collect(ps);
      c.head.collect(ps);
      // Batch statistics cancel the conv bias exactly in train mode; its
      // gradient is identically zero and is checked for that instead.
      if (mode == Mode::kTrain) std::erase(ps, &c.block.conv_bias);
      auto loss = [&](Tape& t) {
        Var h = c.block.forward(t, t.parameter(x), mode);
        return nn::cross_entropy(t, c.head.forward(t, nn::flatten(t, h)), c.targets);
      };
      record(mode == Mode::kTrain ? "conv_block_train" : "conv_block_eval", seed, nn::finite_difference_check(loss, ps));
      if (mode == Mode::kTrain) {
        std::vector<Parameter*> bias{&c.block.conv_bias};
        nn::finite_difference_check(loss, bias);
        for (double g : c.block.conv_bias.grad.data())
          if (std::abs(g) > 1e-14) record("conv_bias_inert", seed, {1.0, 0, 0, g, 0});
      }
    }
    // Both adversarial branches: bottleneck -> GRL -> adversary MLP -> CE, with
    // the step-3 branch on class labels and the step-4 branch on domains.
    for (int step : {3, 4}) {
      model::ArchConfig arch;
      arch.channels = 2;
      arch.window = 24;
      arch.classes = 3;
      arch.latent_domains = 2;
      arch.kernel_width = 5;
      arch.conv1_channels = 2;
      arch.conv2_channels = 2;
      arch.bottleneck_dim = 6;
      arch.adversary_hidden = 5;
      Tensor features;
      std::optional<model::ModelBundle> bundle;
      for (std::uint64_t j = 0;; ++j) {
        arch.seed = derive_seed(seed * 1000 + j, "arch");
        bundle.emplace(arch);
        Rng r2(arch.seed);
        features = random_tensor({6, bundle->backbone().output_dim()}, r2);
        if (mlp_margin(*bundle->heads(step).adversary, bundle->bottleneck_features(step, features)) >= 1e-4) break;
      }
      auto& heads = bundle->heads(step);
      const std::vector<int> y = step == 3 ? std::vector<int>{0, 1, 2, 0, 1, 2} : std::vector<int>{0, 1, 1, 0, 1, 0};
      auto loss = [&](Tape& t) {
        Var z = heads.bottleneck.forward(t, t.constant(features));
        return nn::cross_entropy(t, heads.adversary->forward(t, nn::reverse_gradient(t, z, kLambda)), y);
      };
      std::vector<Parameter*> adv, bottleneck;
      heads.adversary->collect(adv);
      heads.bottleneck.collect(bottleneck);
      const std::string name = "grl_branch_step" + std::to_string(step);
      record(name + "_adversary", seed, nn::finite_difference_check(loss, adv));
      // Upstream of the reversal the tape gradient is -lambda times the true one.
      record(name + "_bottleneck", seed, nn::finite_difference_check(loss, bottleneck, {1e-5, -1.0 / kLambda}));
    }
    checks += 9;
  }
  return {worst <= kTol, std::to_string(checks) + " checks over 20 seeds, max rel err " + fmt("%.3g", worst) +
                             " (" + worst_case + "), bound 1e-4"};
}

// ---- 2, 3: pseudo labels ---------------------------------------------------

Outcome criterion2() {
  std::size_t mismatches = 0;
  double worst = 0.0;
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng);
    const Tensor w = random_weights(inst.features.dim(0), inst.k, rng);
    const Matrix f = to_matrix(inst.features);
    const Matrix expect = oracle_soft_centroids(f, to_matrix(w));
    const Tensor got = diversify::soft_centroids(inst.features, w);
    for (std::size_t c = 0; c < expect.size(); ++c)
      for (std::size_t d = 0; d < expect[c].size(); ++d) worst = std::max(worst, std::abs(got.at(c, d) - expect[c][d]));
    for (Distance metric : {Distance::kCosine, Distance::kEuclidean}) {
      Tensor mu({static_cast<std::size_t>(inst.k), inst.features.dim(1)});
      for (auto& v : mu.data()) v = 2.0 * rng.normal();
      mismatches += diversify::nearest_centroid_assign(inst.features, mu, metric) != oracle_assign(f, to_matrix(mu), metric);

      const auto labels = random_labels(f.size(), inst.k, rng);
      Matrix onehot(f.size(), std::vector<double>(static_cast<std::size_t>(inst.k), 0.0));
      for (std::size_t i = 0; i < f.size(); ++i) onehot[i][static_cast<std::size_t>(labels[i])] = 1.0;
      const Matrix hard = oracle_soft_centroids(f, onehot);
      const auto r = diversify::refine_pseudo_labels(inst.features, labels, inst.k, metric);
      for (std::size_t c = 0; c < hard.size(); ++c)
        for (std::size_t d = 0; d < hard[c].size(); ++d) worst = std::max(worst, std::abs(r.centroids.at(c, d) - hard[c][d]));
      mismatches += r.labels != oracle_assign(f, hard, metric);
    }
  }
  return {mismatches == 0 && worst <= 1e-10,
          "100 instances x {cosine, euclidean}: assignment mismatches " + std::to_string(mismatches) +
              ", max centroid error " + fmt("%.3g", worst) + " (bound 1e-10)"};
}

Outcome criterion3() {
  std::size_t increases = 0, decreases = 0, disagree = 0;
  double worst = -1e300;
  Rng rng(3033);
  for (Distance metric : {Distance::kCosine, Distance::kEuclidean})
    for (int trial = 0; trial < 100; ++trial) {
      auto inst = random_instance(rng);
      const auto labels = random_labels(inst.features.dim(0), inst.k, rng);
      const auto r = diversify::refine_pseudo_labels(inst.features, labels, inst.k, metric);
      // Independent measurement of the objective before and after.
      const Matrix f = to_matrix(inst.features), mu = to_matrix(r.centroids);
      double before = 0, after = 0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        before += oracle_distance(f[i], mu[static_cast<std::size_t>(labels[i])], metric);
        after += oracle_distance(f[i], mu[static_cast<std::size_t>(r.labels[i])], metric);
      }
      increases += after > before || r.distance_after > r.distance_before;
      decreases += after < before;
      disagree += std::abs(after - r.distance_after) > 1e-9 * (1.0 + after) ||
                  std::abs(before - r.distance_before) > 1e-9 * (1.0 + before);
      worst = std::max(worst, after - before);
    }
  return {increases == 0 && disagree == 0,
          "200 instances, increases " + std::to_string(increases) + ", strict decreases " + std::to_string(decreases) +
              ", largest change " + fmt("%.3g", worst) + ", reported objective disagreements " +
              std::to_string(disagree)};
}

// ---- 4: collapses ----------------------------------------------------------

data::SynthConfig tiny_synth() {
  data::SynthConfig s;
  s.domains = 2;
  s.classes = 2;
  s.channels = 2;
  s.series_per_cell = 4;
  s.length = 128;
  s.window = 32;
  s.step = 16;
  return s;
}

model::ArchConfig tiny_arch() {
  model::ArchConfig a;
  a.channels = 2;
  a.window = 32;
  a.classes = 2;
  a.kernel_width = 5;
  a.conv1_channels = 4;
  a.conv2_channels = 6;
  a.bottleneck_dim = 8;
  a.adversary_hidden = 8;
  return a;
}

diversify::TrainConfig tiny_train(int k) {
  diversify::TrainConfig c;
  c.latent_domains = k;
  c.rounds = 3;
  c.local_epochs = 2;
  c.batch_size = 16;
  c.learning_rate = 3e-3;
  c.seed = 11;
  return c;
}

std::pair<data::SegmentDataset, data::SegmentDataset> tiny_split() {
  const auto ds = data::generate_synthetic(tiny_synth());
  const auto s = data::split_train_val(ds, 0.8, 5);
  return {ds.subset(s.train), ds.subset(s.val)};
}

std::vector<Tensor> backbone_state(model::ModelBundle& m) {
  std::vector<Tensor> out;
  for (auto* p : m.backbone_parameters()) out.push_back(p->value);
  for (auto* b : {&m.backbone().block1, &m.backbone().block2}) {
    out.push_back(b->running_mean);
    out.push_back(b->running_var);
  }
  return out;
}

Outcome criterion4() {
  // (a)
  bool bijective = true;
  for (int k = 1; k <= 10; ++k)
    for (int c = 1; c <= 20; ++c) {
      std::set<int> seen;
      for (int d = 0; d < k; ++d)
        for (int y = 0; y < c; ++y) {
          const int s = diversify::domain_class_label(d, y, c, k);
          bijective = bijective && s >= 0 && s < k * c && seen.insert(s).second &&
                      diversify::split_domain_class_label(s, c) == std::make_pair(d, y);
        }
    }
  // (b)
  auto [train, val] = tiny_split();
  auto cfg = tiny_train(1);
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 0.0;
  diversify::Trainer div(Method::kDiversify, cfg, tiny_arch(), train, val);
  diversify::Trainer erm(Method::kErm, cfg, tiny_arch(), train, val);
  div.run();
  erm.run();
  auto step2 = [](const diversify::Trainer& t) {
    std::vector<double> out;
    for (const auto& r : t.history())
      if (r.step == 2) out.push_back(r.l_super);
    return out;
  };
  bool collapse = step2(div) == step2(erm) && !step2(div).empty();
  const auto pd = div.model().backbone_parameters(), pe = erm.model().backbone_parameters();
  for (std::size_t i = 0; i < pd.size(); ++i) collapse = collapse && pd[i]->value == pe[i]->value;
  // (c)
  diversify::Trainer t(Method::kDiversify, tiny_train(2), tiny_arch(), train, val);
  bool frozen = true;
  for (int round = 0; round < 3; ++round) {
    t.step2_feature_update();
    const auto after2 = backbone_state(t.model());
    t.step3_characterize();
    t.step4_invariant_train();
    const auto after4 = backbone_state(t.model());
    for (std::size_t i = 0; i < after2.size(); ++i) frozen = frozen && after2[i] == after4[i];
  }
  return {bijective && collapse && frozen, std::string("(a) bijective K<=10 C<=20: ") + (bijective ? "yes" : "no") +
                                               "; (b) K=1 lambda=0 equals ERM bitwise: " + (collapse ? "yes" : "no") +
                                               "; (c) backbone frozen in steps 3-4 every round: " +
                                               (frozen ? "yes" : "no")};
}

// ---- 5, 6, 7: synthetic benchmark -----------------------------------------

struct BenchRun {
  std::vector<cli::ResultsRecord> records;
  double seconds = 0.0;
};

const BenchRun& bench() {
  static const BenchRun run = [] {
    cli::ExperimentConfig cfg;
    cfg.bench.methods = {Method::kDiversify, Method::kErm};
    const auto t0 = std::chrono::steady_clock::now();
    BenchRun r;
    r.records = cli::run_bench(cfg, [](const cli::ResultsRecord& rec) {
      std::fprintf(stderr, "  bench seed=%llu held_out=%d %s acc=%.4f %.1fs\n",
                   static_cast<unsigned long long>(rec.seed), rec.held_out, diversify::to_string(rec.method).c_str(),
                   rec.test_accuracy, rec.wall_clock_seconds);
    });
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome criterion5() {
  const auto& b = bench();
  double learned = 0, random = 0, seconds = 0;
  int n = 0;
  for (const auto& r : b.records)
    if (r.method == Method::kDiversify) {
      learned += *r.learned_div_mean;
      random += *r.random_div_mean;
      seconds += r.wall_clock_seconds;
      ++n;
    }
  learned /= n;
  random /= n;
  return {learned > random && seconds < 300.0,
          fmt("learned-split mean divergence %.4f vs random %.4f", learned, random) + " over " + std::to_string(n) +
              " runs (3 seeds x 3 held-out), " + fmt("%.0f s", seconds)};
}

Outcome criterion6() {
  const cli::ExperimentConfig cfg;
  double total = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    data::SynthConfig sc = cfg.data;
    sc.seed = seed;
    const auto ds = data::generate_synthetic(sc);
    auto tc = cfg.train;
    tc.seed = seed;
    auto t = diversify::train(Method::kDiversify, ds, tc, cli::resolved_arch(cfg));
    const double ari = analysis::adjusted_rand_index(t.train_set().pseudo_domains(), t.train_set().true_domains());
    total += ari;
    per_seed += (per_seed.empty() ? "" : ", ") + fmt("%.3f", ari);
  }
  const double mean = total / 3.0;
  return {mean >= 0.5, fmt("mean ARI %.4f (bound 0.5); seeds ", mean) + per_seed + "; K = 3 on all 3 domains"};
}

Outcome criterion7() {
  const auto& b = bench();
  const auto s = cli::summarize(b.records);
  double div = 0, erm = 0;
  for (const auto& m : s) (m.method == Method::kDiversify ? div : erm) = m.mean_test_accuracy;
  const double margin = 100.0 * (div - erm);
  // The full bench adds DANN, roughly another ERM-sized share of the time.
  return {margin >= -1.0 && b.seconds < 600.0,
          fmt("DIVERSIFY %.2f%% vs ERM %.2f%%", 100.0 * div, 100.0 * erm) + fmt(", margin %+.2f points", margin) +
              " (floor -1, target +2" + (margin >= 2.0 ? ", met" : ", not met") + "), " + fmt("%.0f s", b.seconds)};
}

// ---- 8: divergence estimator ----------------------------------------------

Outcome criterion8() {
  double identical = 0.0;
  for (std::uint64_t s = 1; s <= 3; ++s)
    identical = std::max(identical, analysis::proxy_h_divergence(gaussian_cloud(200, 6, 0.0, 100 + s),
                                                                 gaussian_cloud(200, 6, 0.0, 200 + s), {}, s)
                                        .divergence);
  auto a = gaussian_cloud(200, 4, 0.0, 1), b = gaussian_cloud(200, 4, 0.0, 2);
  for (std::size_t i = 0; i < 200; ++i) {
    a.at(i, 0) = std::abs(a.at(i, 0)) + 1.0;
    b.at(i, 0) = -std::abs(b.at(i, 0)) - 1.0;
  }
  const double disjoint = analysis::proxy_h_divergence(a, b, {}, 3).divergence;
  double gap = 0.0;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const auto g0 = gaussian_cloud(400, 1, 0.0, 10 + s), g2 = gaussian_cloud(400, 1, 2.0, 20 + s);
    const double oracle = 2.0 * (1.0 - 2.0 * best_threshold_error(g0, g2));
    gap = std::max(gap, std::abs(analysis::proxy_h_divergence(g0, g2, {}, s).divergence - oracle));
  }
  return {identical <= 0.3 && disjoint >= 1.8 && gap <= 0.15,
          fmt("identical max %.3f (<=0.3), disjoint %.3f (>=1.8), ", identical, disjoint) +
              fmt("gaussian |est - oracle| max %.3f (<=0.15)", gap)};
}

// ---- 9: determinism and persistence ---------------------------------------

std::string history_csv(const std::vector<diversify::HistoryRow>& rows) {
  std::ostringstream os;
  diversify::write_history_csv(os, rows);
  return os.str();
}

Outcome criterion9() {
  auto [train, val] = tiny_split();
  const auto cfg = tiny_train(2);
  diversify::Trainer a(Method::kDiversify, cfg, tiny_arch(), train, val);
  diversify::Trainer b(Method::kDiversify, cfg, tiny_arch(), train, val);
  a.run();
  b.run();
  const bool same_history = history_csv(a.history()) == history_csv(b.history());

  diversify::Trainer part(Method::kDiversify, cfg, tiny_arch(), train, val);
  part.run_round();
  const auto path = std::filesystem::temp_directory_path() / "dvfy_acceptance_resume.ckpt";
  part.save(path);
  auto resumed = diversify::Trainer::load(path, train, val);
  std::filesystem::remove(path);
  resumed.run();
  const auto& full = a.history();
  const auto& rest = resumed.history();
  bool resume = rest.size() < full.size() &&
                history_csv({full.end() - static_cast<std::ptrdiff_t>(rest.size()), full.end()}) == history_csv(rest);
  const auto pa = a.model().all_parameters(), pr = resumed.model().all_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) resume = resume && pa[i]->value == pr[i]->value;
  resume = resume && a.train_set().pseudo_domains() == resumed.train_set().pseudo_domains();

  const auto ds = data::generate_synthetic(tiny_synth());
  std::stringstream text;
  data::write_dataset(text, ds, data::DatasetEncoding::kText);
  bool lossless = data::read_dataset(text) == ds;
  // The binary encoding stores float32; values already in float32 survive exactly.
  data::SegmentDataset narrow(ds.channels(), ds.window(), ds.classes());
  for (auto s : ds.segments()) {
    for (auto& v : s.values) v = static_cast<float>(v);
    narrow.add(s);
  }
  std::stringstream bin;
  data::write_dataset(bin, narrow, data::DatasetEncoding::kBinary);
  lossless = lossless && data::read_dataset(bin) == narrow;
  return {same_history && resume && lossless,
          std::string("history CSV identical: ") + (same_history ? "yes" : "no") +
              "; resume from round-1 checkpoint bitwise: " + (resume ? "yes" : "no") +
              "; dataset text/binary round trip: " + (lossless ? "yes" : "no")};
}

// ---- 10: accuracy ----------------------------------------------------------

Outcome criterion10() {
  struct Fixture {
    std::vector<int> pred, truth;
    double expect;
  };
  const std::vector<Fixture> fixtures{
      {{1, 2, 3}, {1, 2, 3}, 1.0},
      {{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, {0, 1, 0, 1, 0, 0, 1, 0, 1, 0}, 0.5},
      {{2, 2, 2, 0}, {2, 1, 2, 1}, 0.5},
      {{0, 0, 0}, {1, 1, 0}, 1.0 / 3.0},
      {{4, 4, 4, 4, 4}, {0, 1, 2, 3, 5}, 0.0},
  };
  int exact = 0;
  for (const auto& f : fixtures) exact += analysis::accuracy(f.pred, f.truth) == f.expect;
  return {exact == static_cast<int>(fixtures.size()),
          std::to_string(exact) + "/" + std::to_string(fixtures.size()) + " hand-counted fixtures exact"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
