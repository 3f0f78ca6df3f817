#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dvfy/analysis/divergence.hpp"
#include "dvfy/dataio/synth.hpp"
#include "dvfy/error.hpp"
#include "dvfy/numerics/rng.hpp"
#include "oracles.hpp"

namespace {

using namespace dvfy::analysis;
using dvfy::Rng;
using dvfy::nn::Tensor;
using dvfy_test::best_threshold_error;
using dvfy_test::gaussian_cloud;

TEST(ProxyDivergence, IdenticalDistributionsNearZero) {
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const auto a = gaussian_cloud(200, 6, 0.0, 100 + s), b = gaussian_cloud(200, 6, 0.0, 200 + s);
    const auto est = proxy_h_divergence(a, b, {}, s);
    EXPECT_LE(est.divergence, 0.3) << "seed " << s;
  }
}

TEST(ProxyDivergence, DisjointSupportsNearTwo) {
  auto a = gaussian_cloud(200, 4, 0.0, 1), b = gaussian_cloud(200, 4, 0.0, 2);
  for (std::size_t i = 0; i < 200; ++i) {
    a.at(i, 0) = std::abs(a.at(i, 0)) + 1.0;
    b.at(i, 0) = -std::abs(b.at(i, 0)) - 1.0;
  }
  EXPECT_GE(proxy_h_divergence(a, b, {}, 3).divergence, 1.8);
  ProbeConfig mlp;
  mlp.hidden = 16;
  EXPECT_GE(proxy_h_divergence(a, b, mlp, 3).divergence, 1.8);
}

TEST(ProxyDivergence, GaussianPairMatchesThresholdOracle) {
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const auto a = gaussian_cloud(400, 1, 0.0, 10 + s), b = gaussian_cloud(400, 1, 2.0, 20 + s);
    const double oracle = 2.0 * (1.0 - 2.0 * best_threshold_error(a, b));
    const double est = proxy_h_divergence(a, b, {}, s).divergence;
    EXPECT_NEAR(est, oracle, 0.15) << "seed " << s;
  }
}

TEST(ProxyDivergence, DeterministicRangeAndSymmetricSubsample) {
  const auto a = gaussian_cloud(90, 3, 0.0, 5), b = gaussian_cloud(150, 3, 0.7, 6);
  const auto e1 = proxy_h_divergence(a, b, {}, 9), e2 = proxy_h_divergence(a, b, {}, 9);
  EXPECT_EQ(e1.divergence, e2.divergence);
  EXPECT_EQ(e1.val_error, e2.val_error);
  EXPECT_GE(e1.divergence, 0.0);
  EXPECT_LE(e1.divergence, 2.0);
  EXPECT_GE(e1.val_error, 0.0);
  EXPECT_LE(e1.val_error, 1.0);
}

TEST(ProxyDivergence, RejectsTinyAndMismatchedSets) {
  const auto a = gaussian_cloud(3, 2, 0.0, 1), b = gaussian_cloud(10, 2, 0.0, 2), c = gaussian_cloud(10, 3, 0.0, 3);
  try {
    proxy_h_divergence(a, b, {}, 1);
    FAIL();
  } catch (const dvfy::Error& e) {
    EXPECT_EQ(e.kind(), dvfy::ErrorKind::kInput);
  }
  try {
    proxy_h_divergence(b, c, {}, 1);
    FAIL();
  } catch (const dvfy::Error& e) {
    EXPECT_EQ(e.kind(), dvfy::ErrorKind::kShape);
  }
}

TEST(PairwiseMatrix, DuplicatedGroupsStayLow) {
  const auto f = gaussian_cloud(600, 5, 0.0, 4);
  std::vector<int> groups(600);
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i] = static_cast<int>(i % 3);
  const auto r = pairwise_divergence_matrix(f, groups, {"a", "b", "c"}, {}, 7);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(r.matrix[i][j], r.matrix[j][i]);
      if (i == j) {
        EXPECT_EQ(r.matrix[i][j], 0.0);
      } else {
        EXPECT_LE(r.matrix[i][j], 0.3);
      }
    }
  EXPECT_LE(r.max_off_diagonal, 0.3);
}

TEST(PairwiseMatrix, SummaryStatistics) {
  const auto f = gaussian_cloud(300, 2, 0.0, 8);
  std::vector<int> groups(300);
  for (std::size_t i = 0; i < 300; ++i) groups[i] = static_cast<int>(i / 100);
  auto shifted = f;
  for (std::size_t i = 100; i < 200; ++i) shifted.at(i, 0) += 3.0;
  const auto r = pairwise_divergence_matrix(shifted, groups, {"x", "y", "z"}, {}, 2);
  const double mean = (r.matrix[0][1] + r.matrix[0][2] + r.matrix[1][2]) / 3.0;
  EXPECT_DOUBLE_EQ(r.mean_off_diagonal, mean);
  EXPECT_EQ(r.max_off_diagonal, std::max({r.matrix[0][1], r.matrix[0][2], r.matrix[1][2]}));
  EXPECT_GT(r.matrix[0][1], r.matrix[0][2]);
  EXPECT_EQ(r.val_error[1][1], 0.5);
}

TEST(PairwiseMatrix, EmptyGroupIsAnError) {
  const auto f = gaussian_cloud(40, 2, 0.0, 1);
  std::vector<int> groups(40, 0);
  for (std::size_t i = 0; i < 20; ++i) groups[i] = 2;
  EXPECT_THROW(pairwise_divergence_matrix(f, groups, {"a", "b", "c"}, {}, 1), dvfy::Error);
  EXPECT_THROW(pairwise_divergence_matrix(f, std::vector<int>(40, 0), {"a"}, {}, 1), dvfy::Error);
}

TEST(PairwiseMatrix, TrueDomainsSeparateOnRawFeatures) {
  dvfy::data::SynthConfig cfg;
  cfg.domains = 3;
  cfg.classes = 4;
  cfg.series_per_cell = 2;
  cfg.seed = 1;
  const auto ds = dvfy::data::generate_synthetic(cfg);
  const auto r = pairwise_divergence_matrix(feature_matrix(ds, FeatureSpace::kRaw), ds.true_domains(),
                                            {"d0", "d1", "d2"}, {}, 1);
  EXPECT_GE(r.mean_off_diagonal, 0.8);
}

TEST(DivergenceReport, JsonRoundTripAndCsv) {
  const auto f = gaussian_cloud(60, 2, 0.0, 3);
  std::vector<int> groups(60);
  for (std::size_t i = 0; i < 60; ++i) groups[i] = static_cast<int>(i % 2);
  const auto r = pairwise_divergence_matrix(f, groups, {"g0", "g1"}, {}, 4, "step4");
  const auto back = divergence_report_from_json(to_json(r));
  EXPECT_EQ(back.split_names, r.split_names);
  EXPECT_EQ(back.matrix, r.matrix);
  EXPECT_EQ(back.val_error, r.val_error);
  EXPECT_EQ(back.mean_off_diagonal, r.mean_off_diagonal);
  EXPECT_EQ(back.feature_space, "step4");
  EXPECT_EQ(back.probe, r.probe);
  EXPECT_EQ(back.seed, 4u);

  std::ostringstream csv;
  write_matrix_csv(csv, r);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.rfind("split,g0,g1\n", 0), 0u);
}

TEST(FeatureSpace, ParseRoundTrip) {
  for (auto s : {FeatureSpace::kRaw, FeatureSpace::kStep3, FeatureSpace::kStep4})
    EXPECT_EQ(parse_feature_space(to_string(s)), s);
  EXPECT_THROW(parse_feature_space("step2"), dvfy::Error);
}

struct Toy {
  dvfy::data::SegmentDataset data;
  dvfy::model::ModelBundle model;
};

Toy toy(int k) {
  dvfy::data::SynthConfig cfg;
  cfg.domains = 2;
  cfg.classes = 3;
  cfg.channels = 2;
  cfg.series_per_cell = 2;
  cfg.length = 96;
  cfg.window = 32;
  cfg.step = 16;
  Toy t;
  t.data = dvfy::data::generate_synthetic(cfg);
  dvfy::model::ArchConfig arch;
  arch.channels = 2;
  arch.window = 32;
  arch.classes = 3;
  arch.latent_domains = k;
  arch.kernel_width = 5;
  arch.conv1_channels = 4;
  arch.conv2_channels = 4;
  arch.bottleneck_dim = 8;
  arch.adversary_hidden = 8;
  t.model = dvfy::model::ModelBundle(arch);
  t.model.set_inference_step(4);
  t.data.set_latent_domains(k);
  Rng rng(5);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data.set_pseudo_domain(i, static_cast<int>(rng.below(k)));
  return t;
}

TEST(BoundReport, WeightsSumToOneAndErrorMatchesOverall) {
  for (int k : {2, 3, 5}) {
    auto t = toy(k);
    const auto r = bound_report(t.model, t.data, DivergenceReport{});
    ASSERT_EQ(r.phi.size(), static_cast<std::size_t>(k));
    EXPECT_NEAR(std::accumulate(r.phi.begin(), r.phi.end(), 0.0), 1.0, 1e-12);
    for (double p : r.phi) EXPECT_GE(p, 0.0);
    const auto pred = t.model.predict(t.data.all()).labels;
    const auto y = t.data.labels();
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < y.size(); ++i) wrong += pred[i] != y[i];
    EXPECT_NEAR(r.weighted_error, static_cast<double>(wrong) / static_cast<double>(y.size()), 1e-12);
    EXPECT_EQ(r.not_computable.size(), 2u);
  }
}

TEST(BoundReport, PerfectPredictorHasZeroError) {
  auto t = toy(3);
  // Relabel the data with the model's own predictions.
  const auto pred = t.model.predict(t.data.all()).labels;
  dvfy::data::SegmentDataset relabelled(t.data.channels(), t.data.window(), t.data.classes(), 3);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    auto s = t.data[i];
    s.y = pred[i];
    relabelled.add(s);
  }
  DivergenceReport div;
  div.max_off_diagonal = 1.2;
  const auto r = bound_report(t.model, relabelled, div);
  EXPECT_EQ(r.weighted_error, 0.0);
  EXPECT_DOUBLE_EQ(r.divergence_term, 0.6);
}

}  // namespace
