#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dvfy/dataio/dataset.hpp"
#include "dvfy/model/bundle.hpp"

namespace dvfy::analysis {

using nn::Real;
using nn::Tensor;

/// Domain-classifier probe used by the proxy divergence. hidden == 0 is a
/// linear (logistic) probe, otherwise one ReLU hidden layer of that width.
struct ProbeConfig {
  std::size_t hidden = 0;
  int epochs = 60;
  Real learning_rate = 1e-2;
  std::size_t batch_size = 64;
  // Estimates are averaged over this many probes (split + init seeds).
  int repeats = 3;

  bool operator==(const ProbeConfig&) const = default;
};

std::string describe(const ProbeConfig& probe);

struct DivergenceEstimate {
  Real divergence = 0.0;  // clamp(2 (1 - 2 err), 0, 2), averaged over repeats
  Real val_error = 0.0;   // mean probe validation error
};

/// Proxy H-divergence between two sample sets ([N x D] rows). The larger set
/// is subsampled to the size of the smaller so chance error is 1/2; each set
/// is split 50/50 into probe train/validation halves, features standardized
/// with train-half statistics. Throws kInput when a set has fewer than 4 rows
/// and kShape when the widths differ. Deterministic given seed.
DivergenceEstimate proxy_h_divergence(const Tensor& a, const Tensor& b, const ProbeConfig& probe,
                                      std::uint64_t seed);

struct DivergenceReport {
  std::vector<std::string> split_names;
  std::vector<std::vector<Real>> matrix;     // symmetric, zero diagonal
  std::vector<std::vector<Real>> val_error;  // per-pair probe error, diagonal 0.5
  Real mean_off_diagonal = 0.0;
  Real max_off_diagonal = 0.0;
  std::string feature_space;
  std::string probe;
  std::uint64_t seed = 0;
};

/// One estimate per unordered pair of groups, rows of `features` selected by
/// `groups` (values in [0, names.size())). Throws kInput on an empty group or
/// fewer than two groups.
DivergenceReport pairwise_divergence_matrix(const Tensor& features, std::span<const int> groups,
                                            const std::vector<std::string>& names, const ProbeConfig& probe,
                                            std::uint64_t seed, const std::string& feature_space = "raw");

enum class FeatureSpace { kRaw, kStep3, kStep4 };
std::string to_string(FeatureSpace space);
FeatureSpace parse_feature_space(const std::string& text);

/// Flattened segments, or eval-mode bottleneck features of the given step.
Tensor feature_matrix(const data::SegmentDataset& dataset, FeatureSpace space, model::ModelBundle* bundle = nullptr);

struct BoundReport {
  std::vector<Real> phi;            // cluster proportions
  std::vector<Real> source_errors;  // 1 - per-cluster accuracy of the predictor
  Real weighted_error = 0.0;        // sum phi_i * err_i
  Real divergence_term = 0.0;       // max off-diagonal divergence / 2
  std::vector<std::string> not_computable{"ideal_joint_error", "min_over_mixtures"};
};

/// Computable terms of the latent-domain generalization bound for `bundle`
/// on `dataset` grouped by its pseudo domains. Empty clusters get phi 0 and
/// error 0.
BoundReport bound_report(model::ModelBundle& bundle, const data::SegmentDataset& dataset,
                         const DivergenceReport& divergence);

std::string to_json(const DivergenceReport& report);
std::string to_json(const BoundReport& report);
DivergenceReport divergence_report_from_json(const std::string& text);
void write_matrix_csv(std::ostream& os, const DivergenceReport& report);

}  // namespace dvfy::analysis
