#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dvfy/dataio/dataset.hpp"
#include "dvfy/diversify/pseudo_label.hpp"
#include "dvfy/model/bundle.hpp"
#include "dvfy/numerics/adam.hpp"
#include "dvfy/numerics/rng.hpp"

namespace dvfy::diversify {

enum class Method { kDiversify, kErm, kDann };
enum class RefreshPolicy { kEveryEpoch, kOncePerRound };
enum class LambdaSchedule { kConstant, kRamp };

std::string to_string(Method m);
Method parse_method(const std::string& text);
std::string to_string(RefreshPolicy p);
RefreshPolicy parse_refresh(const std::string& text);
std::string to_string(LambdaSchedule s);
LambdaSchedule parse_schedule(const std::string& text);

struct TrainConfig {
  int latent_domains = 3;  // K
  Real lambda1 = 0.1;      // GRL weight on the step-3 class adversary
  Real lambda2 = 0.1;      // GRL weight on the step-4 domain adversary
  Real learning_rate = 1e-2;
  Real weight_decay = 5e-4;
  bool decoupled_weight_decay = false;
  int rounds = 5;
  int local_epochs = 3;
  std::size_t batch_size = 32;
  int max_epochs = 150;
  Distance distance = Distance::kCosine;
  RefreshPolicy refresh = RefreshPolicy::kEveryEpoch;
  LambdaSchedule schedule = LambdaSchedule::kConstant;
  bool reinit_step2_heads = false;
  bool run_step3 = true;
  bool run_step4 = true;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

/// Throws kConfig naming the offending field.
void validate(const TrainConfig& cfg, Method method);

/// s = d' * C + y.
int domain_class_label(int pseudo_domain, int label, int classes, int latent_domains);
/// Inverse of domain_class_label: {d', y}.
std::pair<int, int> split_domain_class_label(int s, int classes);

/// One line of the training history. Losses that a step does not compute are
/// NaN and serialize as empty CSV fields.
struct HistoryRow {
  int round = 0;
  int step = 0;
  int epoch = 0;
  Real l_super = NAN;
  Real l_self = NAN;
  Real l_cls = NAN;
  Real l_dom = NAN;
  Real val_accuracy = NAN;  // set on the row that closes a round
  std::optional<std::size_t> label_changes;
  std::vector<std::size_t> cluster_sizes;
};

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows);

/// Round-based trainer for DIVERSIFY and the ERM / DANN baselines. Owns the
/// model, one Adam state per step, and independent shuffle streams for each
/// step so that disabling steps never perturbs the others.
///
/// DIVERSIFY round: step 2 (h_f + step-2 heads on s = d'C + y), step 3
/// (pseudo-label refresh and step-3 heads, h_f frozen), step 4 (step-4 heads,
/// h_f frozen), then validation through the step-4 heads.
/// ERM: step-2 style updates on class labels with K = 1; predicts through the
/// step-2 heads. DANN: h_f + step-4 heads with a domain adversary on the
/// supplied domain labels.
class Trainer {
 public:
  /// `train` carries d' and (for DANN) nothing else; DANN domain labels come in
  /// `domain_labels`, one per training segment.
  Trainer(Method method, const TrainConfig& cfg, const model::ArchConfig& arch, data::SegmentDataset train,
          data::SegmentDataset val, std::vector<int> domain_labels = {});

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;
  Trainer(Trainer&&) = default;
  Trainer& operator=(Trainer&&) = default;

  void run_round();
  /// Runs the remaining rounds.
  void run();
  bool finished() const { return round_ >= cfg_.rounds; }
  int rounds_done() const { return round_; }

  Method method() const { return method_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<HistoryRow>& history() const { return history_; }
  const data::SegmentDataset& train_set() const { return train_; }
  const data::SegmentDataset& val_set() const { return val_; }
  model::ModelBundle& model() { return *model_; }
  /// Highest-validation-accuracy snapshot; earliest round wins ties.
  model::ModelBundle& best_model();
  Real best_val_accuracy() const { return best_val_; }
  int best_round() const { return best_round_; }
  const std::vector<Real>& round_val_accuracy() const { return round_val_; }

  // Individual steps, exposed for tests and diagnostics.
  void step2_feature_update();
  void step3_characterize();
  void step4_invariant_train();
  /// Soft centroids, assignment and refinement on the current step-3 features;
  /// updates the centroid table and returns the refinement (d' is left to the caller).
  Refinement refresh_pseudo_labels();
  /// Overrides d' (e.g. a warm start); values must lie in [0, K).
  void set_pseudo_domains(std::span<const int> labels) { train_.set_pseudo_domains(labels); }
  /// h_f(x) for the training set in eval mode.
  Tensor backbone_cache();

  /// Full training state: model, optimizers, RNG streams, d', best snapshot.
  void save(const std::filesystem::path& path);
  static Trainer load(const std::filesystem::path& path, data::SegmentDataset train, data::SegmentDataset val,
                      std::vector<int> domain_labels = {});

 private:
  Trainer() = default;
  void init_optimizers();
  void run_round_steps();
  Real lambda_scale() const;
  void record_validation();
  Tensor& cached_backbone();

  Method method_ = Method::kDiversify;
  TrainConfig cfg_;
  data::SegmentDataset train_;
  data::SegmentDataset val_;
  std::vector<int> domain_labels_;
  std::unique_ptr<model::ModelBundle> model_;
  std::unique_ptr<model::ModelBundle> best_;
  nn::Adam opt2_;
  nn::Adam opt3_;
  nn::Adam opt4_;
  Rng shuffle2_;
  Rng shuffle3_;
  Rng shuffle4_;
  int round_ = 0;
  Real best_val_ = -1.0;
  int best_round_ = -1;
  std::vector<Real> round_val_;
  std::vector<HistoryRow> history_;
  std::optional<Tensor> backbone_cache_;
};

/// Pseudo domains for precomputed h_f features: soft centroids weighted by the
/// step-3 classifier's softmax, nearest-centroid assignment, one refinement.
Refinement characterize(model::ModelBundle& model, const Tensor& backbone_features, int latent_domains,
                        Distance metric);

/// Arch used by a method: ERM pins K = 1, DANN sets K to the number of domains.
model::ArchConfig method_arch(Method method, model::ArchConfig arch, const TrainConfig& cfg,
                              std::span<const int> domain_labels);

/// Fixed-seed 8:2 split, train, and return the trainer.
Trainer train(Method method, const data::SegmentDataset& dataset, const TrainConfig& cfg,
              const model::ArchConfig& arch, std::vector<int> domain_labels = {});

}  // namespace dvfy::diversify
