#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dvfy/analysis/divergence.hpp"
#include "dvfy/dataio/synth.hpp"
#include "dvfy/diversify/trainer.hpp"
#include "dvfy/error.hpp"

namespace dvfy::cli {

using nn::Real;

struct AnalysisConfig {
  analysis::ProbeConfig probe;
  analysis::FeatureSpace feature_space = analysis::FeatureSpace::kRaw;

  bool operator==(const AnalysisConfig&) const = default;
};

struct BenchConfig {
  std::string experiment = "synthetic";
  int seeds = 3;                      // master seeds 1..seeds
  std::vector<diversify::Method> methods{diversify::Method::kDiversify, diversify::Method::kErm,
                                         diversify::Method::kDann};
  int k_min = 0;                      // K grid for DIVERSIFY; 0 pins K to train.latent_domains
  int k_max = 0;
  int threads = 1;

  bool operator==(const BenchConfig&) const = default;
};

/// Everything a subcommand needs. Defaults are the shipped synthetic
/// benchmark; channels, window, classes and K of the architecture follow the
/// data and train sections.
struct ExperimentConfig {
  data::SynthConfig data;
  model::ArchConfig model;
  diversify::TrainConfig train;
  AnalysisConfig analysis;
  BenchConfig bench;

  ExperimentConfig();
  bool operator==(const ExperimentConfig&) const = default;
};

/// `section.key = value` per line, every key, in a fixed order.
std::string serialize(const ExperimentConfig& cfg);
/// Starts from defaults; `#` starts a comment, blank lines are skipped.
/// Unknown keys and malformed values throw kConfig naming the key or line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies one `section.key=value` override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();
/// Runs every validator; throws kConfig.
void validate(const ExperimentConfig& cfg);

/// Arch with channels/window/classes/K taken from the other sections.
model::ArchConfig resolved_arch(const ExperimentConfig& cfg);

/// "lo..hi" -> {lo, hi}; throws kConfig.
std::pair<int, int> parse_k_grid(const std::string& text);

struct ResultsRecord {
  std::string experiment;
  std::uint64_t seed = 0;
  diversify::Method method = diversify::Method::kDiversify;
  int held_out = 0;
  int latent_domains = 0;
  std::vector<Real> round_val_accuracy;
  int best_round = 0;
  Real test_accuracy = 0.0;
  std::optional<Real> ari;                  // DIVERSIFY only: final d' vs true domains
  std::optional<Real> learned_div_mean;     // DIVERSIFY only: pairwise divergence over d'
  std::optional<Real> learned_div_max;
  std::optional<Real> random_div_mean;      // same data, d' randomly permuted
  std::optional<Real> random_div_max;
  Real wall_clock_seconds = 0.0;
};

std::string results_header();
void write_results_row(std::ostream& os, const ResultsRecord& r);

struct MethodSummary {
  diversify::Method method;
  std::size_t runs = 0;
  Real mean_test_accuracy = 0.0;
  std::optional<Real> mean_ari;
  std::optional<Real> mean_learned_div;
  std::optional<Real> mean_random_div;
};

std::vector<MethodSummary> summarize(const std::vector<ResultsRecord>& records);
std::string format_summary(const MethodSummary& s);

/// Leave-one-domain-out study: for each seed 1..bench.seeds (data and train
/// seeds set to it) and each held-out domain, trains every method on the other
/// domains and scores the held-out one. Records come back in
/// (seed, held-out, method) order regardless of thread count. `on_record` is
/// called as cells finish (any order).
std::vector<ResultsRecord> run_bench(const ExperimentConfig& cfg,
                                     const std::function<void(const ResultsRecord&)>& on_record = {});

/// Pairwise divergence over the non-empty groups of `groups`; a single
/// non-empty group yields zeros.
analysis::DivergenceReport split_divergence(const nn::Tensor& features, std::span<const int> groups, int k,
                                            const analysis::ProbeConfig& probe, std::uint64_t seed,
                                            const std::string& feature_space);

/// `groups` shuffled with the seed: same cluster sizes, no structure.
std::vector<int> permuted_split(std::span<const int> groups, std::uint64_t seed);

/// Process exit code for an error kind: config 2, numeric 4, everything else 3.
int exit_code(ErrorKind kind);

}  // namespace dvfy::cli
