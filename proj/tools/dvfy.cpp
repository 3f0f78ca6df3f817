#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dvfy/analysis/metrics.hpp"
#include "dvfy/cli/experiment.hpp"
#include "dvfy/dataio/io.hpp"
#include "dvfy/model/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace dvfy;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "Config file of 'section.key = value' lines");
  cmd->add_option("--seed", c.seed, "Master seed (sets data.seed and train.seed)");
  auto* out = cmd->add_option("--out", c.out, "Output path");
  if (out_required) out->required();
  cmd->add_flag("--force", c.force, "Overwrite existing outputs");
  cmd->add_option("overrides", c.overrides, "section.key=value overrides");
}

cli::ExperimentConfig resolve(const Common& c) {
  cli::ExperimentConfig cfg = c.config.empty() ? cli::ExperimentConfig{} : cli::load_config(c.config);
  for (const auto& o : c.overrides) cli::apply_override(cfg, o);
  if (c.seed) {
    cfg.data.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  return cfg;
}

void check_writable(const std::string& path, bool force) {
  require(force || !fs::exists(path), ErrorKind::kIo, path + " exists (use --force to overwrite)");
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream os(path, std::ios::binary | std::ios::out | mode);
  require(static_cast<bool>(os), ErrorKind::kIo, "cannot write " + path);
  return os;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    open_out(path) << text;
  }
}

// The trained predictor plus what characterize needs to redo step 3.
struct Saved {
  model::ModelBundle model;
  diversify::Method method;
  diversify::Distance distance;
};

void save_model(const std::string& path, model::ModelBundle& m, diversify::Method method, diversify::Distance d) {
  model::CheckpointFile f;
  model::encode_bundle(f, m);
  f.set("method", diversify::to_string(method));
  f.set("train.distance", diversify::to_string(d));
  model::write_checkpoint_file(path, f);
}

Saved load_model(const std::string& path) {
  const auto f = model::read_checkpoint_file(path);
  return {model::decode_bundle(f), diversify::parse_method(f.get("method")),
          diversify::parse_distance(f.get("train.distance"))};
}

data::SegmentDataset load_nonempty(const std::string& path) {
  auto ds = data::load_dataset(path);
  require(!ds.empty(), ErrorKind::kInput, path + " holds no segments");
  return ds;
}

// "true" uses the dataset's ground truth (compacted to 0..n-1); anything else
// is a file with one integer per line.
std::vector<int> domain_labels(const std::string& source, const data::SegmentDataset& ds) {
  std::vector<int> labels;
  if (source == "true") {
    require(ds.has_true_domains(), ErrorKind::kInput, "dataset has no true domains for --domain-labels true");
    labels = ds.true_domains();
  } else {
    std::ifstream in(source);
    require(static_cast<bool>(in), ErrorKind::kIo, "cannot read " + source);
    int n = 0;
    for (std::string line; std::getline(in, line);) {
      ++n;
      if (line.empty()) continue;
      int v = 0;
      auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
      require(ec == std::errc() && ptr == line.data() + line.size(), ErrorKind::kParse,
              source + " line " + std::to_string(n) + ": not an integer");
      labels.push_back(v);
    }
    require(labels.size() == ds.size(), ErrorKind::kInput,
            source + ": expected " + std::to_string(ds.size()) + " labels, got " + std::to_string(labels.size()));
  }
  std::set<int> distinct(labels.begin(), labels.end());
  std::map<int, int> index;
  for (int v : distinct) index.emplace(v, static_cast<int>(index.size()));
  for (int& v : labels) v = index.at(v);
  return labels;
}

model::ArchConfig arch_for(const cli::ExperimentConfig& cfg, const data::SegmentDataset& ds) {
  model::ArchConfig a = cli::resolved_arch(cfg);
  a.channels = ds.channels();
  a.window = ds.window();
  a.classes = ds.classes();
  return a;
}

int cmd_synth(const Common& c, bool binary) {
  const auto cfg = resolve(c);
  data::validate(cfg.data);
  check_writable(c.out, c.force);
  data::save_dataset(c.out, data::generate_synthetic(cfg.data),
                     binary ? data::DatasetEncoding::kBinary : data::DatasetEncoding::kText);
  return 0;
}

int cmd_train(const Common& c, const std::string& data_path, const std::string& method_name,
              const std::string& history, const std::string& labels_source) {
  const auto cfg = resolve(c);
  const auto method = diversify::parse_method(method_name);
  diversify::validate(cfg.train, method);
  require(method != diversify::Method::kDann || !labels_source.empty(), ErrorKind::kConfig,
          "method dann needs --domain-labels (true or a label file)");
  const std::string history_path = history.empty() ? c.out + ".history.csv" : history;
  check_writable(c.out, c.force);
  check_writable(history_path, c.force);
  const auto ds = load_nonempty(data_path);
  std::vector<int> domains;
  if (method == diversify::Method::kDann) domains = domain_labels(labels_source, ds);
  auto trainer = diversify::train(method, ds, cfg.train, arch_for(cfg, ds), domains);
  save_model(c.out, trainer.best_model(), method, cfg.train.distance);
  auto os = open_out(history_path);
  diversify::write_history_csv(os, trainer.history());
  std::cout << "best_round=" << trainer.best_round() << " val_accuracy=" << trainer.best_val_accuracy() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& ckpt, const std::string& data_path) {
  if (!c.out.empty()) check_writable(c.out, c.force);
  auto saved = load_model(ckpt);
  const auto ds = load_nonempty(data_path);
  const auto pred = saved.model.predict(ds.all());
  const auto y = ds.labels();
  json j;
  j["checkpoint"] = ckpt;
  j["method"] = diversify::to_string(saved.method);
  j["segments"] = y.size();
  j["accuracy"] = analysis::accuracy(pred.labels, y);
  json per_class = json::array();
  for (int k = 0; k < ds.classes(); ++k) {
    std::size_t n = 0, correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == k) {
        ++n;
        correct += pred.labels[i] == k ? 1 : 0;
      }
    json row;
    row["class"] = k;
    row["segments"] = n;
    row["correct"] = correct;
    row["accuracy"] = n ? json(static_cast<double>(correct) / static_cast<double>(n)) : json(nullptr);
    per_class.push_back(row);
  }
  j["per_class"] = per_class;
  emit(c.out, j.dump(2) + "\n");
  return 0;
}

int cmd_characterize(const Common& c, const std::string& ckpt, const std::string& data_path) {
  check_writable(c.out, c.force);
  auto saved = load_model(ckpt);
  const auto ds = load_nonempty(data_path);
  const int k = saved.model.arch().latent_domains;
  const auto ref = diversify::characterize(saved.model, saved.model.backbone_features(ds.all()), k, saved.distance);
  auto os = open_out(c.out);
  os << "id,pseudo_domain\n";
  for (std::size_t i = 0; i < ds.size(); ++i) os << ds[i].id << ',' << ref.labels[i] << '\n';
  json j;
  j["latent_domains"] = k;
  j["segments"] = ds.size();
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int d : ref.labels) ++sizes[static_cast<std::size_t>(d)];
  j["cluster_sizes"] = sizes;
  if (ds.has_true_domains()) j["ari"] = analysis::adjusted_rand_index(ref.labels, ds.true_domains());
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_divergence(const Common& c, const std::string& data_path, const std::string& split,
                   const std::string& ckpt, const std::string& space_name, int k_random) {
  const auto cfg = resolve(c);
  const std::string json_path = c.out.empty() ? "" : c.out + ".json", csv_path = c.out.empty() ? "" : c.out + ".csv";
  if (!c.out.empty()) {
    check_writable(json_path, c.force);
    check_writable(csv_path, c.force);
  }
  const auto ds = load_nonempty(data_path);
  const auto space = space_name.empty() ? cfg.analysis.feature_space : analysis::parse_feature_space(space_name);
  std::optional<Saved> saved;
  if (!ckpt.empty()) saved = load_model(ckpt);
  require(saved || (space == analysis::FeatureSpace::kRaw && split != "learned"), ErrorKind::kConfig,
          "--checkpoint is required for learned splits and step3/step4 features");

  std::vector<int> groups;
  int k = 0;
  if (split == "true") {
    groups = domain_labels("true", ds);
    k = *std::max_element(groups.begin(), groups.end()) + 1;
  } else if (split == "learned") {
    k = saved->model.arch().latent_domains;
    groups = diversify::characterize(saved->model, saved->model.backbone_features(ds.all()), k, saved->distance).labels;
  } else if (split == "random") {
    k = k_random > 0 ? k_random : cfg.train.latent_domains;
    Rng rng(derive_seed(cfg.train.seed, "random_split"));
    for (std::size_t i = 0; i < ds.size(); ++i) groups.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(k))));
  } else {
    groups = domain_labels(split, ds);
    k = *std::max_element(groups.begin(), groups.end()) + 1;
  }
  const auto features = analysis::feature_matrix(ds, space, saved ? &saved->model : nullptr);
  const auto report = cli::split_divergence(features, groups, k, cfg.analysis.probe,
                                            derive_seed(cfg.train.seed, "divergence"), analysis::to_string(space));
  if (c.out.empty()) {
    std::cout << analysis::to_json(report) << "\n";
  } else {
    emit(json_path, analysis::to_json(report) + "\n");
    auto os = open_out(csv_path);
    analysis::write_matrix_csv(os, report);
  }
  return 0;
}

int cmd_bench(const Common& c, const std::string& k_grid, bool verbose) {
  auto cfg = resolve(c);
  if (!k_grid.empty()) std::tie(cfg.bench.k_min, cfg.bench.k_max) = cli::parse_k_grid(k_grid);
  cli::validate(cfg);
  std::ofstream file;
  std::ostream* rows = &std::cout;
  if (!c.out.empty()) {
    // Results are append-only: a new file gets a header, an existing one must share it.
    const bool fresh = c.force || !fs::exists(c.out) || fs::file_size(c.out) == 0;
    if (!fresh) {
      std::ifstream in(c.out);
      std::string header;
      std::getline(in, header);
      require(header == cli::results_header(), ErrorKind::kInput, c.out + " has a different results header");
    }
    file = open_out(c.out, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) file << cli::results_header() << '\n';
    rows = &file;
  } else {
    std::cout << cli::results_header() << '\n';
  }
  const auto records = cli::run_bench(cfg, [&](const cli::ResultsRecord& r) {
    if (verbose)
      std::fprintf(stderr, "done seed=%llu held_out=%d method=%s acc=%.4f %.1fs\n",
                   static_cast<unsigned long long>(r.seed), r.held_out, diversify::to_string(r.method).c_str(),
                   r.test_accuracy, r.wall_clock_seconds);
  });
  for (const auto& r : records) cli::write_results_row(*rows, r);
  rows->flush();
  for (const auto& s : cli::summarize(records)) std::cout << cli::format_summary(s) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DIVERSIFY: latent-domain min-max training for out-of-distribution time series"};
  app.require_subcommand(1);
  app.footer("Config keys and defaults (section.key = value):\n" + cli::serialize(cli::ExperimentConfig{}));

  Common c;
  bool binary = false, verbose = false;
  std::string data_path, method = "diversify", history, labels, ckpt, split = "true", space, k_grid;
  int k_random = 0;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic multi-domain dataset");
  add_common(synth, c, true);
  synth->add_flag("--binary", binary, "Write float32 records instead of text");

  auto* train = app.add_subcommand("train", "Train DIVERSIFY or a baseline; writes checkpoint and history CSV");
  add_common(train, c, true);
  train->add_option("--data", data_path, "Dataset file")->required();
  train->add_option("--method", method, "diversify | erm | dann")->capture_default_str();
  train->add_option("--history", history, "History CSV (default <out>.history.csv)");
  train->add_option("--domain-labels", labels, "DANN domain labels: 'true' or a file with one integer per line");

  auto* eval = app.add_subcommand("eval", "Accuracy and per-class breakdown as JSON");
  add_common(eval, c, false);
  eval->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  eval->add_option("--data", data_path, "Dataset file")->required();

  auto* charac = app.add_subcommand("characterize", "Per-segment pseudo domains (CSV) and ARI when known");
  add_common(charac, c, true);
  charac->add_option("--checkpoint", ckpt, "Model checkpoint")->required();
  charac->add_option("--data", data_path, "Dataset file")->required();

  auto* div = app.add_subcommand("divergence", "Pairwise proxy H-divergence between splits");
  add_common(div, c, false);
  div->add_option("--data", data_path, "Dataset file")->required();
  div->add_option("--split", split, "true | learned | random | label file")->capture_default_str();
  div->add_option("--checkpoint", ckpt, "Model checkpoint (learned splits, step3/step4 features)");
  div->add_option("--feature-space", space, "raw | step3 | step4 (default analysis.feature_space)");
  div->add_option("--k", k_random, "Group count for random splits (default train.latent_domains)");

  auto* bench = app.add_subcommand("bench", "Leave-one-domain-out synthetic study over all methods");
  add_common(bench, c, false);
  bench->add_option("--k-grid", k_grid, "DIVERSIFY K search range lo..hi (best validation K per run)");
  bench->add_flag("--verbose", verbose, "Progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::fprintf(stderr, "error kind=config code=2: %s\n", msg.c_str());
    return 2;
  }

  try {
    if (*synth) return cmd_synth(c, binary);
    if (*train) return cmd_train(c, data_path, method, history, labels);
    if (*eval) return cmd_eval(c, ckpt, data_path);
    if (*charac) return cmd_characterize(c, ckpt, data_path);
    if (*div) return cmd_divergence(c, data_path, split, ckpt, space, k_random);
    if (*bench) return cmd_bench(c, k_grid, verbose);
  } catch (const Error& e) {
    std::string msg = e.message();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    // "io error" -> "io": one token for the machine-readable part.
    std::string kind(to_string(e.kind()));
    kind = kind.substr(0, kind.find(' '));
    const int code = cli::exit_code(e.kind());
    std::fprintf(stderr, "error kind=%s code=%d: %s\n", kind.c_str(), code, msg.c_str());
    return code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error kind=io code=3: %s\n", e.what());
    return 3;
  }
  return 0;
}
