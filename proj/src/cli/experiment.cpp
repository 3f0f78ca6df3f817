#include "dvfy/cli/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dvfy/analysis/metrics.hpp"
#include "dvfy/error.hpp"
#include "dvfy/numerics/rng.hpp"

namespace dvfy::cli {

namespace {

using diversify::Method;

std::string format_real(Real v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  require(ec == std::errc() && ptr == text.data() + text.size() && !text.empty(), ErrorKind::kConfig,
          key + ": cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  fail(ErrorKind::kConfig, key + ": expected true or false, got '" + text + "'");
}

std::string to_string(data::NormScope s) { return s == data::NormScope::kSample ? "sample" : "channel"; }

data::NormScope parse_scope(const std::string& key, const std::string& text) {
  if (text == "sample") return data::NormScope::kSample;
  if (text == "channel") return data::NormScope::kChannel;
  fail(ErrorKind::kConfig, key + ": expected sample or channel, got '" + text + "'");
}

std::string join_methods(const std::vector<Method>& ms) {
  std::string out;
  for (std::size_t i = 0; i < ms.size(); ++i) out += (i ? "," : "") + diversify::to_string(ms[i]);
  return out;
}

std::vector<Method> parse_methods(const std::string& key, const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(diversify::parse_method(trim(item)));
  require(!out.empty(), ErrorKind::kConfig, key + ": no methods given");
  return out;
}

struct Entry {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

// Field accessors for the common scalar kinds.
template <typename F>
Entry integer(std::string key, F field) {
  return {key, [field](const ExperimentConfig& c) { return std::to_string(field(c)); },
          [field, key](ExperimentConfig& c, const std::string& v) {
            auto& ref = field(c);
            ref = parse_number<std::remove_cvref_t<decltype(ref)>>(key, v);
          }};
}

template <typename F>
Entry real(std::string key, F field) {
  return {key, [field](const ExperimentConfig& c) { return format_real(field(c)); },
          [field, key](ExperimentConfig& c, const std::string& v) { field(c) = parse_number<Real>(key, v); }};
}

template <typename F>
Entry boolean(std::string key, F field) {
  return {key, [field](const ExperimentConfig& c) { return field(c) ? "true" : "false"; },
          [field, key](ExperimentConfig& c, const std::string& v) { field(c) = parse_bool(key, v); }};
}

// Wraps a library parser so its errors name the key and count as config errors.
template <typename P>
auto named(const std::string& key, P parse) {
  return [key, parse](const std::string& v) {
    try {
      return parse(v);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, key + ": " + e.message());
    }
  };
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
#define DV_FIELD(expr) [](auto& c) -> auto& { return c.expr; }
    e.push_back(integer("data.domains", DV_FIELD(data.domains)));
    e.push_back(integer("data.classes", DV_FIELD(data.classes)));
    e.push_back(integer("data.channels", DV_FIELD(data.channels)));
    e.push_back(integer("data.series_per_cell", DV_FIELD(data.series_per_cell)));
    e.push_back(integer("data.length", DV_FIELD(data.length)));
    e.push_back(integer("data.window", DV_FIELD(data.window)));
    e.push_back(integer("data.step", DV_FIELD(data.step)));
    e.push_back(real("data.offset_scale", DV_FIELD(data.offset_scale)));
    e.push_back(boolean("data.normalize", DV_FIELD(data.normalize)));
    e.push_back({"data.scope", [](const ExperimentConfig& c) { return to_string(c.data.scope); },
                 [](ExperimentConfig& c, const std::string& v) { c.data.scope = parse_scope("data.scope", v); }});
    e.push_back(integer("data.seed", DV_FIELD(data.seed)));

    e.push_back(integer("model.kernel_width", DV_FIELD(model.kernel_width)));
    e.push_back(integer("model.conv1_channels", DV_FIELD(model.conv1_channels)));
    e.push_back(integer("model.conv2_channels", DV_FIELD(model.conv2_channels)));
    e.push_back(integer("model.pool_kernel", DV_FIELD(model.pool_kernel)));
    e.push_back(integer("model.pool_stride", DV_FIELD(model.pool_stride)));
    e.push_back(integer("model.bottleneck_dim", DV_FIELD(model.bottleneck_dim)));
    e.push_back(integer("model.adversary_hidden", DV_FIELD(model.adversary_hidden)));
    e.push_back(integer("model.adversary_layers", DV_FIELD(model.adversary_layers)));
    e.push_back(real("model.bn_eps", DV_FIELD(model.bn_eps)));
    e.push_back(real("model.bn_momentum", DV_FIELD(model.bn_momentum)));

    e.push_back(integer("train.latent_domains", DV_FIELD(train.latent_domains)));
    e.push_back(real("train.lambda1", DV_FIELD(train.lambda1)));
    e.push_back(real("train.lambda2", DV_FIELD(train.lambda2)));
    e.push_back(real("train.learning_rate", DV_FIELD(train.learning_rate)));
    e.push_back(real("train.weight_decay", DV_FIELD(train.weight_decay)));
    e.push_back(boolean("train.decoupled_weight_decay", DV_FIELD(train.decoupled_weight_decay)));
    e.push_back(integer("train.rounds", DV_FIELD(train.rounds)));
    e.push_back(integer("train.local_epochs", DV_FIELD(train.local_epochs)));
    e.push_back(integer("train.batch_size", DV_FIELD(train.batch_size)));
    e.push_back(integer("train.max_epochs", DV_FIELD(train.max_epochs)));
    e.push_back({"train.distance", [](const ExperimentConfig& c) { return diversify::to_string(c.train.distance); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.distance = named("train.distance", diversify::parse_distance)(v);
                 }});
    e.push_back({"train.refresh", [](const ExperimentConfig& c) { return diversify::to_string(c.train.refresh); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.refresh = named("train.refresh", diversify::parse_refresh)(v);
                 }});
    e.push_back({"train.schedule", [](const ExperimentConfig& c) { return diversify::to_string(c.train.schedule); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.schedule = named("train.schedule", diversify::parse_schedule)(v);
                 }});
    e.push_back(boolean("train.reinit_step2_heads", DV_FIELD(train.reinit_step2_heads)));
    e.push_back(boolean("train.run_step3", DV_FIELD(train.run_step3)));
    e.push_back(boolean("train.run_step4", DV_FIELD(train.run_step4)));
    e.push_back(integer("train.seed", DV_FIELD(train.seed)));

    e.push_back(integer("analysis.probe_hidden", DV_FIELD(analysis.probe.hidden)));
    e.push_back(integer("analysis.probe_epochs", DV_FIELD(analysis.probe.epochs)));
    e.push_back(real("analysis.probe_learning_rate", DV_FIELD(analysis.probe.learning_rate)));
    e.push_back(integer("analysis.probe_batch_size", DV_FIELD(analysis.probe.batch_size)));
    e.push_back(integer("analysis.probe_repeats", DV_FIELD(analysis.probe.repeats)));
    e.push_back({"analysis.feature_space",
                 [](const ExperimentConfig& c) { return analysis::to_string(c.analysis.feature_space); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.analysis.feature_space = named("analysis.feature_space", analysis::parse_feature_space)(v);
                 }});

    e.push_back({"bench.experiment", [](const ExperimentConfig& c) { return c.bench.experiment; },
                 [](ExperimentConfig& c, const std::string& v) {
                   require(!v.empty() && v.find_first_of(",\n") == std::string::npos, ErrorKind::kConfig,
                           "bench.experiment: must be non-empty without commas");
                   c.bench.experiment = v;
                 }});
    e.push_back(integer("bench.seeds", DV_FIELD(bench.seeds)));
    e.push_back({"bench.methods", [](const ExperimentConfig& c) { return join_methods(c.bench.methods); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.bench.methods = named("bench.methods", [](const std::string& t) {
                     return parse_methods("bench.methods", t);
                   })(v);
                 }});
    e.push_back(integer("bench.k_min", DV_FIELD(bench.k_min)));
    e.push_back(integer("bench.k_max", DV_FIELD(bench.k_max)));
    e.push_back(integer("bench.threads", DV_FIELD(bench.threads)));
#undef DV_FIELD
    return e;
  }();
  return entries;
}

const Entry& entry(const std::string& key) {
  for (const auto& e : registry())
    if (e.key == key) return e;
  fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

std::string csv_real(const std::optional<Real>& v) { return v ? format_real(*v) : std::string(); }

}  // namespace

ExperimentConfig::ExperimentConfig() {
  model.bottleneck_dim = 64;
  model.adversary_hidden = 64;
  train.latent_domains = 3;
  train.lambda1 = 3.0;
  train.lambda2 = 0.1;
  train.learning_rate = 3e-3;
  train.rounds = 10;
  train.local_epochs = 3;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : registry()) out.push_back(e.key);
  return out;
}

std::string serialize(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& e : registry()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  entry(key).set(cfg, value);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos, ErrorKind::kConfig, "override '" + assignment + "' is not key=value");
  set_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  for (int n = 1; std::getline(is, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    require(line.find('=') != std::string::npos, ErrorKind::kConfig,
            "line " + std::to_string(n) + ": expected 'section.key = value'");
    apply_override(cfg, line);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kConfig, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

model::ArchConfig resolved_arch(const ExperimentConfig& cfg) {
  model::ArchConfig a = cfg.model;
  a.channels = cfg.data.channels;
  a.window = cfg.data.window;
  a.classes = cfg.data.classes;
  a.latent_domains = cfg.train.latent_domains;
  return a;
}

void validate(const ExperimentConfig& cfg) {
  data::validate(cfg.data);
  for (Method m : cfg.bench.methods) diversify::validate(cfg.train, m);
  require(cfg.model.kernel_width >= 1 && cfg.model.conv1_channels >= 1 && cfg.model.conv2_channels >= 1,
          ErrorKind::kConfig, "model widths must be positive");
  require(cfg.model.pool_kernel >= 1 && cfg.model.pool_stride >= 1, ErrorKind::kConfig,
          "model.pool_kernel and model.pool_stride must be positive");
  require(cfg.model.bottleneck_dim >= 1 && cfg.model.adversary_hidden >= 1 && cfg.model.adversary_layers >= 1,
          ErrorKind::kConfig, "model head widths must be positive");
  require(cfg.analysis.probe.epochs >= 1 && cfg.analysis.probe.repeats >= 1 && cfg.analysis.probe.batch_size >= 1,
          ErrorKind::kConfig, "analysis probe epochs, repeats and batch size must be positive");
  require(cfg.analysis.probe.learning_rate > 0.0, ErrorKind::kConfig, "analysis.probe_learning_rate must be positive");
  require(cfg.bench.seeds >= 1, ErrorKind::kConfig, "bench.seeds must be positive");
  require(cfg.bench.threads >= 1, ErrorKind::kConfig, "bench.threads must be positive");
  require((cfg.bench.k_min == 0 && cfg.bench.k_max == 0) || (cfg.bench.k_min >= 1 && cfg.bench.k_min <= cfg.bench.k_max),
          ErrorKind::kConfig, "bench.k_min..bench.k_max must be 0..0 or a non-empty range");
}

std::pair<int, int> parse_k_grid(const std::string& text) {
  const auto dots = text.find("..");
  require(dots != std::string::npos, ErrorKind::kConfig, "--k-grid: expected lo..hi, got '" + text + "'");
  const int lo = parse_number<int>("--k-grid", text.substr(0, dots));
  const int hi = parse_number<int>("--k-grid", text.substr(dots + 2));
  require(lo >= 1 && lo <= hi, ErrorKind::kConfig, "--k-grid: need 1 <= lo <= hi");
  return {lo, hi};
}

std::string results_header() {
  return "experiment,seed,method,held_out,k,round_val_accuracy,best_round,test_accuracy,ari,learned_div_mean,"
         "learned_div_max,random_div_mean,random_div_max,wall_clock_s";
}

void write_results_row(std::ostream& os, const ResultsRecord& r) {
  std::string rounds;
  for (std::size_t i = 0; i < r.round_val_accuracy.size(); ++i)
    rounds += (i ? ";" : "") + format_real(r.round_val_accuracy[i]);
  os << r.experiment << ',' << r.seed << ',' << diversify::to_string(r.method) << ',' << r.held_out << ','
     << r.latent_domains << ',' << rounds << ',' << r.best_round << ',' << format_real(r.test_accuracy) << ','
     << csv_real(r.ari) << ',' << csv_real(r.learned_div_mean) << ',' << csv_real(r.learned_div_max) << ','
     << csv_real(r.random_div_mean) << ',' << csv_real(r.random_div_max) << ','
     << format_real(std::round(r.wall_clock_seconds * 1000.0) / 1000.0) << '\n';
}

std::vector<int> permuted_split(std::span<const int> groups, std::uint64_t seed) {
  std::vector<int> out(groups.begin(), groups.end());
  Rng rng(seed);
  rng.shuffle(out.begin(), out.end());
  return out;
}

analysis::DivergenceReport split_divergence(const nn::Tensor& features, std::span<const int> groups, int k,
                                            const analysis::ProbeConfig& probe, std::uint64_t seed,
                                            const std::string& feature_space) {
  std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
  for (int g : groups) ++count[static_cast<std::size_t>(g)];
  // Compact away empty groups so the matrix only covers realized splits.
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  std::vector<std::string> names;
  for (int g = 0; g < k; ++g)
    if (count[static_cast<std::size_t>(g)] > 0) {
      remap[static_cast<std::size_t>(g)] = static_cast<int>(names.size());
      names.push_back("d" + std::to_string(g));
    }
  if (names.size() < 2) {
    analysis::DivergenceReport r;
    r.split_names = names;
    r.matrix.assign(names.size(), std::vector<Real>(names.size(), 0.0));
    r.val_error.assign(names.size(), std::vector<Real>(names.size(), 0.5));
    r.feature_space = feature_space;
    r.probe = analysis::describe(probe);
    r.seed = seed;
    return r;
  }
  std::vector<int> compact(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) compact[i] = remap[static_cast<std::size_t>(groups[i])];
  return analysis::pairwise_divergence_matrix(features, compact, names, probe, seed, feature_space);
}

namespace {

struct Cell {
  std::uint64_t seed;
  int held_out;
  Method method;
};

diversify::Trainer train_cell(Method method, const data::SegmentDataset& train, diversify::TrainConfig tc,
                              const ExperimentConfig& cfg, const std::vector<int>& domains) {
  if (method != Method::kDiversify || cfg.bench.k_min == 0)
    return diversify::train(method, train, tc, resolved_arch(cfg), domains);
  // K grid: keep the best validation accuracy, smallest K on ties.
  std::optional<diversify::Trainer> best;
  for (int k = cfg.bench.k_min; k <= cfg.bench.k_max; ++k) {
    tc.latent_domains = k;
    model::ArchConfig arch = resolved_arch(cfg);
    arch.latent_domains = k;
    auto t = diversify::train(method, train, tc, arch, domains);
    if (!best || t.best_val_accuracy() > best->best_val_accuracy()) best.emplace(std::move(t));
  }
  return std::move(*best);
}

ResultsRecord run_cell(const ExperimentConfig& cfg, const Cell& cell) {
  const auto t0 = std::chrono::steady_clock::now();
  data::SynthConfig sc = cfg.data;
  sc.seed = cell.seed;
  const data::SegmentDataset ds = data::generate_synthetic(sc);
  const std::vector<int> truth = ds.true_domains();
  std::vector<std::size_t> train_idx, test_idx;
  std::vector<int> domains;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (truth[i] == cell.held_out) {
      test_idx.push_back(i);
    } else {
      train_idx.push_back(i);
      domains.push_back(truth[i] < cell.held_out ? truth[i] : truth[i] - 1);
    }
  }
  const data::SegmentDataset train = ds.subset(train_idx), test = ds.subset(test_idx);
  diversify::TrainConfig tc = cfg.train;
  tc.seed = cell.seed;
  diversify::Trainer trainer = train_cell(cell.method, train, tc, cfg, domains);

  ResultsRecord r;
  r.experiment = cfg.bench.experiment;
  r.seed = cell.seed;
  r.method = cell.method;
  r.held_out = cell.held_out;
  r.latent_domains = trainer.model().arch().latent_domains;
  r.round_val_accuracy = trainer.round_val_accuracy();
  r.best_round = trainer.best_round();
  const auto pred = trainer.best_model().predict(test.all());
  r.test_accuracy = analysis::accuracy(pred.labels, test.labels());
  if (cell.method == Method::kDiversify) {
    const auto& ts = trainer.train_set();
    const std::vector<int> d = ts.pseudo_domains();
    r.ari = analysis::adjusted_rand_index(d, ts.true_domains());
    const nn::Tensor features = analysis::feature_matrix(ts, cfg.analysis.feature_space, &trainer.model());
    const std::string space = analysis::to_string(cfg.analysis.feature_space);
    const std::uint64_t div_seed = derive_seed(cell.seed, "divergence");
    const auto learned = split_divergence(features, d, ts.latent_domains(), cfg.analysis.probe, div_seed, space);
    const auto random = split_divergence(features, permuted_split(d, derive_seed(cell.seed, "random_split")),
                                         ts.latent_domains(), cfg.analysis.probe, div_seed, space);
    r.learned_div_mean = learned.mean_off_diagonal;
    r.learned_div_max = learned.max_off_diagonal;
    r.random_div_mean = random.mean_off_diagonal;
    r.random_div_max = random.max_off_diagonal;
  }
  r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

std::vector<ResultsRecord> run_bench(const ExperimentConfig& cfg,
                                     const std::function<void(const ResultsRecord&)>& on_record) {
  validate(cfg);
  std::vector<Cell> cells;
  for (int s = 1; s <= cfg.bench.seeds; ++s)
    for (int h = 0; h < cfg.data.domains; ++h)
      for (Method m : cfg.bench.methods) cells.push_back({static_cast<std::uint64_t>(s), h, m});

  std::vector<std::optional<ResultsRecord>> out(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cells.size();) {
      try {
        ResultsRecord r = run_cell(cfg, cells[i]);
        std::lock_guard lock(mu);
        if (on_record) on_record(r);
        out[i] = std::move(r);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = cells.size();
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.bench.threads), cells.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<ResultsRecord> records;
  for (auto& r : out) records.push_back(std::move(*r));
  return records;
}

std::vector<MethodSummary> summarize(const std::vector<ResultsRecord>& records) {
  std::vector<MethodSummary> out;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const MethodSummary& s) { return s.method == r.method; });
    if (it == out.end()) it = out.insert(out.end(), MethodSummary{r.method, 0, 0.0, {}, {}, {}});
    auto add = [&](std::optional<Real>& acc, const std::optional<Real>& v) {
      if (v) acc = acc.value_or(0.0) + *v;
    };
    ++it->runs;
    it->mean_test_accuracy += r.test_accuracy;
    add(it->mean_ari, r.ari);
    add(it->mean_learned_div, r.learned_div_mean);
    add(it->mean_random_div, r.random_div_mean);
  }
  for (auto& s : out) {
    const auto n = static_cast<Real>(s.runs);
    s.mean_test_accuracy /= n;
    for (auto* v : {&s.mean_ari, &s.mean_learned_div, &s.mean_random_div})
      if (*v) **v /= n;
  }
  return out;
}

std::string format_summary(const MethodSummary& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "summary method=%s runs=%zu mean_ood_accuracy=%.4f",
                diversify::to_string(s.method).c_str(), s.runs, s.mean_test_accuracy);
  std::string out = buf;
  auto opt = [&](const char* name, const std::optional<Real>& v) {
    if (!v) return;
    std::snprintf(buf, sizeof buf, " %s=%.4f", name, *v);
    out += buf;
  };
  opt("mean_ari", s.mean_ari);
  opt("mean_learned_div", s.mean_learned_div);
  opt("mean_random_div", s.mean_random_div);
  return out;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kNumeric:
      return 4;
    default:
      return 3;
  }
}

}  // namespace dvfy::cli
