#include "dvfy/diversify/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "dvfy/analysis/metrics.hpp"
#include "dvfy/error.hpp"
#include "dvfy/model/checkpoint.hpp"
#include "dvfy/numerics/ops.hpp"

namespace dvfy::diversify {

namespace {

using model::ModelBundle;
using nn::Mode;
using nn::Tape;
using nn::Var;

std::string format_real(Real v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  require(ec == std::errc() && ptr == text.data() + text.size(), ErrorKind::kParse,
          "checkpoint key '" + key + "' has malformed value '" + text + "'");
  return value;
}

// Shuffled mini-batches; a trailing batch of one joins the previous batch so
// batch-norm always sees at least two samples.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows) {
  const std::size_t cols = m.dim(1);
  std::vector<Real> out(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy_n(m.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  return Tensor({rows.size(), cols}, std::move(out));
}

std::vector<int> gather(std::span<const int> v, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

Real checked(Real loss, int round, int step, int epoch) {
  require(std::isfinite(loss), ErrorKind::kNumeric,
          "non-finite loss at round " + std::to_string(round) + " step " + std::to_string(step) + " epoch " +
              std::to_string(epoch));
  return loss;
}

std::vector<std::size_t> cluster_sizes(std::span<const int> labels, int k) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

void encode_config(model::CheckpointFile& f, const TrainConfig& c) {
  f.set("train.latent_domains", std::to_string(c.latent_domains));
  f.set("train.lambda1", format_real(c.lambda1));
  f.set("train.lambda2", format_real(c.lambda2));
  f.set("train.learning_rate", format_real(c.learning_rate));
  f.set("train.weight_decay", format_real(c.weight_decay));
  f.set("train.decoupled_weight_decay", c.decoupled_weight_decay ? "1" : "0");
  f.set("train.rounds", std::to_string(c.rounds));
  f.set("train.local_epochs", std::to_string(c.local_epochs));
  f.set("train.batch_size", std::to_string(c.batch_size));
  f.set("train.max_epochs", std::to_string(c.max_epochs));
  f.set("train.distance", to_string(c.distance));
  f.set("train.refresh", to_string(c.refresh));
  f.set("train.schedule", to_string(c.schedule));
  f.set("train.reinit_step2_heads", c.reinit_step2_heads ? "1" : "0");
  f.set("train.run_step3", c.run_step3 ? "1" : "0");
  f.set("train.run_step4", c.run_step4 ? "1" : "0");
  f.set("train.seed", std::to_string(c.seed));
}

TrainConfig decode_config(const model::CheckpointFile& f) {
  TrainConfig c;
  auto i = [&](const char* key) { return parse_value<int>(key, f.get(key)); };
  auto r = [&](const char* key) { return parse_value<Real>(key, f.get(key)); };
  c.latent_domains = i("train.latent_domains");
  c.lambda1 = r("train.lambda1");
  c.lambda2 = r("train.lambda2");
  c.learning_rate = r("train.learning_rate");
  c.weight_decay = r("train.weight_decay");
  c.decoupled_weight_decay = i("train.decoupled_weight_decay") != 0;
  c.rounds = i("train.rounds");
  c.local_epochs = i("train.local_epochs");
  c.batch_size = parse_value<std::size_t>("train.batch_size", f.get("train.batch_size"));
  c.max_epochs = i("train.max_epochs");
  c.distance = parse_distance(f.get("train.distance"));
  c.refresh = parse_refresh(f.get("train.refresh"));
  c.schedule = parse_schedule(f.get("train.schedule"));
  c.reinit_step2_heads = i("train.reinit_step2_heads") != 0;
  c.run_step3 = i("train.run_step3") != 0;
  c.run_step4 = i("train.run_step4") != 0;
  c.seed = parse_value<std::uint64_t>("train.seed", f.get("train.seed"));
  return c;
}

void encode_optimizer(model::CheckpointFile& f, const std::string& name, const nn::Adam& opt) {
  f.set(name + ".steps", std::to_string(opt.step_count()));
  for (std::size_t k = 0; k < opt.params().size(); ++k) {
    f.add_blob(name + ".m." + opt.params()[k]->name, opt.first_moments()[k].values());
    f.add_blob(name + ".v." + opt.params()[k]->name, opt.second_moments()[k].values());
  }
}

void decode_optimizer(const model::CheckpointFile& f, const std::string& name, nn::Adam& opt) {
  opt.set_step_count(parse_value<std::uint64_t>(name + ".steps", f.get(name + ".steps")));
  for (std::size_t k = 0; k < opt.params().size(); ++k) {
    for (auto* moments : {&opt.first_moments(), &opt.second_moments()}) {
      const std::string tag = moments == &opt.first_moments() ? ".m." : ".v.";
      const auto& blob = f.blob(name + tag + opt.params()[k]->name);
      Tensor& dst = (*moments)[k];
      require(blob.values.size() == dst.size(), ErrorKind::kShape, "optimizer blob '" + blob.name + "' has wrong size");
      dst = Tensor(dst.shape(), blob.values);
    }
  }
}

std::vector<Real> to_reals(std::span<const int> v) { return std::vector<Real>(v.begin(), v.end()); }

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::kDiversify: return "diversify";
    case Method::kErm: return "erm";
    case Method::kDann: return "dann";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  if (text == "diversify") return Method::kDiversify;
  if (text == "erm") return Method::kErm;
  if (text == "dann") return Method::kDann;
  fail(ErrorKind::kConfig, "unknown method '" + text + "' (diversify|erm|dann)");
}

std::string to_string(RefreshPolicy p) { return p == RefreshPolicy::kEveryEpoch ? "every_epoch" : "once_per_round"; }

RefreshPolicy parse_refresh(const std::string& text) {
  if (text == "every_epoch") return RefreshPolicy::kEveryEpoch;
  if (text == "once_per_round") return RefreshPolicy::kOncePerRound;
  fail(ErrorKind::kConfig, "unknown refresh policy '" + text + "' (every_epoch|once_per_round)");
}

std::string to_string(LambdaSchedule s) { return s == LambdaSchedule::kConstant ? "constant" : "ramp"; }

LambdaSchedule parse_schedule(const std::string& text) {
  if (text == "constant") return LambdaSchedule::kConstant;
  if (text == "ramp") return LambdaSchedule::kRamp;
  fail(ErrorKind::kConfig, "unknown lambda schedule '" + text + "' (constant|ramp)");
}

void validate(const TrainConfig& cfg, Method method) {
  require(cfg.latent_domains >= 1, ErrorKind::kConfig, "train.latent_domains must be at least 1");
  require(cfg.lambda1 >= 0.0, ErrorKind::kConfig, "train.lambda1 must be non-negative");
  require(cfg.lambda2 >= 0.0, ErrorKind::kConfig, "train.lambda2 must be non-negative");
  require(cfg.learning_rate > 0.0, ErrorKind::kConfig, "train.learning_rate must be positive");
  require(cfg.weight_decay >= 0.0, ErrorKind::kConfig, "train.weight_decay must be non-negative");
  require(cfg.rounds >= 1, ErrorKind::kConfig, "train.rounds must be at least 1");
  require(cfg.local_epochs >= 1, ErrorKind::kConfig, "train.local_epochs must be at least 1");
  require(cfg.batch_size >= 2, ErrorKind::kConfig, "train.batch_size must be at least 2");
  const int steps = method == Method::kDiversify ? 1 + (cfg.run_step3 ? 1 : 0) + (cfg.run_step4 ? 1 : 0) : 1;
  require(cfg.rounds * cfg.local_epochs * steps <= cfg.max_epochs, ErrorKind::kConfig,
          "train.rounds * train.local_epochs * steps exceeds train.max_epochs");
}

int domain_class_label(int pseudo_domain, int label, int classes, int latent_domains) {
  require(pseudo_domain >= 0 && pseudo_domain < latent_domains, ErrorKind::kInput,
          "pseudo domain " + std::to_string(pseudo_domain) + " outside [0," + std::to_string(latent_domains) + ")");
  require(label >= 0 && label < classes, ErrorKind::kInput,
          "label " + std::to_string(label) + " outside [0," + std::to_string(classes) + ")");
  return pseudo_domain * classes + label;
}

std::pair<int, int> split_domain_class_label(int s, int classes) {
  require(s >= 0 && classes >= 1, ErrorKind::kInput, "invalid domain-class label");
  return {s / classes, s % classes};
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows) {
  os << "round,step,epoch,L_super,L_self,L_cls,L_dom,val_acc,label_changes,cluster_sizes\n";
  auto real = [](Real v) { return std::isnan(v) ? std::string() : format_real(v); };
  for (const auto& r : rows) {
    os << r.round << ',' << r.step << ',' << r.epoch << ',' << real(r.l_super) << ',' << real(r.l_self) << ','
       << real(r.l_cls) << ',' << real(r.l_dom) << ',' << real(r.val_accuracy) << ','
       << (r.label_changes ? std::to_string(*r.label_changes) : std::string()) << ',';
    for (std::size_t i = 0; i < r.cluster_sizes.size(); ++i) os << (i ? ";" : "") << r.cluster_sizes[i];
    os << '\n';
  }
}

model::ArchConfig method_arch(Method method, model::ArchConfig arch, const TrainConfig& cfg,
                              std::span<const int> domain_labels) {
  switch (method) {
    case Method::kDiversify:
      arch.latent_domains = cfg.latent_domains;
      break;
    case Method::kErm:
      arch.latent_domains = 1;
      break;
    case Method::kDann: {
      require(!domain_labels.empty(), ErrorKind::kInput, "DANN requires domain labels for the training set");
      const int max_label = *std::max_element(domain_labels.begin(), domain_labels.end());
      require(*std::min_element(domain_labels.begin(), domain_labels.end()) >= 0, ErrorKind::kInput,
              "DANN domain labels must be non-negative");
      arch.latent_domains = max_label + 1;
      break;
    }
  }
  arch.seed = derive_seed(cfg.seed, "init");
  return arch;
}

Trainer::Trainer(Method method, const TrainConfig& cfg, const model::ArchConfig& arch, data::SegmentDataset train,
                 data::SegmentDataset val, std::vector<int> domain_labels)
    : method_(method), cfg_(cfg), train_(std::move(train)), val_(std::move(val)),
      domain_labels_(std::move(domain_labels)) {
  validate(cfg_, method_);
  require(train_.size() >= 2, ErrorKind::kInput, "training set needs at least two segments");
  require(!val_.empty(), ErrorKind::kInput, "validation set is empty");
  require(val_.channels() == train_.channels() && val_.window() == train_.window(), ErrorKind::kShape,
          "train and validation shapes differ");
  if (method_ == Method::kDann)
    require(domain_labels_.size() == train_.size(), ErrorKind::kInput,
            "DANN needs one domain label per training segment");

  model::ArchConfig a = arch;
  a.channels = train_.channels();
  a.window = train_.window();
  a.classes = train_.classes();
  a = method_arch(method_, a, cfg_, domain_labels_);
  train_.set_latent_domains(method_ == Method::kDiversify ? cfg_.latent_domains : 1);
  model_ = std::make_unique<ModelBundle>(a);
  model_->set_inference_step(method_ == Method::kErm ? 2 : 4);
  shuffle2_ = Rng(derive_seed(cfg_.seed, "shuffle2"));
  shuffle3_ = Rng(derive_seed(cfg_.seed, "shuffle3"));
  shuffle4_ = Rng(derive_seed(cfg_.seed, "shuffle4"));
  init_optimizers();
}

void Trainer::init_optimizers() {
  nn::AdamConfig ac;
  ac.learning_rate = cfg_.learning_rate;
  ac.weight_decay = cfg_.weight_decay;
  ac.decoupled_weight_decay = cfg_.decoupled_weight_decay;
  auto with_backbone = [&](int step) {
    auto p = model_->backbone_parameters();
    auto h = model_->head_parameters(step);
    p.insert(p.end(), h.begin(), h.end());
    return p;
  };
  opt2_ = nn::Adam(with_backbone(2), ac);
  opt3_ = nn::Adam(model_->head_parameters(3), ac);
  opt4_ = nn::Adam(method_ == Method::kDann ? with_backbone(4) : model_->head_parameters(4), ac);
}

Real Trainer::lambda_scale() const {
  if (cfg_.schedule == LambdaSchedule::kConstant) return 1.0;
  const Real progress = static_cast<Real>(round_ + 1) / static_cast<Real>(cfg_.rounds);
  return 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0;
}

Tensor Trainer::backbone_cache() { return model_->backbone_features(train_.all()); }

Tensor& Trainer::cached_backbone() {
  if (!backbone_cache_) backbone_cache_ = backbone_cache();
  return *backbone_cache_;
}

void Trainer::step2_feature_update() {
  const std::vector<int> y = train_.labels();
  const std::vector<int> d = train_.pseudo_domains();
  std::vector<int> targets(y.size());
  const int classes = train_.classes();
  const int k = train_.latent_domains();
  for (std::size_t i = 0; i < y.size(); ++i) targets[i] = domain_class_label(d[i], y[i], classes, k);

  model::HeadGroup& heads = model_->heads(2);
  for (int epoch = 0; epoch < cfg_.local_epochs; ++epoch) {
    Real total = 0.0;
    for (const auto& idx : make_batches(train_.size(), cfg_.batch_size, shuffle2_)) {
      opt2_.zero_grad();
      Tape tape;
      Var h = model_->backbone().forward(tape, tape.constant(train_.batch(idx)), Mode::kTrain);
      Var logits = heads.classifier.forward(tape, heads.bottleneck.forward(tape, h));
      const auto batch_targets = gather(targets, idx);
      Var loss = nn::cross_entropy(tape, logits, batch_targets);
      total += checked(tape.value(loss)[0], round_, 2, epoch) * static_cast<Real>(idx.size());
      tape.backward(loss);
      opt2_.step();
    }
    HistoryRow row;
    row.round = round_;
    row.step = 2;
    row.epoch = epoch;
    row.l_super = total / static_cast<Real>(train_.size());
    history_.push_back(row);
  }
  backbone_cache_.reset();
}

Refinement Trainer::refresh_pseudo_labels() {
  Refinement ref = characterize(*model_, cached_backbone(), train_.latent_domains(), cfg_.distance);
  model_->centroids = ref.centroids;
  return ref;
}

void Trainer::step3_characterize() {
  model::HeadGroup& heads = model_->heads(3);
  const Tensor& features = cached_backbone();
  const std::vector<int> y = train_.labels();
  const Real lambda = cfg_.lambda1 * lambda_scale();
  for (int epoch = 0; epoch < cfg_.local_epochs; ++epoch) {
    HistoryRow row;
    row.round = round_;
    row.step = 3;
    row.epoch = epoch;
    if (cfg_.refresh == RefreshPolicy::kEveryEpoch || epoch == 0) {
      const std::vector<int> before = train_.pseudo_domains();
      Refinement ref = refresh_pseudo_labels();
      std::size_t changes = 0;
      for (std::size_t i = 0; i < before.size(); ++i) changes += before[i] != ref.labels[i] ? 1 : 0;
      train_.set_pseudo_domains(ref.labels);
      row.label_changes = changes;
      row.cluster_sizes = cluster_sizes(ref.labels, train_.latent_domains());
    }
    const std::vector<int> d = train_.pseudo_domains();
    Real self_total = 0.0, cls_total = 0.0;
    for (const auto& idx : make_batches(train_.size(), cfg_.batch_size, shuffle3_)) {
      opt3_.zero_grad();
      Tape tape;
      Var z = heads.bottleneck.forward(tape, tape.constant(gather_rows(features, idx)));
      const auto batch_d = gather(d, idx);
      const auto batch_y = gather(y, idx);
      Var l_self = nn::cross_entropy(tape, heads.classifier.forward(tape, z), batch_d);
      Var l_cls = nn::cross_entropy(tape, heads.adversary->forward(tape, nn::reverse_gradient(tape, z, lambda)), batch_y);
      Var loss = nn::add(tape, l_self, l_cls);
      checked(tape.value(loss)[0], round_, 3, epoch);
      self_total += tape.value(l_self)[0] * static_cast<Real>(idx.size());
      cls_total += tape.value(l_cls)[0] * static_cast<Real>(idx.size());
      tape.backward(loss);
      opt3_.step();
    }
    row.l_self = self_total / static_cast<Real>(train_.size());
    row.l_cls = cls_total / static_cast<Real>(train_.size());
    history_.push_back(row);
  }
}

void Trainer::step4_invariant_train() {
  const bool dann = method_ == Method::kDann;
  model::HeadGroup& heads = model_->heads(4);
  const std::vector<int> y = train_.labels();
  const std::vector<int> d = dann ? domain_labels_ : train_.pseudo_domains();
  const Real lambda = cfg_.lambda2 * lambda_scale();
  for (int epoch = 0; epoch < cfg_.local_epochs; ++epoch) {
    Real cls_total = 0.0, dom_total = 0.0;
    for (const auto& idx : make_batches(train_.size(), cfg_.batch_size, shuffle4_)) {
      opt4_.zero_grad();
      Tape tape;
      Var h = dann ? model_->backbone().forward(tape, tape.constant(train_.batch(idx)), Mode::kTrain)
                   : tape.constant(gather_rows(cached_backbone(), idx));
      Var z = heads.bottleneck.forward(tape, h);
      const auto batch_d = gather(d, idx);
      const auto batch_y = gather(y, idx);
      Var l_cls = nn::cross_entropy(tape, heads.classifier.forward(tape, z), batch_y);
      Var l_dom = nn::cross_entropy(tape, heads.adversary->forward(tape, nn::reverse_gradient(tape, z, lambda)), batch_d);
      Var loss = nn::add(tape, l_cls, l_dom);
      checked(tape.value(loss)[0], round_, 4, epoch);
      cls_total += tape.value(l_cls)[0] * static_cast<Real>(idx.size());
      dom_total += tape.value(l_dom)[0] * static_cast<Real>(idx.size());
      tape.backward(loss);
      opt4_.step();
    }
    HistoryRow row;
    row.round = round_;
    row.step = 4;
    row.epoch = epoch;
    row.l_cls = cls_total / static_cast<Real>(train_.size());
    row.l_dom = dom_total / static_cast<Real>(train_.size());
    history_.push_back(row);
  }
  if (dann) backbone_cache_.reset();
}

void Trainer::record_validation() {
  const auto preds = model_->predict(val_.all());
  const std::vector<int> labels = val_.labels();
  const Real acc = analysis::accuracy(preds.labels, labels);
  round_val_.push_back(acc);
  if (!history_.empty()) history_.back().val_accuracy = acc;
  if (acc > best_val_) {
    best_val_ = acc;
    best_round_ = round_;
    best_ = std::make_unique<ModelBundle>(*model_);
  }
}

void Trainer::run_round() {
  require(!finished(), ErrorKind::kInput, "training already finished");
  try {
    run_round_steps();
  } catch (const Error& e) {
    // Numeric failures from deep inside an op get the round attached.
    if (e.kind() != ErrorKind::kNumeric || e.message().find("round ") != std::string::npos) throw;
    fail(ErrorKind::kNumeric, "round " + std::to_string(round_) + ": " + e.message());
  }
  record_validation();
  ++round_;
}

void Trainer::run_round_steps() {
  switch (method_) {
    case Method::kDiversify:
      if (cfg_.reinit_step2_heads && round_ > 0) {
        Rng rng(derive_seed(cfg_.seed, "step2-reinit-" + std::to_string(round_)));
        model::HeadGroup& heads = model_->heads(2);
        const auto in = heads.bottleneck.in_features();
        heads.bottleneck = nn::Linear("step2.bottleneck", in, model_->arch().bottleneck_dim, rng);
        heads.classifier = nn::Linear("step2.classifier", model_->arch().bottleneck_dim,
                                      heads.classifier.out_features(), rng);
        // Fresh heads start from zero moments; backbone moments carry over.
        const std::uint64_t steps = opt2_.step_count();
        std::vector<Tensor> m = opt2_.first_moments(), v = opt2_.second_moments();
        const std::size_t backbone_count = model_->backbone_parameters().size();
        nn::AdamConfig ac = opt2_.config();
        auto params = model_->backbone_parameters();
        auto h = model_->head_parameters(2);
        params.insert(params.end(), h.begin(), h.end());
        opt2_ = nn::Adam(params, ac);
        opt2_.set_step_count(steps);
        for (std::size_t k = 0; k < backbone_count; ++k) {
          opt2_.first_moments()[k] = m[k];
          opt2_.second_moments()[k] = v[k];
        }
      }
      step2_feature_update();
      if (cfg_.run_step3) step3_characterize();
      if (cfg_.run_step4) step4_invariant_train();
      break;
    case Method::kErm:
      step2_feature_update();
      break;
    case Method::kDann:
      step4_invariant_train();
      break;
  }
}

void Trainer::run() {
  while (!finished()) run_round();
}

model::ModelBundle& Trainer::best_model() {
  require(best_ != nullptr, ErrorKind::kInput, "no completed round yet");
  return *best_;
}

void Trainer::save(const std::filesystem::path& path) {
  model::CheckpointFile f;
  model::encode_bundle(f, *model_);
  f.set("method", to_string(method_));
  encode_config(f, cfg_);
  f.set("round", std::to_string(round_));
  f.set("best_round", std::to_string(best_round_));
  f.set("best_val_accuracy", format_real(best_val_));
  f.set("train_size", std::to_string(train_.size()));
  f.set("rng.shuffle2", shuffle2_.state());
  f.set("rng.shuffle3", shuffle3_.state());
  f.set("rng.shuffle4", shuffle4_.state());
  encode_optimizer(f, "opt2", opt2_);
  encode_optimizer(f, "opt3", opt3_);
  encode_optimizer(f, "opt4", opt4_);
  f.add_blob("pseudo_domains", to_reals(train_.pseudo_domains()));
  f.add_blob("round_val_accuracy", round_val_);
  if (best_) model::encode_bundle(f, *best_, "best/");
  model::write_checkpoint_file(path, f);
}

Trainer Trainer::load(const std::filesystem::path& path, data::SegmentDataset train, data::SegmentDataset val,
                      std::vector<int> domain_labels) {
  const model::CheckpointFile f = model::read_checkpoint_file(path);
  Trainer t;
  t.method_ = parse_method(f.get("method"));
  t.cfg_ = decode_config(f);
  t.train_ = std::move(train);
  t.val_ = std::move(val);
  t.domain_labels_ = std::move(domain_labels);
  require(std::to_string(t.train_.size()) == f.get("train_size"), ErrorKind::kInput,
          "checkpoint was trained on a different training set size");
  t.model_ = std::make_unique<ModelBundle>(model::decode_bundle(f));
  t.train_.set_latent_domains(t.method_ == Method::kDiversify ? t.cfg_.latent_domains : 1);
  const auto& pd = f.blob("pseudo_domains").values;
  std::vector<int> labels(pd.begin(), pd.end());
  t.train_.set_pseudo_domains(labels);
  t.init_optimizers();
  decode_optimizer(f, "opt2", t.opt2_);
  decode_optimizer(f, "opt3", t.opt3_);
  decode_optimizer(f, "opt4", t.opt4_);
  t.shuffle2_.set_state(f.get("rng.shuffle2"));
  t.shuffle3_.set_state(f.get("rng.shuffle3"));
  t.shuffle4_.set_state(f.get("rng.shuffle4"));
  t.round_ = parse_value<int>("round", f.get("round"));
  t.best_round_ = parse_value<int>("best_round", f.get("best_round"));
  t.best_val_ = parse_value<Real>("best_val_accuracy", f.get("best_val_accuracy"));
  t.round_val_ = f.blob("round_val_accuracy").values;
  if (f.find("best/inference_step")) t.best_ = std::make_unique<ModelBundle>(model::decode_bundle(f, "best/"));
  return t;
}

Trainer train(Method method, const data::SegmentDataset& dataset, const TrainConfig& cfg,
              const model::ArchConfig& arch, std::vector<int> domain_labels) {
  if (method == Method::kDann)
    require(domain_labels.size() == dataset.size(), ErrorKind::kInput,
            "DANN needs one domain label per segment (got " + std::to_string(domain_labels.size()) + ")");
  const auto split = data::split_train_val(dataset, 0.8, derive_seed(cfg.seed, "split"));
  std::vector<int> train_domains;
  if (method == Method::kDann) train_domains = gather(domain_labels, split.train);
  Trainer t(method, cfg, arch, dataset.subset(split.train), dataset.subset(split.val), std::move(train_domains));
  t.run();
  return t;
}

Refinement characterize(model::ModelBundle& model, const Tensor& backbone_features, int latent_domains,
                        Distance metric) {
  const Tensor z = model.bottleneck_features(3, backbone_features);
  Tape tape = Tape::inference();
  const Tensor delta = nn::softmax_rows(tape.value(model.heads(3).classifier.forward(tape, tape.constant(z))));
  const Tensor initial = soft_centroids(z, delta);
  return refine_pseudo_labels(z, nearest_centroid_assign(z, initial, metric), latent_domains, metric);
}

}  // namespace dvfy::diversify
