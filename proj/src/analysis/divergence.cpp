#include "dvfy/analysis/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"

#include "dvfy/error.hpp"
#include "dvfy/numerics/adam.hpp"
#include "dvfy/numerics/layers.hpp"

namespace dvfy::analysis {

namespace {

using nlohmann::json;

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx.begin(), idx.end());
  return idx;
}

DivergenceEstimate probe_once(const Tensor& a, const Tensor& b, const ProbeConfig& probe, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t dim = a.dim(1);
  const std::size_t n = std::min(a.dim(0), b.dim(0));
  const std::size_t n_train = n / 2, n_val = n - n_train;
  const auto ia = shuffled(a.dim(0), rng);
  const auto ib = shuffled(b.dim(0), rng);

  // Rows [0, n_train) of each set train the probe, the next n_val validate.
  auto gather = [&](std::size_t from, std::size_t count) {
    std::vector<Real> x;
    std::vector<int> y;
    x.reserve(2 * count * dim);
    for (int source = 0; source < 2; ++source) {
      const Tensor& t = source == 0 ? a : b;
      const auto& order = source == 0 ? ia : ib;
      for (std::size_t r = from; r < from + count; ++r) {
        const auto row = t.data().subspan(order[r] * dim, dim);
        x.insert(x.end(), row.begin(), row.end());
        y.push_back(source);
      }
    }
    return std::pair{std::move(x), std::move(y)};
  };
  auto [x_train, y_train] = gather(0, n_train);
  auto [x_val, y_val] = gather(n_train, n_val);

  std::vector<Real> mean(dim, 0.0), scale(dim, 0.0);
  const std::size_t rows = y_train.size();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < dim; ++c) mean[c] += x_train[r * dim + c];
  for (auto& m : mean) m /= static_cast<Real>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < dim; ++c) scale[c] += std::pow(x_train[r * dim + c] - mean[c], 2);
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<Real>(rows));
    if (s < 1e-12) s = 1.0;
  }
  auto standardize = [&](std::vector<Real>& x) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - mean[i % dim]) / scale[i % dim];
  };
  standardize(x_train);
  standardize(x_val);

  std::vector<std::size_t> widths{dim};
  if (probe.hidden > 0) widths.push_back(probe.hidden);
  widths.push_back(2);
  nn::Mlp net("probe", widths, rng);
  std::vector<nn::Parameter*> params;
  net.collect(params);
  nn::AdamConfig ac;
  ac.learning_rate = probe.learning_rate;
  ac.weight_decay = 0.0;
  nn::Adam opt(params, ac);

  for (int epoch = 0; epoch < probe.epochs; ++epoch) {
    const auto order = shuffled(rows, rng);
    for (std::size_t start = 0; start < rows; start += probe.batch_size) {
      const std::size_t count = std::min(probe.batch_size, rows - start);
      std::vector<Real> xb(count * dim);
      std::vector<int> yb(count);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t r = order[start + k];
        std::copy_n(x_train.begin() + static_cast<std::ptrdiff_t>(r * dim), dim,
                    xb.begin() + static_cast<std::ptrdiff_t>(k * dim));
        yb[k] = y_train[r];
      }
      opt.zero_grad();
      nn::Tape tape;
      nn::Var loss = nn::cross_entropy(tape, net.forward(tape, tape.constant(Tensor({count, dim}, std::move(xb)))), yb);
      require(std::isfinite(tape.value(loss)[0]), ErrorKind::kNumeric, "divergence probe loss is not finite");
      tape.backward(loss);
      opt.step();
    }
  }

  nn::Tape tape = nn::Tape::inference();
  const Tensor& logits = tape.value(net.forward(tape, tape.constant(Tensor({y_val.size(), dim}, std::move(x_val)))));
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < y_val.size(); ++r) {
    const int pred = logits.at(r, 1) > logits.at(r, 0) ? 1 : 0;
    wrong += pred != y_val[r] ? 1 : 0;
  }
  const Real err = static_cast<Real>(wrong) / static_cast<Real>(y_val.size());
  return {std::clamp(2.0 * (1.0 - 2.0 * err), 0.0, 2.0), err};
}

std::vector<std::vector<Real>> square(std::size_t k, Real fill) {
  return std::vector<std::vector<Real>>(k, std::vector<Real>(k, fill));
}

}  // namespace

std::string describe(const ProbeConfig& p) {
  return (p.hidden == 0 ? std::string("linear") : "mlp" + std::to_string(p.hidden)) + " epochs=" +
         std::to_string(p.epochs) + " lr=" + json(p.learning_rate).dump() + " batch=" + std::to_string(p.batch_size) +
         " repeats=" + std::to_string(p.repeats) + " split=50/50";
}

DivergenceEstimate proxy_h_divergence(const Tensor& a, const Tensor& b, const ProbeConfig& probe,
                                      std::uint64_t seed) {
  require(a.rank() == 2 && b.rank() == 2, ErrorKind::kShape, "divergence inputs must be [N x D] matrices");
  require(a.dim(1) == b.dim(1), ErrorKind::kShape, "divergence inputs have different feature widths");
  require(a.dim(0) >= 4 && b.dim(0) >= 4, ErrorKind::kInput, "divergence needs at least 4 samples per set");
  require(probe.repeats >= 1 && probe.epochs >= 1 && probe.batch_size >= 1, ErrorKind::kConfig,
          "probe repeats, epochs and batch size must be positive");
  DivergenceEstimate total;
  for (int r = 0; r < probe.repeats; ++r) {
    const auto one = probe_once(a, b, probe, derive_seed(seed, static_cast<std::uint64_t>(r)));
    total.divergence += one.divergence;
    total.val_error += one.val_error;
  }
  total.divergence /= probe.repeats;
  total.val_error /= probe.repeats;
  return total;
}

DivergenceReport pairwise_divergence_matrix(const Tensor& features, std::span<const int> groups,
                                            const std::vector<std::string>& names, const ProbeConfig& probe,
                                            std::uint64_t seed, const std::string& feature_space) {
  const std::size_t k = names.size();
  require(k >= 2, ErrorKind::kInput, "divergence matrix needs at least two groups");
  require(features.rank() == 2 && features.dim(0) == groups.size(), ErrorKind::kShape,
          "one group label per feature row required");
  const std::size_t dim = features.dim(1);
  std::vector<std::vector<Real>> rows(k);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    require(groups[i] >= 0 && static_cast<std::size_t>(groups[i]) < k, ErrorKind::kInput,
            "group label " + std::to_string(groups[i]) + " outside [0," + std::to_string(k) + ")");
    const auto row = features.data().subspan(i * dim, dim);
    rows[static_cast<std::size_t>(groups[i])].insert(rows[static_cast<std::size_t>(groups[i])].end(), row.begin(),
                                                     row.end());
  }
  std::vector<Tensor> sets;
  for (std::size_t g = 0; g < k; ++g) {
    require(!rows[g].empty(), ErrorKind::kInput, "group '" + names[g] + "' is empty");
    const std::size_t n = rows[g].size() / dim;
    sets.emplace_back(nn::Shape{n, dim}, std::move(rows[g]));
  }

  DivergenceReport report;
  report.split_names = names;
  report.matrix = square(k, 0.0);
  report.val_error = square(k, 0.5);
  report.feature_space = feature_space;
  report.probe = describe(probe);
  report.seed = seed;
  Real sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto est = proxy_h_divergence(sets[i], sets[j], probe, derive_seed(seed, i * k + j));
      report.matrix[i][j] = report.matrix[j][i] = est.divergence;
      report.val_error[i][j] = report.val_error[j][i] = est.val_error;
      sum += est.divergence;
      report.max_off_diagonal = std::max(report.max_off_diagonal, est.divergence);
    }
  }
  report.mean_off_diagonal = sum / static_cast<Real>(k * (k - 1) / 2);
  return report;
}

std::string to_string(FeatureSpace space) {
  switch (space) {
    case FeatureSpace::kRaw: return "raw";
    case FeatureSpace::kStep3: return "step3";
    case FeatureSpace::kStep4: return "step4";
  }
  return "?";
}

FeatureSpace parse_feature_space(const std::string& text) {
  if (text == "raw") return FeatureSpace::kRaw;
  if (text == "step3") return FeatureSpace::kStep3;
  if (text == "step4") return FeatureSpace::kStep4;
  fail(ErrorKind::kConfig, "unknown feature space '" + text + "' (raw|step3|step4)");
}

Tensor feature_matrix(const data::SegmentDataset& dataset, FeatureSpace space, model::ModelBundle* bundle) {
  require(!dataset.empty(), ErrorKind::kInput, "dataset is empty");
  const Tensor inputs = dataset.all();
  if (space == FeatureSpace::kRaw) return inputs.reshaped({dataset.size(), inputs.size() / dataset.size()});
  require(bundle != nullptr, ErrorKind::kInput, "bottleneck feature space needs a model");
  return bundle->bottleneck_features(space == FeatureSpace::kStep3 ? 3 : 4, bundle->backbone_features(inputs));
}

BoundReport bound_report(model::ModelBundle& bundle, const data::SegmentDataset& dataset,
                         const DivergenceReport& divergence) {
  require(!dataset.empty(), ErrorKind::kInput, "dataset is empty");
  const auto preds = bundle.predict(dataset.all());
  const std::vector<int> d = dataset.pseudo_domains();
  const std::vector<int> y = dataset.labels();
  const std::size_t k = static_cast<std::size_t>(dataset.latent_domains());
  std::vector<std::size_t> count(k, 0), correct(k, 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = static_cast<std::size_t>(d[i]);
    ++count[c];
    correct[c] += preds.labels[i] == y[i] ? 1 : 0;
  }
  BoundReport report;
  const Real n = static_cast<Real>(d.size());
  for (std::size_t c = 0; c < k; ++c) {
    report.phi.push_back(static_cast<Real>(count[c]) / n);
    report.source_errors.push_back(
        count[c] == 0 ? 0.0 : 1.0 - static_cast<Real>(correct[c]) / static_cast<Real>(count[c]));
    report.weighted_error += report.phi.back() * report.source_errors.back();
  }
  report.divergence_term = 0.5 * divergence.max_off_diagonal;
  return report;
}

std::string to_json(const DivergenceReport& r) {
  json j;
  j["split_names"] = r.split_names;
  j["matrix"] = r.matrix;
  j["val_error"] = r.val_error;
  j["mean_off_diagonal"] = r.mean_off_diagonal;
  j["max_off_diagonal"] = r.max_off_diagonal;
  j["feature_space"] = r.feature_space;
  j["probe"] = r.probe;
  j["seed"] = r.seed;
  return j.dump(2);
}

std::string to_json(const BoundReport& r) {
  json j;
  j["phi"] = r.phi;
  j["source_errors"] = r.source_errors;
  j["weighted_error"] = r.weighted_error;
  j["divergence_term"] = r.divergence_term;
  j["not_computable"] = r.not_computable;
  return j.dump(2);
}

DivergenceReport divergence_report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    DivergenceReport r;
    r.split_names = j.at("split_names").get<std::vector<std::string>>();
    r.matrix = j.at("matrix").get<std::vector<std::vector<Real>>>();
    r.val_error = j.at("val_error").get<std::vector<std::vector<Real>>>();
    r.mean_off_diagonal = j.at("mean_off_diagonal").get<Real>();
    r.max_off_diagonal = j.at("max_off_diagonal").get<Real>();
    r.feature_space = j.at("feature_space").get<std::string>();
    r.probe = j.at("probe").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("divergence report: ") + e.what());
  }
}

void write_matrix_csv(std::ostream& os, const DivergenceReport& r) {
  os << "split";
  for (const auto& n : r.split_names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < r.matrix.size(); ++i) {
    os << r.split_names[i];
    for (Real v : r.matrix[i]) os << ',' << json(v).dump();
    os << '\n';
  }
}

}  // namespace dvfy::analysis
