#include "dvfy/dataio/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "dvfy/error.hpp"
#include "dvfy/numerics/rng.hpp"

namespace dvfy::data {

SegmentDataset::SegmentDataset(std::size_t channels, std::size_t window, int classes, int latent_domains)
    : channels_(channels), window_(window), classes_(classes), latent_domains_(latent_domains) {
  require(channels >= 1 && window >= 1, ErrorKind::kShape, "dataset needs positive channels and window");
  require(classes >= 1, ErrorKind::kInput, "dataset needs at least one class");
  require(latent_domains >= 1, ErrorKind::kInput, "latent domain count must be at least 1");
}

void SegmentDataset::add(Segment s) {
  require(s.values.size() == channels_ * window_, ErrorKind::kShape,
          "segment '" + s.id + "' has " + std::to_string(s.values.size()) + " values, expected " +
              std::to_string(channels_ * window_));
  require(s.y >= 0 && s.y < classes_, ErrorKind::kInput,
          "segment '" + s.id + "' label " + std::to_string(s.y) + " outside [0," + std::to_string(classes_) + ")");
  require(s.pseudo_domain >= 0 && s.pseudo_domain < latent_domains_, ErrorKind::kInput,
          "segment '" + s.id + "' pseudo domain out of range");
  require(s.true_domain >= -1, ErrorKind::kInput, "segment '" + s.id + "' has a negative true domain");
  for (Real v : s.values) require(std::isfinite(v), ErrorKind::kNumeric, "segment '" + s.id + "' has non-finite values");
  segments_.push_back(std::move(s));
}

void SegmentDataset::set_latent_domains(int k) {
  require(k >= 1, ErrorKind::kInput, "latent domain count must be at least 1");
  latent_domains_ = k;
  for (auto& s : segments_) s.pseudo_domain = 0;
}

void SegmentDataset::set_pseudo_domain(std::size_t i, int d) {
  require(d >= 0 && d < latent_domains_, ErrorKind::kInput,
          "pseudo domain " + std::to_string(d) + " outside [0," + std::to_string(latent_domains_) + ")");
  segments_.at(i).pseudo_domain = d;
}

void SegmentDataset::set_pseudo_domains(std::span<const int> labels) {
  require(labels.size() == segments_.size(), ErrorKind::kShape, "pseudo label count mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) set_pseudo_domain(i, labels[i]);
}

std::vector<int> SegmentDataset::pseudo_domains() const {
  std::vector<int> out;
  out.reserve(segments_.size());
  for (const auto& s : segments_) out.push_back(s.pseudo_domain);
  return out;
}

std::vector<int> SegmentDataset::labels() const {
  std::vector<int> out;
  out.reserve(segments_.size());
  for (const auto& s : segments_) out.push_back(s.y);
  return out;
}

std::vector<int> SegmentDataset::true_domains() const {
  std::vector<int> out;
  out.reserve(segments_.size());
  for (const auto& s : segments_) out.push_back(s.true_domain);
  return out;
}

bool SegmentDataset::has_true_domains() const {
  return !segments_.empty() &&
         std::all_of(segments_.begin(), segments_.end(), [](const Segment& s) { return s.true_domain >= 0; });
}

SegmentDataset SegmentDataset::subset(std::span<const std::size_t> indices) const {
  SegmentDataset out(channels_, window_, classes_, latent_domains_);
  out.segments_.reserve(indices.size());
  for (std::size_t i : indices) out.segments_.push_back(segments_.at(i));
  return out;
}

nn::Tensor SegmentDataset::batch(std::span<const std::size_t> indices) const {
  require(!indices.empty(), ErrorKind::kInput, "empty batch");
  const std::size_t per = channels_ * window_;
  std::vector<Real> values(indices.size() * per);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& src = segments_.at(indices[b]).values;
    std::copy(src.begin(), src.end(), values.begin() + static_cast<std::ptrdiff_t>(b * per));
  }
  return nn::Tensor({indices.size(), channels_, 1, window_}, std::move(values));
}

nn::Tensor SegmentDataset::all() const {
  std::vector<std::size_t> idx(segments_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch(idx);
}

std::vector<Segment> segment(const RawSeries& series, std::size_t window, std::size_t step) {
  require(series.channels >= 1 && series.samples.size() % series.channels == 0, ErrorKind::kShape,
          "series '" + series.id + "' is not channels x length");
  const std::size_t len = series.length();
  require(window >= 1 && step >= 1, ErrorKind::kInput, "window and step must be positive");
  require(window <= len, ErrorKind::kInput,
          "window " + std::to_string(window) + " longer than series '" + series.id + "' (" + std::to_string(len) + ")");
  const std::size_t count = (len - window) / step + 1;
  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Segment s;
    s.id = series.id + "#" + std::to_string(i);
    s.y = series.class_label;
    s.true_domain = series.true_domain;
    s.values.resize(series.channels * window);
    for (std::size_t c = 0; c < series.channels; ++c) {
      const Real* src = &series.samples[c * len + i * step];
      std::copy(src, src + window, s.values.begin() + static_cast<std::ptrdiff_t>(c * window));
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

void scale_range(std::span<Real> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const Real min = *lo, max = *hi;
  const Real range = max - min;
  for (auto& x : v) x = range > 0.0 ? (x - min) / range : 0.0;
}

}  // namespace

void minmax_normalize(std::span<Real> values, std::size_t channels, NormScope scope) {
  if (values.empty()) return;
  if (scope == NormScope::kSample) {
    scale_range(values);
    return;
  }
  require(channels >= 1 && values.size() % channels == 0, ErrorKind::kShape, "values are not channels x length");
  const std::size_t len = values.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) scale_range(values.subspan(c * len, len));
}

TrainValSplit split_train_val(const SegmentDataset& dataset, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::kConfig, "split ratio must be in (0,1)");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.classes()));
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[static_cast<std::size_t>(dataset[i].y)].push_back(i);

  Rng rng(seed);
  TrainValSplit split;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    require(members.size() >= 2, ErrorKind::kInput,
            "class " + std::to_string(c) + " has " + std::to_string(members.size()) + " segment(s); need at least 2 to split");
    rng.shuffle(members.begin(), members.end());
    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(members.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.insert(split.val.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

}  // namespace dvfy::data
