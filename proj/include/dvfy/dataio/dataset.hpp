#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dvfy/numerics/tensor.hpp"

namespace dvfy::data {

using nn::Real;

/// Un-windowed multichannel series; samples are channel-major (channels x length).
struct RawSeries {
  std::string id;
  std::size_t channels = 1;
  std::vector<Real> samples;
  int class_label = 0;
  int true_domain = -1;

  std::size_t length() const { return channels == 0 ? 0 : samples.size() / channels; }

  bool operator==(const RawSeries&) const = default;
};

/// One window: channels x window values, class label, optional ground-truth
/// domain (-1 when unknown) and the mutable pseudo domain label.
struct Segment {
  std::string id;
  std::vector<Real> values;
  int y = 0;
  int true_domain = -1;
  int pseudo_domain = 0;

  bool operator==(const Segment&) const = default;
};

class SegmentDataset {
 public:
  SegmentDataset() = default;
  SegmentDataset(std::size_t channels, std::size_t window, int classes, int latent_domains = 1);

  /// Validates shape and labels; throws kShape / kInput.
  void add(Segment segment);

  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }
  std::span<const Segment> segments() const { return segments_; }

  std::size_t channels() const { return channels_; }
  std::size_t window() const { return window_; }
  int classes() const { return classes_; }
  int latent_domains() const { return latent_domains_; }
  /// Changes K and resets every pseudo label to 0.
  void set_latent_domains(int k);
  void set_pseudo_domain(std::size_t i, int d);
  void set_pseudo_domains(std::span<const int> labels);
  std::vector<int> pseudo_domains() const;
  std::vector<int> labels() const;
  std::vector<int> true_domains() const;
  bool has_true_domains() const;

  SegmentDataset subset(std::span<const std::size_t> indices) const;
  /// Stacks the selected segments into a [B x channels x 1 x window] tensor.
  nn::Tensor batch(std::span<const std::size_t> indices) const;
  nn::Tensor all() const;

  bool operator==(const SegmentDataset&) const = default;

 private:
  std::size_t channels_ = 1;
  std::size_t window_ = 1;
  int classes_ = 1;
  int latent_domains_ = 1;
  std::vector<Segment> segments_;
};

/// Sliding-window segmentation: floor((T - window) / step) + 1 windows, the
/// i-th covering samples [i*step, i*step + window). Labels come from the series.
std::vector<Segment> segment(const RawSeries& series, std::size_t window, std::size_t step);

enum class NormScope { kSample, kChannel };

/// In-place min-max scaling of one segment's values (channel-major). kSample
/// uses extrema over all channels jointly; kChannel scales each channel on its
/// own. A constant range maps to zeros.
void minmax_normalize(std::span<Real> values, std::size_t channels, NormScope scope = NormScope::kSample);

struct TrainValSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Class-stratified split; each class contributes round(ratio * n_c) segments
/// to train (clamped to leave at least one on each side). Indices are sorted.
TrainValSplit split_train_val(const SegmentDataset& dataset, double ratio, std::uint64_t seed);

}  // namespace dvfy::data
