#include "dvfy/analysis/metrics.hpp"

#include <map>
#include <utility>

#include "dvfy/error.hpp"

namespace dvfy::analysis {

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  require(predictions.size() == labels.size(), ErrorKind::kInput, "accuracy: length mismatch");
  require(!labels.empty(), ErrorKind::kInput, "accuracy: no test segments");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

double pairs(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  require(a.size() == b.size(), ErrorKind::kInput, "adjusted_rand_index: length mismatch");
  require(!a.empty(), ErrorKind::kInput, "adjusted_rand_index: empty labelings");
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, n] : cells) index += pairs(n);
  for (const auto& [key, n] : rows) sum_rows += pairs(n);
  for (const auto& [key, n] : cols) sum_cols += pairs(n);
  const double total = pairs(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index - expected == 0.0) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace dvfy::analysis
