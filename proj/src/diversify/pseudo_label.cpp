#include "dvfy/diversify/pseudo_label.hpp"

#include <cmath>
#include <limits>

#include "dvfy/error.hpp"

namespace dvfy::diversify {

namespace {

std::span<const Real> row(const Tensor& t, std::size_t r) { return t.data().subspan(r * t.dim(1), t.dim(1)); }

Real norm(std::span<const Real> v) {
  Real s = 0.0;
  for (Real x : v) s += x * x;
  return std::sqrt(s);
}

Real euclidean(std::span<const Real> a, std::span<const Real> b) {
  Real s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Metric actually used for a given feature row.
Distance effective_metric(std::span<const Real> f, Distance metric) {
  return metric == Distance::kCosine && norm(f) == 0.0 ? Distance::kEuclidean : metric;
}

void check_matrix(const Tensor& t, const char* what) {
  require(t.rank() == 2, ErrorKind::kShape, std::string(what) + " must be a matrix");
}

}  // namespace

std::string to_string(Distance d) { return d == Distance::kCosine ? "cosine" : "euclidean"; }

Distance parse_distance(const std::string& text) {
  if (text == "cosine") return Distance::kCosine;
  if (text == "euclidean") return Distance::kEuclidean;
  fail(ErrorKind::kConfig, "unknown distance '" + text + "' (cosine|euclidean)");
}

Real distance(std::span<const Real> a, std::span<const Real> b, Distance metric) {
  require(a.size() == b.size(), ErrorKind::kShape, "distance: dimension mismatch");
  if (metric == Distance::kEuclidean) return euclidean(a, b);
  const Real na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 1.0;
  Real dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return 1.0 - dot / (na * nb);
}

void reseed_empty(const Tensor& features, Tensor& centroids, std::span<const int> missing, Distance metric) {
  const std::size_t n = features.dim(0), k = centroids.dim(0), dim = features.dim(1);
  std::vector<bool> defined(k, true);
  for (int m : missing) defined[static_cast<std::size_t>(m)] = false;
  for (int m : missing) {
    const auto target = static_cast<std::size_t>(m);
    Real* dst = &centroids.data()[target * dim];
    bool any_defined = false;
    for (std::size_t c = 0; c < k; ++c) any_defined = any_defined || defined[c];
    if (!any_defined || n == 0) {
      for (std::size_t d = 0; d < dim; ++d) {
        Real s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += features.at(i, d);
        dst[d] = n > 0 ? s / static_cast<Real>(n) : 0.0;
      }
    } else {
      std::size_t far = 0;
      Real far_dist = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto f = row(features, i);
        const Distance used = effective_metric(f, metric);
        Real nearest = std::numeric_limits<Real>::infinity();
        for (std::size_t c = 0; c < k; ++c)
          if (defined[c]) nearest = std::min(nearest, distance(f, row(centroids, c), used));
        if (nearest > far_dist) {
          far_dist = nearest;
          far = i;
        }
      }
      const auto f = row(features, far);
      std::copy(f.begin(), f.end(), dst);
    }
    defined[target] = true;
  }
}

Tensor soft_centroids(const Tensor& features, const Tensor& weights) {
  check_matrix(features, "features");
  check_matrix(weights, "weights");
  require(features.dim(0) == weights.dim(0), ErrorKind::kShape, "soft_centroids: row count mismatch");
  const std::size_t n = features.dim(0), dim = features.dim(1), k = weights.dim(1);
  Tensor centroids({k, dim}, 0.0);
  std::vector<Real> mass(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      const Real w = weights.at(i, c);
      mass[c] += w;
      for (std::size_t d = 0; d < dim; ++d) centroids.at(c, d) += w * features.at(i, d);
    }
  std::vector<int> degenerate;
  for (std::size_t c = 0; c < k; ++c) {
    if (mass[c] < 1e-12) {
      degenerate.push_back(static_cast<int>(c));
      continue;
    }
    for (std::size_t d = 0; d < dim; ++d) centroids.at(c, d) /= mass[c];
  }
  if (!degenerate.empty()) reseed_empty(features, centroids, degenerate, Distance::kEuclidean);
  return centroids;
}

std::vector<int> nearest_centroid_assign(const Tensor& features, const Tensor& centroids, Distance metric) {
  check_matrix(features, "features");
  check_matrix(centroids, "centroids");
  require(centroids.dim(0) >= 1, ErrorKind::kInput, "need at least one centroid");
  require(features.dim(1) == centroids.dim(1), ErrorKind::kShape, "feature and centroid dimensions differ");
  std::vector<int> labels(features.dim(0));
  for (std::size_t i = 0; i < features.dim(0); ++i) {
    const auto f = row(features, i);
    const Distance used = effective_metric(f, metric);
    std::size_t best = 0;
    Real best_dist = distance(f, row(centroids, 0), used);
    for (std::size_t c = 1; c < centroids.dim(0); ++c) {
      const Real d = distance(f, row(centroids, c), used);
      if (d < best_dist) {
        best_dist = d;
        best = c;
      }
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

Real assigned_distance(const Tensor& features, const Tensor& centroids, std::span<const int> labels, Distance metric) {
  require(labels.size() == features.dim(0), ErrorKind::kShape, "label count mismatch");
  Real total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto f = row(features, i);
    total += distance(f, row(centroids, static_cast<std::size_t>(labels[i])), effective_metric(f, metric));
  }
  return total;
}

Refinement refine_pseudo_labels(const Tensor& features, std::span<const int> provisional, int clusters,
                                Distance metric) {
  check_matrix(features, "features");
  require(clusters >= 1, ErrorKind::kInput, "need at least one cluster");
  require(provisional.size() == features.dim(0), ErrorKind::kShape, "label count mismatch");
  const std::size_t n = features.dim(0), dim = features.dim(1), k = static_cast<std::size_t>(clusters);
  for (int l : provisional)
    require(l >= 0 && l < clusters, ErrorKind::kInput,
            "provisional label " + std::to_string(l) + " outside [0," + std::to_string(clusters) + ")");

  Refinement out;
  out.centroids = Tensor({k, dim}, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(provisional[i]);
    ++counts[c];
    for (std::size_t d = 0; d < dim; ++d) out.centroids.at(c, d) += features.at(i, d);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      out.reseeded.push_back(static_cast<int>(c));
      continue;
    }
    for (std::size_t d = 0; d < dim; ++d) out.centroids.at(c, d) /= static_cast<Real>(counts[c]);
  }
  if (!out.reseeded.empty()) reseed_empty(features, out.centroids, out.reseeded, metric);

  out.labels = nearest_centroid_assign(features, out.centroids, metric);
  for (std::size_t i = 0; i < n; ++i) out.changed += out.labels[i] != provisional[i] ? 1 : 0;
  out.distance_before = assigned_distance(features, out.centroids, provisional, metric);
  out.distance_after = assigned_distance(features, out.centroids, out.labels, metric);
  return out;
}

}  // namespace dvfy::diversify
