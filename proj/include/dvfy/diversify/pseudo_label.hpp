#pragma once

#include <span>
#include <string>
#include <vector>

#include "dvfy/numerics/tensor.hpp"

namespace dvfy::diversify {

using nn::Real;
using nn::Tensor;

enum class Distance { kCosine, kEuclidean };

std::string to_string(Distance d);
Distance parse_distance(const std::string& text);

/// Cosine distance is 1 - cos(a, b); a zero-norm centroid is at distance 1.
/// Callers handle zero-norm features (see nearest_centroid_assign).
Real distance(std::span<const Real> a, std::span<const Real> b, Distance metric);

/// Weighted centroids: row k = sum_i w_ik f_i / sum_i w_ik, for features
/// [N x D] and weights [N x K]. A column whose weight sum is below 1e-12 is
/// re-seeded with reseed_empty().
Tensor soft_centroids(const Tensor& features, const Tensor& weights);

/// argmin_k D(f_i, mu_k); ties go to the smallest k. A zero feature vector
/// under the cosine metric is assigned by euclidean distance instead.
std::vector<int> nearest_centroid_assign(const Tensor& features, const Tensor& centroids, Distance metric);

/// Distance from each feature to the centroid named by its label, summed,
/// using the same per-sample metric rule as nearest_centroid_assign.
Real assigned_distance(const Tensor& features, const Tensor& centroids, std::span<const int> labels, Distance metric);

struct Refinement {
  Tensor centroids;                  // hard-mean centroids from the provisional labels
  std::vector<int> labels;           // re-assignment against those centroids
  std::vector<int> reseeded;         // clusters that were empty and re-seeded
  std::size_t changed = 0;           // positions where labels differ from the input
  Real distance_before = 0.0;        // assigned_distance(centroids, provisional labels)
  Real distance_after = 0.0;         // assigned_distance(centroids, labels)
};

/// One hard refinement pass: indicator-mean centroids of the provisional
/// labels, then nearest-centroid re-assignment. Empty clusters are re-seeded
/// at the feature farthest from its nearest non-empty centroid.
Refinement refine_pseudo_labels(const Tensor& features, std::span<const int> provisional, int clusters,
                                Distance metric);

/// Fills each row listed in `missing` (ascending) with the feature farthest
/// from its nearest already-defined centroid. Rows not in `missing` count as
/// defined; when none are, the first fill uses the feature mean.
void reseed_empty(const Tensor& features, Tensor& centroids, std::span<const int> missing, Distance metric);

}  // namespace dvfy::diversify
