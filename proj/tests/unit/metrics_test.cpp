#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "dvfy/analysis/metrics.hpp"
#include "dvfy/error.hpp"
#include "dvfy/numerics/rng.hpp"

namespace {

using dvfy::analysis::accuracy;
using dvfy::analysis::adjusted_rand_index;

// Counts agreeing pairs directly: index = (a + b - E) / (max - E) in the
// pair-agreement form, enumerating every pair.
double brute_force_ari(const std::vector<int>& x, const std::vector<int>& y) {
  const std::size_t n = x.size();
  double both = 0, in_x = 0, in_y = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sx = x[i] == x[j], sy = y[i] == y[j];
      both += sx && sy;
      in_x += sx;
      in_y += sy;
      pairs += 1;
    }
  const double expected = in_x * in_y / pairs;
  const double max_index = 0.5 * (in_x + in_y);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

TEST(Accuracy, HandCounted) {
  EXPECT_EQ(accuracy(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}), 1.0);
  EXPECT_EQ(accuracy(std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}),
            0.6);
  EXPECT_EQ(accuracy(std::vector<int>{2, 2, 2, 0}, std::vector<int>{2, 1, 2, 1}), 0.5);
  EXPECT_EQ(accuracy(std::vector<int>{3, 1, 4, 1, 5, 9, 2}, std::vector<int>{3, 1, 4, 1, 5, 9, 2}), 1.0);
  EXPECT_EQ(accuracy(std::vector<int>{0, 0, 0}, std::vector<int>{1, 1, 0}), 1.0 / 3.0);
}

TEST(Accuracy, RejectsEmptyAndMismatched) {
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), dvfy::Error);
  EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), dvfy::Error);
}

TEST(Accuracy, InvariantUnderConsistentRelabel) {
  std::vector<int> p{0, 1, 2, 2, 1}, y{0, 2, 2, 1, 1};
  auto relabel = [](std::vector<int> v) {
    for (auto& x : v) x = (x + 1) % 3;
    return v;
  };
  EXPECT_EQ(accuracy(relabel(p), relabel(y)), accuracy(p, y));
}

TEST(Ari, IdenticalAndPermuted) {
  std::vector<int> a{0, 0, 1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, a), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, std::vector<int>{5, 5, 3, 3, 9, 9}), 1.0);
}

TEST(Ari, SixPointFixtureMatchesPairCounting) {
  std::vector<int> a{0, 0, 0, 1, 1, 1}, b{0, 0, 1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, b), brute_force_ari(a, b));
  EXPECT_NEAR(adjusted_rand_index(a, b), 0.24242424242424243, 1e-15);
}

TEST(Ari, RandomLabelingsMatchPairCounting) {
  dvfy::Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = static_cast<int>(rng.below(4));
    for (auto& v : b) v = static_cast<int>(rng.below(3));
    const double got = adjusted_rand_index(a, b);
    EXPECT_NEAR(got, brute_force_ari(a, b), 1e-12);
    EXPECT_GE(got, -1.0);
    EXPECT_LE(got, 1.0);
  }
}

TEST(Ari, SingleClusterBothSidesIsOne) {
  EXPECT_EQ(adjusted_rand_index(std::vector<int>{4, 4, 4}, std::vector<int>{1, 1, 1}), 1.0);
}

TEST(Ari, RejectsMismatch) { EXPECT_THROW(adjusted_rand_index(std::vector<int>{1}, std::vector<int>{1, 2}), dvfy::Error); }

}  // namespace
