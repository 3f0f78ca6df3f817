#pragma once

#include <span>

namespace dvfy::analysis {

/// Fraction of positions where prediction equals label; the denominator is
/// the number of test segments. Throws kInput on empty or mismatched input.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Adjusted Rand index from the pair-counting contingency table. Labels may
/// be any integers. Two partitions that leave the index undefined (both a
/// single cluster, for example) are identical and score 1.0.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace dvfy::analysis
