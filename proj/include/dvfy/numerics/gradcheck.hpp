#pragma once

#include <functional>
#include <span>

#include "dvfy/numerics/tape.hpp"

namespace dvfy::nn {

struct GradCheckOptions {
  Real eps = 1e-5;
  // Multiplies the tape gradient before comparison. -1 checks a branch that
  // passes through reverse_gradient(1) against the plain numeric derivative.
  Real analytic_sign = 1.0;
};

struct GradCheckResult {
  Real max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  Real analytic = 0.0;
  Real numeric = 0.0;
};

/// Builds a scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares tape gradients against central differences (f(p+e) - f(p-e)) / 2e
/// for every element of every parameter. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8). Throws kInput when two evaluations at the
/// same point disagree (non-deterministic loss).
GradCheckResult finite_difference_check(const LossBuilder& loss, std::span<Parameter* const> params,
                                        const GradCheckOptions& opts = {});

}  // namespace dvfy::nn
