#include "dvfy/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dvfy/error.hpp"

namespace dvfy::nn {

namespace {

Real evaluate(const LossBuilder& loss) {
  Tape tape;
  Var out = loss(tape);
  require(tape.value(out).size() == 1, ErrorKind::kShape, "gradient check needs a scalar loss");
  return tape.value(out)[0];
}

}  // namespace

GradCheckResult finite_difference_check(const LossBuilder& loss, std::span<Parameter* const> params,
                                        const GradCheckOptions& opts) {
  require(opts.eps > 0.0, ErrorKind::kInput, "gradient check eps must be positive");
  for (Parameter* p : params) p->zero_grad();
  const Real base = [&] {
    Tape tape;
    Var out = loss(tape);
    tape.backward(out);
    return tape.value(out)[0];
  }();
  const Real again = evaluate(loss);
  require(base == again, ErrorKind::kInput, "loss is not deterministic; fix its randomness before checking");

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const Real saved = p.value[i];
      p.value[i] = saved + opts.eps;
      const Real up = evaluate(loss);
      p.value[i] = saved - opts.eps;
      const Real down = evaluate(loss);
      p.value[i] = saved;
      const Real numeric = (up - down) / (2.0 * opts.eps);
      const Real analytic = opts.analytic_sign * p.grad[i];
      const Real denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const Real err = std::abs(analytic - numeric) / denom;
      if (err > result.max_relative_error || (k == 0 && i == 0)) {
        result = GradCheckResult{err, k, i, analytic, numeric};
      }
    }
  }
  return result;
}

}  // namespace dvfy::nn
