#pragma once

#include <span>

#include "dvfy/numerics/tape.hpp"
#include "dvfy/numerics/tensor.hpp"

namespace dvfy::nn {

// Differentiable primitives. Shapes follow the NCHW convention with H == 1 for
// time series: [batch x channels x 1 x length].

/// x [B x in], weight [out x in], bias [out] -> [B x out].
Var linear(Tape& tape, Var x, Var weight, Var bias);
Var relu(Tape& tape, Var x);

/// Convolution with a (1 x k) kernel, stride 1, no padding.
/// x [B x Cin x 1 x L], weight [Cout x Cin x 1 x k], bias [Cout] -> [B x Cout x 1 x (L-k+1)].
Var conv1xk(Tape& tape, Var x, Var weight, Var bias);

/// Max pooling with a (1 x kernel) window; output length floor((L - kernel) / stride) + 1.
/// Ties resolve to the earliest position.
Var max_pool_1xk(Tape& tape, Var x, std::size_t kernel = 2, std::size_t stride = 2);

struct BatchNormOptions {
  bool training = true;
  Real momentum = 0.1;
  Real eps = 1e-5;
};

/// Per-channel normalization over (batch, length). Training mode normalizes
/// with batch statistics and folds them into the running buffers (unbiased
/// variance); eval mode uses the running buffers.
Var batch_norm(Tape& tape, Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& opts);

/// [B x ...] -> [B x rest].
Var flatten(Tape& tape, Var x);

/// Identity forward; backward multiplies the incoming gradient by -lambda.
Var reverse_gradient(Tape& tape, Var x, Real lambda);

/// Mean over the batch of -log softmax(logits)[target], log-sum-exp stabilized.
Var cross_entropy(Tape& tape, Var logits, std::span<const int> targets);

Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, Real factor);
/// Sum of all elements weighted elementwise by a constant tensor of the same shape.
Var weighted_sum(Tape& tape, Var a, const Tensor& weights);

/// Row-wise softmax of a [rows x cols] tensor (not recorded).
Tensor softmax_rows(const Tensor& logits);

}  // namespace dvfy::nn
