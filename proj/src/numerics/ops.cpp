#include "dvfy/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dvfy/error.hpp"

namespace dvfy::nn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  require(t.rank() == rank, ErrorKind::kShape,
          std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_string(t.shape()));
}

}  // namespace

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  require_rank(xv, 2, "linear");
  require_rank(wv, 2, "linear");
  const std::size_t batch = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  require(wv.dim(1) == in && bv.size() == out, ErrorKind::kShape,
          "linear: input " + shape_string(xv.shape()) + " vs weight " + shape_string(wv.shape()));

  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* xr = &xv.data()[b * in];
    for (std::size_t o = 0; o < out; ++o) {
      const Real* wr = &wv.data()[o * in];
      Real acc = bv[o];
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      y.at(b, o) = acc;
    }
  }
  return tape.record(std::move(y), {x, weight, bias}, [x, weight, bias, batch, in, out](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(weight);
    if (t.requires_grad(x)) {
      Tensor& gx = t.grad_buffer(x);
      for (std::size_t b = 0; b < batch; ++b) {
        Real* gr = &gx.data()[b * in];
        for (std::size_t o = 0; o < out; ++o) {
          const Real go = g.at(b, o);
          if (go == 0.0) continue;
          const Real* wr = &wv.data()[o * in];
          for (std::size_t i = 0; i < in; ++i) gr[i] += go * wr[i];
        }
      }
    }
    if (t.requires_grad(weight)) {
      Tensor& gw = t.grad_buffer(weight);
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* xr = &xv.data()[b * in];
        for (std::size_t o = 0; o < out; ++o) {
          const Real go = g.at(b, o);
          if (go == 0.0) continue;
          Real* gr = &gw.data()[o * in];
          for (std::size_t i = 0; i < in; ++i) gr[i] += go * xr[i];
        }
      }
    }
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_buffer(bias);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out; ++o) gb[o] += g.at(b, o);
    }
  });
}

Var relu(Tape& tape, Var x) {
  Tensor y = tape.value(x);
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return tape.record(std::move(y), {x}, [x](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
}

Var conv1xk(Tape& tape, Var x, Var weight, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  require_rank(xv, 4, "conv1xk");
  require_rank(wv, 4, "conv1xk");
  const std::size_t batch = xv.dim(0), cin = xv.dim(1), len = xv.dim(3);
  const std::size_t cout = wv.dim(0), k = wv.dim(3);
  require(xv.dim(2) == 1 && wv.dim(2) == 1, ErrorKind::kShape, "conv1xk: height must be 1");
  require(wv.dim(1) == cin && bv.size() == cout, ErrorKind::kShape,
          "conv1xk: input " + shape_string(xv.shape()) + " vs weight " + shape_string(wv.shape()));
  require(len >= k, ErrorKind::kShape,
          "conv1xk: length " + std::to_string(len) + " shorter than kernel width " + std::to_string(k));
  const std::size_t lout = len - k + 1;

  Tensor y({batch, cout, 1, lout});
  auto yd = y.data();
  auto xd = xv.data();
  auto wd = wv.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      Real* yr = &yd[(b * cout + o) * lout];
      std::fill(yr, yr + lout, bv[o]);
      for (std::size_t c = 0; c < cin; ++c) {
        const Real* xr = &xd[(b * cin + c) * len];
        const Real* wr = &wd[(o * cin + c) * k];
        for (std::size_t j = 0; j < k; ++j) {
          const Real w = wr[j];
          const Real* xs = xr + j;
          for (std::size_t p = 0; p < lout; ++p) yr[p] += w * xs[p];
        }
      }
    }
  }
  return tape.record(std::move(y), {x, weight, bias},
                     [x, weight, bias, batch, cin, cout, len, k, lout](Tape& t, const Tensor& g) {
                       const bool want_x = t.requires_grad(x);
                       const bool want_w = t.requires_grad(weight);
                       const bool want_b = t.requires_grad(bias);
                       auto xd = t.value(x).data();
                       auto wd = t.value(weight).data();
                       auto gd = g.data();
                       Real* gx = want_x ? t.grad_buffer(x).data().data() : nullptr;
                       Real* gw = want_w ? t.grad_buffer(weight).data().data() : nullptr;
                       Real* gb = want_b ? t.grad_buffer(bias).data().data() : nullptr;
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t o = 0; o < cout; ++o) {
                           const Real* gr = &gd[(b * cout + o) * lout];
                           if (gb) {
                             Real s = 0.0;
                             for (std::size_t p = 0; p < lout; ++p) s += gr[p];
                             gb[o] += s;
                           }
                           for (std::size_t c = 0; c < cin; ++c) {
                             const Real* xr = &xd[(b * cin + c) * len];
                             const Real* wr = &wd[(o * cin + c) * k];
                             for (std::size_t j = 0; j < k; ++j) {
                               if (gw) {
                                 Real s = 0.0;
                                 const Real* xs = xr + j;
                                 for (std::size_t p = 0; p < lout; ++p) s += gr[p] * xs[p];
                                 gw[(o * cin + c) * k + j] += s;
                               }
                               if (gx) {
                                 const Real w = wr[j];
                                 Real* gxs = gx + (b * cin + c) * len + j;
                                 for (std::size_t p = 0; p < lout; ++p) gxs[p] += w * gr[p];
                               }
                             }
                           }
                         }
                       }
                     });
}

Var max_pool_1xk(Tape& tape, Var x, std::size_t kernel, std::size_t stride) {
  const Tensor& xv = tape.value(x);
  require_rank(xv, 4, "max_pool_1xk");
  require(kernel >= 1 && stride >= 1, ErrorKind::kInput, "max_pool_1xk: kernel and stride must be positive");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), len = xv.dim(3);
  require(len >= kernel, ErrorKind::kShape, "max_pool_1xk: length shorter than pool kernel");
  const std::size_t lout = (len - kernel) / stride + 1;

  Tensor y({batch, ch, 1, lout});
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t row = 0; row < batch * ch; ++row) {
    const Real* xr = &xv.data()[row * len];
    for (std::size_t p = 0; p < lout; ++p) {
      std::size_t best = p * stride;
      for (std::size_t j = 1; j < kernel; ++j)
        if (xr[p * stride + j] > xr[best]) best = p * stride + j;
      y[row * lout + p] = xr[best];
      argmax[row * lout + p] = row * len + best;
    }
  }
  return tape.record(std::move(y), {x}, [x, argmax = std::move(argmax)](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
  });
}

Var batch_norm(Tape& tape, Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& opts) {
  const Tensor& xv = tape.value(x);
  require_rank(xv, 4, "batch_norm");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), len = xv.dim(2) * xv.dim(3);
  const Tensor& gv = tape.value(gamma);
  const Tensor& bv = tape.value(beta);
  require(gv.size() == ch && bv.size() == ch && running_mean.size() == ch && running_var.size() == ch,
          ErrorKind::kShape, "batch_norm: channel count mismatch");
  require(!opts.training || batch > 1, ErrorKind::kInput, "batch_norm: batch size 1 in training mode");
  const std::size_t count = batch * len;

  Tensor mean({ch}), inv_std({ch});
  if (opts.training) {
    for (std::size_t c = 0; c < ch; ++c) {
      Real s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* xr = &xv.data()[(b * ch + c) * len];
        for (std::size_t p = 0; p < len; ++p) s += xr[p];
      }
      const Real mu = s / static_cast<Real>(count);
      Real ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* xr = &xv.data()[(b * ch + c) * len];
        for (std::size_t p = 0; p < len; ++p) ss += (xr[p] - mu) * (xr[p] - mu);
      }
      const Real var = ss / static_cast<Real>(count);
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + opts.eps);
      const Real unbiased = count > 1 ? ss / static_cast<Real>(count - 1) : var;
      running_mean[c] = (1.0 - opts.momentum) * running_mean[c] + opts.momentum * mu;
      running_var[c] = (1.0 - opts.momentum) * running_var[c] + opts.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(running_var[c] + opts.eps);
    }
  }

  Tensor xhat(xv.shape());
  Tensor y(xv.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t base = (b * ch + c) * len;
      for (std::size_t p = 0; p < len; ++p) {
        const Real h = (xv[base + p] - mean[c]) * inv_std[c];
        xhat[base + p] = h;
        y[base + p] = gv[c] * h + bv[c];
      }
    }
  }
  const bool training = opts.training;
  return tape.record(std::move(y), {x, gamma, beta},
                     [x, gamma, beta, xhat = std::move(xhat), inv_std, batch, ch, len, count, training](
                         Tape& t, const Tensor& g) {
                       const Tensor& gv = t.value(gamma);
                       std::vector<Real> sum_g(ch, 0.0), sum_gx(ch, 0.0);
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t c = 0; c < ch; ++c) {
                           const std::size_t base = (b * ch + c) * len;
                           for (std::size_t p = 0; p < len; ++p) {
                             sum_g[c] += g[base + p];
                             sum_gx[c] += g[base + p] * xhat[base + p];
                           }
                         }
                       if (t.requires_grad(gamma)) {
                         Tensor& gg = t.grad_buffer(gamma);
                         for (std::size_t c = 0; c < ch; ++c) gg[c] += sum_gx[c];
                       }
                       if (t.requires_grad(beta)) {
                         Tensor& gb = t.grad_buffer(beta);
                         for (std::size_t c = 0; c < ch; ++c) gb[c] += sum_g[c];
                       }
                       if (!t.requires_grad(x)) return;
                       Tensor& gx = t.grad_buffer(x);
                       const Real n = static_cast<Real>(count);
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t c = 0; c < ch; ++c) {
                           const std::size_t base = (b * ch + c) * len;
                           const Real scale = gv[c] * inv_std[c];
                           for (std::size_t p = 0; p < len; ++p) {
                             if (training) {
                               gx[base + p] += scale * (g[base + p] - sum_g[c] / n - xhat[base + p] * sum_gx[c] / n);
                             } else {
                               gx[base + p] += scale * g[base + p];
                             }
                           }
                         }
                     });
}

Var flatten(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  require(xv.rank() >= 1, ErrorKind::kShape, "flatten: rank 0");
  const std::size_t batch = xv.dim(0);
  Tensor y = xv.reshaped({batch, xv.size() / batch});
  return tape.record(std::move(y), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var reverse_gradient(Tape& tape, Var x, Real lambda) {
  require(lambda >= 0.0, ErrorKind::kInput, "reverse_gradient: lambda must be non-negative");
  Tensor y = tape.value(x);
  return tape.record(std::move(y), {x}, [x, lambda](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += -lambda * g[i];
  });
}

Var cross_entropy(Tape& tape, Var logits, std::span<const int> targets) {
  const Tensor& lv = tape.value(logits);
  require_rank(lv, 2, "cross_entropy");
  const std::size_t batch = lv.dim(0), classes = lv.dim(1);
  require(targets.size() == batch, ErrorKind::kInput,
          "cross_entropy: " + std::to_string(targets.size()) + " targets for batch of " + std::to_string(batch));
  require(lv.all_finite(), ErrorKind::kNumeric, "cross_entropy: non-finite logits");
  for (std::size_t b = 0; b < batch; ++b)
    require(targets[b] >= 0 && static_cast<std::size_t>(targets[b]) < classes, ErrorKind::kInput,
            "cross_entropy: target " + std::to_string(targets[b]) + " at row " + std::to_string(b) +
                " outside [0," + std::to_string(classes) + ")");

  Tensor probs = softmax_rows(lv);
  Real loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* row = &lv.data()[b * classes];
    const Real m = *std::max_element(row, row + classes);
    Real s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(row[c] - m);
    loss += (m + std::log(s)) - row[targets[b]];
  }
  loss /= static_cast<Real>(batch);
  std::vector<int> tgt(targets.begin(), targets.end());
  return tape.record(Tensor({1}, std::vector<Real>{loss}), {logits},
                     [logits, probs = std::move(probs), tgt = std::move(tgt), batch, classes](Tape& t,
                                                                                            const Tensor& g) {
                       Tensor& gl = t.grad_buffer(logits);
                       const Real scale = g[0] / static_cast<Real>(batch);
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t c = 0; c < classes; ++c) {
                           const Real onehot = static_cast<std::size_t>(tgt[b]) == c ? 1.0 : 0.0;
                           gl.at(b, c) += scale * (probs.at(b, c) - onehot);
                         }
                     });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require(av.shape() == bv.shape(), ErrorKind::kShape, "add: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return tape.record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var scale(Tape& tape, Var a, Real factor) {
  Tensor y = tape.value(a);
  for (auto& v : y.data()) v *= factor;
  return tape.record(std::move(y), {a}, [a, factor](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var weighted_sum(Tape& tape, Var a, const Tensor& weights) {
  const Tensor& av = tape.value(a);
  require(av.size() == weights.size(), ErrorKind::kShape, "weighted_sum: shape mismatch");
  Real s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * weights[i];
  return tape.record(Tensor({1}, std::vector<Real>{s}), {a}, [a, weights](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < weights.size(); ++i) ga[i] += g[0] * weights[i];
  });
}

Tensor softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax_rows");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* in = &logits.data()[r * cols];
    const Real m = *std::max_element(in, in + cols);
    Real s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out.at(r, c) = std::exp(in[c] - m);
      s += out.at(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= s;
  }
  return out;
}

}  // namespace dvfy::nn
