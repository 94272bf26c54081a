#pragma once

// Independent double-precision forward pass used as a finite-difference
// oracle for gradient checks. Mirrors the executor's layer semantics but
// keeps every intermediate in double.

#include <algorithm>
#include <cmath>
#include <vector>

#include "approxfl/model.hpp"
#include "approxfl/tensor.hpp"

namespace reftest {

// Mean cross-entropy loss of `prog` on a batch, training-mode batch norm.
inline double forward_loss(const approxfl::Program& prog,
                           const std::vector<approxfl::Tensor>& params,
                           const float* x, const int* y, int batch) {
  using approxfl::Op;
  using approxfl::OpKind;
  constexpr double kEps = 1e-5;
  const int B = batch;
  std::vector<std::vector<double>> slots(prog.slot_count());
  for (int s = 0; s < prog.slot_count(); ++s) {
    slots[s].assign(static_cast<std::size_t>(B) * prog.slot_dims[s].numel(), 0.0);
  }
  double loss = 0.0;
  for (const Op& op : prog.ops) {
    switch (op.kind) {
      case OpKind::Input: {
        const long n = static_cast<long>(B) * op.out_dims.numel();
        for (long i = 0; i < n; ++i) slots[op.out][i] = x[i];
        break;
      }
      case OpKind::Conv:
      case OpKind::Dense: {
        const auto& in = op.in_dims;
        const auto& out = op.out_dims;
        const float* w = params[op.w].ptr();
        const float* bias = op.bias ? params[op.b].ptr() : nullptr;
        for (int b = 0; b < B; ++b) {
          for (int oc = 0; oc < out.c; ++oc) {
            for (int ho = 0; ho < out.h; ++ho) {
              for (int wo = 0; wo < out.w; ++wo) {
                double acc = bias ? static_cast<double>(bias[oc]) : 0.0;
                for (int ic = 0; ic < in.c; ++ic) {
                  for (int kh = 0; kh < op.ksize; ++kh) {
                    const int hi = ho * op.stride - op.pad + kh;
                    if (hi < 0 || hi >= in.h) continue;
                    for (int kw = 0; kw < op.ksize; ++kw) {
                      const int wi = wo * op.stride - op.pad + kw;
                      if (wi < 0 || wi >= in.w) continue;
                      const double xv =
                          slots[op.in0][((static_cast<long>(b) * in.c + ic) * in.h + hi) * in.w +
                                        wi];
                      const double wv =
                          w[((static_cast<long>(oc) * in.c + ic) * op.ksize + kh) * op.ksize + kw];
                      acc += xv * wv;
                    }
                  }
                }
                slots[op.out][((static_cast<long>(b) * out.c + oc) * out.h + ho) * out.w + wo] =
                    acc;
              }
            }
          }
        }
        break;
      }
      case OpKind::BatchNorm: {
        const int C = op.out_dims.c;
        const long hw = static_cast<long>(op.out_dims.h) * op.out_dims.w;
        const long n = static_cast<long>(B) * hw;
        const float* gamma = params[op.gamma].ptr();
        const float* beta = params[op.beta].ptr();
        for (int c = 0; c < C; ++c) {
          double sum = 0.0, sq = 0.0;
          for (int b = 0; b < B; ++b) {
            const double* xc = slots[op.in0].data() + (static_cast<long>(b) * C + c) * hw;
            for (long i = 0; i < hw; ++i) {
              sum += xc[i];
              sq += xc[i] * xc[i];
            }
          }
          const double mean = sum / n;
          const double var = std::max(0.0, sq / n - mean * mean);
          const double inv = 1.0 / std::sqrt(var + kEps);
          for (int b = 0; b < B; ++b) {
            const double* xc = slots[op.in0].data() + (static_cast<long>(b) * C + c) * hw;
            double* oc = slots[op.out].data() + (static_cast<long>(b) * C + c) * hw;
            for (long i = 0; i < hw; ++i) {
              oc[i] = gamma[c] * ((xc[i] - mean) * inv) + beta[c];
            }
          }
        }
        break;
      }
      case OpKind::Relu: {
        const long n = static_cast<long>(B) * op.out_dims.numel();
        for (long i = 0; i < n; ++i) slots[op.out][i] = std::max(0.0, slots[op.in0][i]);
        break;
      }
      case OpKind::AvgPool: {
        const auto& in = op.in_dims;
        const auto& out = op.out_dims;
        const int k = op.ksize;
        for (int b = 0; b < B; ++b) {
          for (int c = 0; c < out.c; ++c) {
            for (int ho = 0; ho < out.h; ++ho) {
              for (int wo = 0; wo < out.w; ++wo) {
                double acc = 0.0;
                for (int kh = 0; kh < k; ++kh) {
                  for (int kw = 0; kw < k; ++kw) {
                    acc += slots[op.in0][((static_cast<long>(b) * in.c + c) * in.h + ho * k + kh) *
                                             in.w +
                                         wo * k + kw];
                  }
                }
                slots[op.out][((static_cast<long>(b) * out.c + c) * out.h + ho) * out.w + wo] =
                    acc / (k * k);
              }
            }
          }
        }
        break;
      }
      case OpKind::GlobalAvgPool: {
        const auto& in = op.in_dims;
        const long hw = static_cast<long>(in.h) * in.w;
        for (int b = 0; b < B; ++b) {
          for (int c = 0; c < in.c; ++c) {
            double acc = 0.0;
            const double* xc = slots[op.in0].data() + (static_cast<long>(b) * in.c + c) * hw;
            for (long i = 0; i < hw; ++i) acc += xc[i];
            slots[op.out][static_cast<long>(b) * in.c + c] = acc / hw;
          }
        }
        break;
      }
      case OpKind::Add: {
        const long n = static_cast<long>(B) * op.out_dims.numel();
        for (long i = 0; i < n; ++i) {
          slots[op.out][i] = slots[op.in0][i] + slots[op.in1][i];
        }
        break;
      }
      case OpKind::SoftmaxXent: {
        const int J = op.in_dims.c;
        for (int b = 0; b < B; ++b) {
          const double* lb = slots[op.in0].data() + static_cast<long>(b) * J;
          double mx = lb[0];
          for (int j = 1; j < J; ++j) mx = std::max(mx, lb[j]);
          double denom = 0.0;
          for (int j = 0; j < J; ++j) denom += std::exp(lb[j] - mx);
          const double p = std::max(std::exp(lb[y[b]] - mx) / denom, 1e-30);
          loss -= std::log(p);
        }
        break;
      }
    }
  }
  return loss / B;
}

// Central finite difference on one parameter element. The perturbed values
// are rounded to float first (the executor stores parameters as floats) and
// the difference quotient uses the realized float step.
inline double fd_gradient(const approxfl::Program& prog, std::vector<approxfl::Tensor> params,
                          int pi, std::size_t ei, const float* x, const int* y, int batch,
                          double eps = 1e-4) {
  const float w0 = params[pi].ptr()[ei];
  const float wp = static_cast<float>(static_cast<double>(w0) + eps);
  const float wm = static_cast<float>(static_cast<double>(w0) - eps);
  params[pi].ptr()[ei] = wp;
  const double lp = forward_loss(prog, params, x, y, batch);
  params[pi].ptr()[ei] = wm;
  const double lm = forward_loss(prog, params, x, y, batch);
  return (lp - lm) / (static_cast<double>(wp) - static_cast<double>(wm));
}

}  // namespace reftest
