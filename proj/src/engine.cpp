#include "approxfl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace approxfl {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

struct ExactMul {
  float operator()(float a, float b) const { return a * b; }
};

struct LogMul {
  std::uint32_t c_fix;
  float operator()(float a, float b) const {
    const std::uint32_t ua = std::bit_cast<std::uint32_t>(a);
    const std::uint32_t ub = std::bit_cast<std::uint32_t>(b);
    if ((ua & detail::kExpMask) == 0 || (ub & detail::kExpMask) == 0) {
      return std::bit_cast<float>((ua ^ ub) & detail::kSignMask);
    }
    return std::bit_cast<float>(detail::log_mul_bits(ua, ub, c_fix));
  }
};

struct Dims {
  int c, h, w;
};

template <class Mul>
void conv_fwd(const float* x, const float* w, float* y, int B, Dims in,
              Dims out, int k, int stride, int pad, Mul mul) {
  const long in_hw = static_cast<long>(in.h) * in.w;
  const long in_sz = in.c * in_hw;
  const long out_hw = static_cast<long>(out.h) * out.w;
  const long out_sz = out.c * out_hw;
  for (int b = 0; b < B; ++b) {
    const float* xb = x + b * in_sz;
    float* yb = y + b * out_sz;
    for (int q = 0; q < out.c; ++q) {
      const float* wq = w + static_cast<long>(q) * in.c * k * k;
      for (int ho = 0; ho < out.h; ++ho) {
        for (int wo = 0; wo < out.w; ++wo) {
          float acc = 0.0f;
          for (int p = 0; p < in.c; ++p) {
            const float* xp = xb + p * in_hw;
            const float* wp = wq + static_cast<long>(p) * k * k;
            for (int kh = 0; kh < k; ++kh) {
              const int hi = ho * stride - pad + kh;
              if (hi < 0 || hi >= in.h) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int wi = wo * stride - pad + kw;
                if (wi < 0 || wi >= in.w) continue;
                acc += mul(xp[hi * in.w + wi], wp[kh * k + kw]);
              }
            }
          }
          yb[q * out_hw + ho * out.w + wo] = acc;
        }
      }
    }
  }
}

template <class Mul>
void conv_bwd_input(const float* dy, const float* w, float* dx, int B, Dims in,
                    Dims out, int k, int stride, int pad, Mul mul) {
  const long in_hw = static_cast<long>(in.h) * in.w;
  const long in_sz = in.c * in_hw;
  const long out_hw = static_cast<long>(out.h) * out.w;
  const long out_sz = out.c * out_hw;
  for (int b = 0; b < B; ++b) {
    const float* dyb = dy + b * out_sz;
    float* dxb = dx + b * in_sz;
    for (int p = 0; p < in.c; ++p) {
      for (int hi = 0; hi < in.h; ++hi) {
        for (int wi = 0; wi < in.w; ++wi) {
          float acc = 0.0f;
          for (int q = 0; q < out.c; ++q) {
            const float* wq = w + (static_cast<long>(q) * in.c + p) * k * k;
            const float* dyq = dyb + q * out_hw;
            for (int kh = 0; kh < k; ++kh) {
              const int ho_num = hi + pad - kh;
              if (ho_num < 0 || ho_num % stride != 0) continue;
              const int ho = ho_num / stride;
              if (ho >= out.h) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int wo_num = wi + pad - kw;
                if (wo_num < 0 || wo_num % stride != 0) continue;
                const int wo = wo_num / stride;
                if (wo >= out.w) continue;
                acc += mul(dyq[ho * out.w + wo], wq[kh * k + kw]);
              }
            }
          }
          dxb[p * in_hw + hi * in.w + wi] = acc;
        }
      }
    }
  }
}

template <class Mul>
void conv_bwd_weight(const float* x, const float* dy, float* dw, int B,
                     Dims in, Dims out, int k, int stride, int pad, Mul mul) {
  const long in_hw = static_cast<long>(in.h) * in.w;
  const long in_sz = in.c * in_hw;
  const long out_hw = static_cast<long>(out.h) * out.w;
  const long out_sz = out.c * out_hw;
  for (int q = 0; q < out.c; ++q) {
    for (int p = 0; p < in.c; ++p) {
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          float acc = 0.0f;
          for (int b = 0; b < B; ++b) {
            const float* xp = x + b * in_sz + p * in_hw;
            const float* dyq = dy + b * out_sz + q * out_hw;
            for (int ho = 0; ho < out.h; ++ho) {
              const int hi = ho * stride - pad + kh;
              if (hi < 0 || hi >= in.h) continue;
              for (int wo = 0; wo < out.w; ++wo) {
                const int wi = wo * stride - pad + kw;
                if (wi < 0 || wi >= in.w) continue;
                acc += mul(xp[hi * in.w + wi], dyq[ho * out.w + wo]);
              }
            }
          }
          dw[((static_cast<long>(q) * in.c + p) * k + kh) * k + kw] = acc;
        }
      }
    }
  }
}

// Dense layers reuse the conv kernels with 1x1 spatial dims.

struct BnCache {
  std::vector<float> mean, inv_std, xhat;
};

}  // namespace

namespace {

class Executor {
 public:
  Executor(const Program& prog, const ExecSpec& spec, int batch)
      : prog_(prog), spec_(spec), B_(batch) {
    acts_.resize(prog.slot_count());
    for (int s = 0; s < prog.slot_count(); ++s) {
      acts_[s].assign(static_cast<std::size_t>(B_) * prog.slot_dims[s].numel(), 0.0f);
    }
  }

  template <class Mul>
  void mat_fwd(const Op& op, const std::vector<Tensor>& params, Mul mul) {
    const Dims in{op.in_dims.c, op.in_dims.h, op.in_dims.w};
    const Dims out{op.out_dims.c, op.out_dims.h, op.out_dims.w};
    conv_fwd(acts_[op.in0].data(), params[op.w].ptr(), acts_[op.out].data(), B_,
             in, out, op.ksize, op.stride, op.pad, mul);
    if (op.bias) {
      float* y = acts_[op.out].data();
      const float* bias = params[op.b].ptr();
      const long hw = static_cast<long>(out.h) * out.w;
      for (int b = 0; b < B_; ++b) {
        for (int q = 0; q < out.c; ++q) {
          float* yq = y + (static_cast<long>(b) * out.c + q) * hw;
          for (long i = 0; i < hw; ++i) yq[i] += bias[q];
        }
      }
    }
  }

  double forward(std::vector<Tensor>& params, const float* x, const int* y,
                 bool training) {
    const Op& in_op = prog_.ops.front();
    const std::size_t in_n = acts_[in_op.out].size();
    std::memcpy(acts_[in_op.out].data(), x, in_n * sizeof(float));
    round_span(acts_[in_op.out].data(), in_n, spec_.format);
    bn_cache_.assign(prog_.ops.size(), {});
    double loss = 0.0;
    for (std::size_t oi = 0; oi < prog_.ops.size(); ++oi) {
      const Op& op = prog_.ops[oi];
      switch (op.kind) {
        case OpKind::Input:
          continue;
        case OpKind::Conv:
        case OpKind::Dense:
          if (spec_.multiplier.kind == MultiplierKind::Exact) {
            mat_fwd(op, params, ExactMul{});
          } else {
            mat_fwd(op, params, LogMul{spec_.multiplier.correction_fixed()});
          }
          break;
        case OpKind::BatchNorm:
          bn_forward(op, params, training, bn_cache_[oi]);
          break;
        case OpKind::Relu: {
          const float* in = acts_[op.in0].data();
          float* out = acts_[op.out].data();
          const std::size_t n = acts_[op.out].size();
          for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
          break;
        }
        case OpKind::AvgPool:
          pool_forward(op);
          break;
        case OpKind::GlobalAvgPool:
          gap_forward(op);
          break;
        case OpKind::Add: {
          const float* a = acts_[op.in0].data();
          const float* b = acts_[op.in1].data();
          float* out = acts_[op.out].data();
          const std::size_t n = acts_[op.out].size();
          for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
          break;
        }
        case OpKind::SoftmaxXent:
          loss = softmax_loss(op, y);
          continue;  // logits copy handled inside
      }
      round_span(acts_[op.out].data(), acts_[op.out].size(), spec_.format);
    }
    return loss;
  }

  void backward(std::vector<Tensor>& params, const int* y, Grads& grads) {
    grads_.assign(prog_.slot_count(), {});
    for (int s = 0; s < prog_.slot_count(); ++s) {
      grads_[s].assign(acts_[s].size(), 0.0f);
    }
    grads.assign(params.size(), Tensor{});
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (prog_.params[i].trainable) grads[i] = Tensor(prog_.params[i].shape);
    }
    for (std::size_t oi = prog_.ops.size(); oi-- > 0;) {
      const Op& op = prog_.ops[oi];
      switch (op.kind) {
        case OpKind::Input:
          break;
        case OpKind::SoftmaxXent:
          softmax_backward(op, y);
          break;
        case OpKind::Conv:
        case OpKind::Dense:
          if (spec_.multiplier.kind == MultiplierKind::Exact) {
            mat_bwd(op, params, grads, ExactMul{});
          } else {
            mat_bwd(op, params, grads, LogMul{spec_.multiplier.correction_fixed()});
          }
          break;
        case OpKind::BatchNorm:
          bn_backward(op, params, grads, bn_cache_[oi]);
          break;
        case OpKind::Relu: {
          const float* in = acts_[op.in0].data();
          const float* dy = grads_[op.out].data();
          float* dx = grads_[op.in0].data();
          const std::size_t n = grads_[op.out].size();
          for (std::size_t i = 0; i < n; ++i) dx[i] += in[i] > 0.0f ? dy[i] : 0.0f;
          round_span(dx, n, spec_.format);
          break;
        }
        case OpKind::AvgPool:
          pool_backward(op);
          break;
        case OpKind::GlobalAvgPool:
          gap_backward(op);
          break;
        case OpKind::Add: {
          const float* dy = grads_[op.out].data();
          float* da = grads_[op.in0].data();
          float* db = grads_[op.in1].data();
          const std::size_t n = grads_[op.out].size();
          for (std::size_t i = 0; i < n; ++i) da[i] += dy[i];
          for (std::size_t i = 0; i < n; ++i) db[i] += dy[i];
          break;
        }
      }
    }
  }

  const std::vector<float>& logits() const { return acts_[logit_slot_]; }
  const std::vector<float>& probs() const { return acts_[prog_.ops.back().out]; }

 private:
  void bn_forward(const Op& op, std::vector<Tensor>& params, bool training,
                  BnCache& cache) {
    const int C = op.out_dims.c;
    const long hw = static_cast<long>(op.out_dims.h) * op.out_dims.w;
    const long n = static_cast<long>(B_) * hw;
    const float* x = acts_[op.in0].data();
    float* out = acts_[op.out].data();
    const float* gamma = params[op.gamma].ptr();
    const float* beta = params[op.beta].ptr();
    cache.mean.assign(C, 0.0f);
    cache.inv_std.assign(C, 0.0f);
    if (training) {
      cache.xhat.assign(acts_[op.out].size(), 0.0f);
      float* rmean = params[op.rmean].ptr();
      float* rvar = params[op.rvar].ptr();
      for (int c = 0; c < C; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int b = 0; b < B_; ++b) {
          const float* xc = x + (static_cast<long>(b) * C + c) * hw;
          for (long i = 0; i < hw; ++i) {
            sum += xc[i];
            sq += static_cast<double>(xc[i]) * xc[i];
          }
        }
        const double mean = sum / n;
        const double var = std::max(0.0, sq / n - mean * mean);
        cache.mean[c] = static_cast<float>(mean);
        const double inv = 1.0 / std::sqrt(var + kBnEps);
        cache.inv_std[c] = static_cast<float>(inv);
        rmean[c] = static_cast<float>((1.0 - kBnMomentum) * rmean[c] + kBnMomentum * mean);
        rvar[c] = static_cast<float>((1.0 - kBnMomentum) * rvar[c] + kBnMomentum * var);
        for (int b = 0; b < B_; ++b) {
          const float* xc = x + (static_cast<long>(b) * C + c) * hw;
          float* oc = out + (static_cast<long>(b) * C + c) * hw;
          float* hc = cache.xhat.data() + (static_cast<long>(b) * C + c) * hw;
          for (long i = 0; i < hw; ++i) {
            const float xh = static_cast<float>((xc[i] - mean) * inv);
            hc[i] = xh;
            oc[i] = gamma[c] * xh + beta[c];
          }
        }
      }
    } else {
      const float* rmean = params[op.rmean].ptr();
      const float* rvar = params[op.rvar].ptr();
      for (int c = 0; c < C; ++c) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(rvar[c]) + kBnEps);
        for (int b = 0; b < B_; ++b) {
          const float* xc = x + (static_cast<long>(b) * C + c) * hw;
          float* oc = out + (static_cast<long>(b) * C + c) * hw;
          for (long i = 0; i < hw; ++i) {
            oc[i] = static_cast<float>(gamma[c] * (xc[i] - rmean[c]) * inv + beta[c]);
          }
        }
      }
    }
  }

  void bn_backward(const Op& op, std::vector<Tensor>& params, Grads& grads,
                   const BnCache& cache) {
    const int C = op.out_dims.c;
    const long hw = static_cast<long>(op.out_dims.h) * op.out_dims.w;
    const long n = static_cast<long>(B_) * hw;
    const float* dy = grads_[op.out].data();
    const float* xhat = cache.xhat.data();
    float* dx = grads_[op.in0].data();
    const float* gamma = params[op.gamma].ptr();
    float* dgamma = grads[op.gamma].ptr();
    float* dbeta = grads[op.beta].ptr();
    for (int c = 0; c < C; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int b = 0; b < B_; ++b) {
        const long base = (static_cast<long>(b) * C + c) * hw;
        for (long i = 0; i < hw; ++i) {
          sum_dy += dy[base + i];
          sum_dy_xhat += static_cast<double>(dy[base + i]) * xhat[base + i];
        }
      }
      dgamma[c] = static_cast<float>(sum_dy_xhat);
      dbeta[c] = static_cast<float>(sum_dy);
      const double mean_dy = sum_dy / n;
      const double mean_dy_xhat = sum_dy_xhat / n;
      const double scale = gamma[c] * cache.inv_std[c];
      for (int b = 0; b < B_; ++b) {
        const long base = (static_cast<long>(b) * C + c) * hw;
        for (long i = 0; i < hw; ++i) {
          dx[base + i] += static_cast<float>(
              scale * (dy[base + i] - mean_dy - xhat[base + i] * mean_dy_xhat));
        }
      }
    }
    round_span(dx, grads_[op.in0].size(), spec_.format);
    round_span(dgamma, static_cast<std::size_t>(C), spec_.format);
    round_span(dbeta, static_cast<std::size_t>(C), spec_.format);
  }

  void pool_forward(const Op& op) {
    const int k = op.ksize;
    const float inv = 1.0f / (k * k);
    const Dims in{op.in_dims.c, op.in_dims.h, op.in_dims.w};
    const Dims out{op.out_dims.c, op.out_dims.h, op.out_dims.w};
    const float* x = acts_[op.in0].data();
    float* y = acts_[op.out].data();
    const long in_hw = static_cast<long>(in.h) * in.w;
    const long out_hw = static_cast<long>(out.h) * out.w;
    for (int b = 0; b < B_; ++b) {
      for (int c = 0; c < in.c; ++c) {
        const float* xc = x + (static_cast<long>(b) * in.c + c) * in_hw;
        float* yc = y + (static_cast<long>(b) * out.c + c) * out_hw;
        for (int ho = 0; ho < out.h; ++ho) {
          for (int wo = 0; wo < out.w; ++wo) {
            float acc = 0.0f;
            for (int kh = 0; kh < k; ++kh) {
              for (int kw = 0; kw < k; ++kw) {
                acc += xc[(ho * k + kh) * in.w + wo * k + kw];
              }
            }
            yc[ho * out.w + wo] = acc * inv;
          }
        }
      }
    }
  }

  void pool_backward(const Op& op) {
    const int k = op.ksize;
    const float inv = 1.0f / (k * k);
    const Dims in{op.in_dims.c, op.in_dims.h, op.in_dims.w};
    const Dims out{op.out_dims.c, op.out_dims.h, op.out_dims.w};
    const float* dy = grads_[op.out].data();
    float* dx = grads_[op.in0].data();
    const long in_hw = static_cast<long>(in.h) * in.w;
    const long out_hw = static_cast<long>(out.h) * out.w;
    for (int b = 0; b < B_; ++b) {
      for (int c = 0; c < in.c; ++c) {
        const float* dyc = dy + (static_cast<long>(b) * out.c + c) * out_hw;
        float* dxc = dx + (static_cast<long>(b) * in.c + c) * in_hw;
        for (int ho = 0; ho < out.h; ++ho) {
          for (int wo = 0; wo < out.w; ++wo) {
            const float g = dyc[ho * out.w + wo] * inv;
            for (int kh = 0; kh < k; ++kh) {
              for (int kw = 0; kw < k; ++kw) {
                dxc[(ho * k + kh) * in.w + wo * k + kw] += g;
              }
            }
          }
        }
      }
    }
    round_span(dx, grads_[op.in0].size(), spec_.format);
  }

  void gap_forward(const Op& op) {
    const Dims in{op.in_dims.c, op.in_dims.h, op.in_dims.w};
    const long in_hw = static_cast<long>(in.h) * in.w;
    const float inv = 1.0f / static_cast<float>(in_hw);
    const float* x = acts_[op.in0].data();
    float* y = acts_[op.out].data();
    for (int b = 0; b < B_; ++b) {
      for (int c = 0; c < in.c; ++c) {
        const float* xc = x + (static_cast<long>(b) * in.c + c) * in_hw;
        float acc = 0.0f;
        for (long i = 0; i < in_hw; ++i) acc += xc[i];
        y[static_cast<long>(b) * in.c + c] = acc * inv;
      }
    }
  }

  void gap_backward(const Op& op) {
    const Dims in{op.in_dims.c, op.in_dims.h, op.in_dims.w};
    const long in_hw = static_cast<long>(in.h) * in.w;
    const float inv = 1.0f / static_cast<float>(in_hw);
    const float* dy = grads_[op.out].data();
    float* dx = grads_[op.in0].data();
    for (int b = 0; b < B_; ++b) {
      for (int c = 0; c < in.c; ++c) {
        const float g = dy[static_cast<long>(b) * in.c + c] * inv;
        float* dxc = dx + (static_cast<long>(b) * in.c + c) * in_hw;
        for (long i = 0; i < in_hw; ++i) dxc[i] += g;
      }
    }
    round_span(dx, grads_[op.in0].size(), spec_.format);
  }

  double softmax_loss(const Op& op, const int* y) {
    logit_slot_ = op.in0;
    const int J = op.in_dims.c;
    const float* logits = acts_[op.in0].data();
    float* probs = acts_[op.out].data();
    double loss = 0.0;
    for (int b = 0; b < B_; ++b) {
      const float* lb = logits + static_cast<long>(b) * J;
      float* pb = probs + static_cast<long>(b) * J;
      float mx = lb[0];
      for (int j = 1; j < J; ++j) mx = std::max(mx, lb[j]);
      double denom = 0.0;
      for (int j = 0; j < J; ++j) denom += std::exp(static_cast<double>(lb[j]) - mx);
      for (int j = 0; j < J; ++j) {
        pb[j] = static_cast<float>(std::exp(static_cast<double>(lb[j]) - mx) / denom);
      }
      if (y) {
        const double p = std::max(static_cast<double>(pb[y[b]]), 1e-30);
        loss -= std::log(p);
      }
    }
    return y ? loss / B_ : 0.0;
  }

  void softmax_backward(const Op& op, const int* y) {
    const int J = op.in_dims.c;
    const float* probs = acts_[op.out].data();
    float* dl = grads_[op.in0].data();
    const float invb = 1.0f / static_cast<float>(B_);
    for (int b = 0; b < B_; ++b) {
      const float* pb = probs + static_cast<long>(b) * J;
      float* db = dl + static_cast<long>(b) * J;
      for (int j = 0; j < J; ++j) {
        db[j] = (pb[j] - (j == y[b] ? 1.0f : 0.0f)) * invb;
      }
    }
    round_span(dl, static_cast<std::size_t>(B_) * J, spec_.format);
  }

  template <class Mul>
  void mat_bwd(const Op& op, std::vector<Tensor>& params, Grads& grads, Mul mul) {
    const Dims in{op.in_dims.c, op.in_dims.h, op.in_dims.w};
    const Dims out{op.out_dims.c, op.out_dims.h, op.out_dims.w};
    const float* dy = grads_[op.out].data();
    if (op.bias) {
      float* db = grads[op.b].ptr();
      const long hw = static_cast<long>(out.h) * out.w;
      for (int b = 0; b < B_; ++b) {
        for (int q = 0; q < out.c; ++q) {
          const float* dyq = dy + (static_cast<long>(b) * out.c + q) * hw;
          float acc = db[q];
          for (long i = 0; i < hw; ++i) acc += dyq[i];
          db[q] = acc;
        }
      }
      round_span(db, static_cast<std::size_t>(out.c), spec_.format);
    }
    conv_bwd_weight(acts_[op.in0].data(), dy, grads[op.w].ptr(), B_, in, out,
                    op.ksize, op.stride, op.pad, mul);
    round_span(grads[op.w].ptr(), grads[op.w].numel(), spec_.format);
    if (!op.first_sa) {
      std::vector<float> dx(acts_[op.in0].size(), 0.0f);
      conv_bwd_input(dy, params[op.w].ptr(), dx.data(), B_, in, out, op.ksize,
                     op.stride, op.pad, mul);
      round_span(dx.data(), dx.size(), spec_.format);
      float* acc = grads_[op.in0].data();
      for (std::size_t i = 0; i < dx.size(); ++i) acc[i] += dx[i];
    }
  }

  const Program& prog_;
  ExecSpec spec_;
  int B_;
  std::vector<std::vector<float>> acts_;
  std::vector<std::vector<float>> grads_;
  std::vector<BnCache> bn_cache_;
  int logit_slot_ = -1;
};

}  // namespace

double train_step(const Program& prog, std::vector<Tensor>& params,
                  const float* x, const int* y, int batch,
                  const ExecSpec& spec, Grads& grads) {
  Executor ex(prog, spec, batch);
  auto working = params;  // device copy in storage format
  for (std::size_t i = 0; i < working.size(); ++i) {
    round_tensor(working[i], spec.format);
  }
  const double loss = ex.forward(working, x, y, true);
  ex.backward(working, y, grads);
  // Running statistics advance on the device; keep the master copy current.
  for (std::size_t i = 0; i < params.size(); ++i) {
    const char role = prog.params[i].role;
    if (role == 'm' || role == 'v') params[i] = working[i];
  }
  return loss;
}

EvalResult evaluate(const Program& prog, const std::vector<Tensor>& params,
                    const float* x, const int* y, int batch,
                    const ExecSpec& spec) {
  Executor ex(prog, spec, batch);
  auto working = params;
  for (std::size_t i = 0; i < working.size(); ++i) {
    round_tensor(working[i], spec.format);
  }
  EvalResult r;
  r.loss = ex.forward(working, x, y, false);
  const std::vector<float>& probs = ex.probs();
  const int J = prog.classes;
  r.predictions.resize(batch);
  for (int b = 0; b < batch; ++b) {
    const float* pb = probs.data() + static_cast<long>(b) * J;
    int best = 0;
    for (int j = 1; j < J; ++j) {
      if (pb[j] > pb[best]) best = j;
    }
    r.predictions[b] = best;
  }
  return r;
}

LocalTrainResult local_train(const Program& prog,
                             const std::vector<Tensor>& start,
                             const float* data, const int* labels,
                             const std::vector<int>& shard,
                             int sample_elems, const ExecSpec& spec,
                             const LocalTrainConfig& cfg, Rng& rng) {
  if (cfg.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (cfg.batch_fraction <= 0.0 || cfg.batch_fraction > 1.0) {
    throw std::invalid_argument("batch_fraction must be in (0, 1]");
  }
  LocalTrainResult res;
  res.params = start;  // fp32 master copy
  res.samples = static_cast<int>(shard.size());
  if (shard.empty()) return res;
  const std::vector<Tensor>& anchor = start;
  std::vector<int> order = shard;
  std::vector<float> xbuf;
  std::vector<int> ybuf;
  Grads grads;
  double loss_sum = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    const int nb = static_cast<int>((order.size() + cfg.batch_size - 1) / cfg.batch_size);
    const int take = static_cast<int>(std::ceil(cfg.batch_fraction * nb));
    for (int bi = 0; bi < take; ++bi) {
      const int lo = bi * cfg.batch_size;
      const int hi = std::min<int>(lo + cfg.batch_size, static_cast<int>(order.size()));
      const int bs = hi - lo;
      xbuf.resize(static_cast<std::size_t>(bs) * sample_elems);
      ybuf.resize(bs);
      for (int i = 0; i < bs; ++i) {
        const int s = order[lo + i];
        std::memcpy(xbuf.data() + static_cast<std::size_t>(i) * sample_elems,
                    data + static_cast<std::size_t>(s) * sample_elems,
                    sizeof(float) * sample_elems);
        ybuf[i] = labels[s];
      }
      loss_sum += train_step(prog, res.params, xbuf.data(), ybuf.data(), bs,
                             spec, grads);
      ++res.steps;
      for (std::size_t p = 0; p < res.params.size(); ++p) {
        if (!prog.params[p].trainable) continue;
        float* w = res.params[p].ptr();
        const float* g = grads[p].ptr();
        const float* a = anchor[p].ptr();
        const std::size_t n = res.params[p].numel();
        if (cfg.prox_mu != 0.0f) {
          for (std::size_t i = 0; i < n; ++i) {
            w[i] -= cfg.lr * (g[i] + cfg.prox_mu * (w[i] - a[i]));
          }
        } else {
          for (std::size_t i = 0; i < n; ++i) w[i] -= cfg.lr * g[i];
        }
      }
    }
  }
  res.mean_loss = res.steps ? loss_sum / res.steps : 0.0;
  res.trace = minibatch_trace(prog, cfg.batch_size);
  return res;
}

}  // namespace approxfl
