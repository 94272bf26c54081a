#include "approxfl/strategy.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <stdexcept>

namespace approxfl {
namespace {

std::vector<int> identity_window(int n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

long numel(const std::vector<int>& shape) {
  long n = 1;
  for (int d : shape) n *= d;
  return n;
}

// idx maps a sub-parameter flat index to the full-parameter flat index.
template <typename Fn>
void for_each_element(const std::vector<int>& full_shape,
                      const std::vector<int>& sub_shape, const ParamSlice& sl,
                      Fn&& fn) {
  if (sl.cols.empty()) {
    if (static_cast<int>(sl.rows.size()) != sub_shape[0]) {
      throw std::logic_error("mask row count does not match sub parameter");
    }
    const long rest = numel(sub_shape) / sub_shape[0];
    const long full_rest = numel(full_shape) / full_shape[0];
    if (rest != full_rest) throw std::logic_error("trailing dims differ");
    for (int i = 0; i < sub_shape[0]; ++i) {
      for (long t = 0; t < rest; ++t) {
        fn(static_cast<long>(i) * rest + t,
           static_cast<long>(sl.rows[i]) * rest + t);
      }
    }
    return;
  }
  if (full_shape.size() < 2 || sub_shape.size() < 2) {
    throw std::logic_error("column mask on a 1-D parameter");
  }
  if (static_cast<int>(sl.rows.size()) != sub_shape[0] ||
      static_cast<int>(sl.cols.size()) != sub_shape[1]) {
    throw std::logic_error("mask shape does not match sub parameter");
  }
  long rest = 1, full_rest = 1;
  for (std::size_t d = 2; d < sub_shape.size(); ++d) rest *= sub_shape[d];
  for (std::size_t d = 2; d < full_shape.size(); ++d) full_rest *= full_shape[d];
  if (rest != full_rest) throw std::logic_error("trailing dims differ");
  const long full_in = full_shape[1];
  const long sub_in = sub_shape[1];
  for (int i = 0; i < sub_shape[0]; ++i) {
    for (int j = 0; j < sub_shape[1]; ++j) {
      const long fbase = (static_cast<long>(sl.rows[i]) * full_in + sl.cols[j]) * rest;
      const long sbase = (static_cast<long>(i) * sub_in + j) * rest;
      for (long t = 0; t < rest; ++t) fn(sbase + t, fbase + t);
    }
  }
}

}  // namespace

StrategyKind strategy_from_name(const std::string& name) {
  std::string n;
  for (char c : name) n += (c == '_') ? '-' : static_cast<char>(std::tolower(c));
  if (n == "ours" || n == "energy-aware") return StrategyKind::Ours;
  if (n == "heterofl") return StrategyKind::HeteroFL;
  if (n == "fedrolex") return StrategyKind::FedRolex;
  if (n == "small-model" || n == "smallmodel") return StrategyKind::SmallModel;
  if (n == "drop-devices" || n == "dropdevices") return StrategyKind::DropDevices;
  if (n == "fedprox") return StrategyKind::FedProx;
  throw std::invalid_argument("unknown strategy: " + name);
}

const char* strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::Ours: return "ours";
    case StrategyKind::HeteroFL: return "heterofl";
    case StrategyKind::FedRolex: return "fedrolex";
    case StrategyKind::SmallModel: return "small-model";
    case StrategyKind::DropDevices: return "drop-devices";
    case StrategyKind::FedProx: return "fedprox";
  }
  return "?";
}

std::vector<int> channel_window(StrategyKind kind, int full, int sub, int round) {
  if (full <= 0 || sub <= 0 || sub > full) {
    throw std::invalid_argument("bad window sizes");
  }
  std::vector<int> idx(sub);
  if (kind == StrategyKind::FedRolex) {
    const int start = round % full;
    for (int i = 0; i < sub; ++i) idx[i] = (start + i) % full;
  } else {
    std::iota(idx.begin(), idx.end(), 0);
  }
  return idx;
}

SubsetMask build_subset_mask(const Program& full_prog, const Program& sub_prog,
                             StrategyKind kind, int round) {
  if (full_prog.ops.size() != sub_prog.ops.size() ||
      full_prog.params.size() != sub_prog.params.size()) {
    throw std::logic_error("programs do not share structure");
  }
  SubsetMask mask;
  mask.params.resize(full_prog.params.size());
  mask.slot_channels.resize(full_prog.slot_dims.size());

  for (std::size_t i = 0; i < full_prog.ops.size(); ++i) {
    const Op& fo = full_prog.ops[i];
    const Op& so = sub_prog.ops[i];
    if (fo.kind != so.kind) throw std::logic_error("op kinds diverge");
    switch (fo.kind) {
      case OpKind::Input:
        mask.slot_channels[fo.out] = identity_window(fo.out_dims.c);
        break;
      case OpKind::Conv:
      case OpKind::Dense: {
        const std::vector<int>& in_win = mask.slot_channels[fo.in0];
        if (static_cast<int>(in_win.size()) != so.in_ch) {
          throw std::logic_error("input window does not match sub width");
        }
        std::vector<int> out_win =
            fo.keep_full_out ? identity_window(fo.out_ch)
                             : channel_window(kind, fo.out_ch, so.out_ch, round);
        if (static_cast<int>(out_win.size()) != so.out_ch) {
          throw std::logic_error("output window does not match sub width");
        }
        mask.params[fo.w].rows = out_win;
        mask.params[fo.w].cols = in_win;
        if (fo.b >= 0) mask.params[fo.b].rows = out_win;
        mask.slot_channels[fo.out] = std::move(out_win);
        break;
      }
      case OpKind::BatchNorm: {
        const std::vector<int>& win = mask.slot_channels[fo.in0];
        if (static_cast<int>(win.size()) != so.out_dims.c) {
          throw std::logic_error("norm window does not match sub width");
        }
        mask.params[fo.gamma].rows = win;
        mask.params[fo.beta].rows = win;
        mask.params[fo.rmean].rows = win;
        mask.params[fo.rvar].rows = win;
        mask.slot_channels[fo.out] = win;
        break;
      }
      case OpKind::Add:
        if (mask.slot_channels[fo.in0] != mask.slot_channels[fo.in1]) {
          throw std::logic_error("residual branches carry different windows");
        }
        mask.slot_channels[fo.out] = mask.slot_channels[fo.in0];
        break;
      case OpKind::Relu:
      case OpKind::AvgPool:
      case OpKind::GlobalAvgPool:
        mask.slot_channels[fo.out] = mask.slot_channels[fo.in0];
        break;
      case OpKind::SoftmaxXent:
        break;
    }
  }
  return mask;
}

std::vector<Tensor> extract_submodel(const Program& full_prog,
                                     const Program& sub_prog,
                                     const SubsetMask& mask,
                                     const std::vector<Tensor>& full_params) {
  if (full_params.size() != full_prog.params.size()) {
    throw std::logic_error("parameter list does not match program");
  }
  std::vector<Tensor> out(sub_prog.params.size());
  for (std::size_t p = 0; p < sub_prog.params.size(); ++p) {
    out[p].shape = sub_prog.params[p].shape;
    out[p].data.resize(numel(out[p].shape), 0.0f);
    const float* src = full_params[p].data.data();
    float* dst = out[p].data.data();
    for_each_element(full_prog.params[p].shape, sub_prog.params[p].shape,
                     mask.params[p],
                     [&](long si, long fi) { dst[si] = src[fi]; });
  }
  return out;
}

MergeAccumulator::MergeAccumulator(const Program& full_prog) {
  shapes_.reserve(full_prog.params.size());
  for (const ParamMeta& pm : full_prog.params) {
    shapes_.push_back(pm.shape);
    sum_.emplace_back(numel(pm.shape), 0.0);
    weight_.emplace_back(numel(pm.shape), 0.0);
  }
}

void MergeAccumulator::add(const Program& sub_prog, const SubsetMask& mask,
                           const std::vector<Tensor>& sub_params,
                           double sample_weight) {
  if (sub_params.size() != shapes_.size()) {
    throw std::logic_error("client parameter list does not match server model");
  }
  for (std::size_t p = 0; p < shapes_.size(); ++p) {
    const float* src = sub_params[p].data.data();
    double* s = sum_[p].data();
    double* w = weight_[p].data();
    for_each_element(shapes_[p], sub_prog.params[p].shape, mask.params[p],
                     [&](long si, long fi) {
                       s[fi] += sample_weight * static_cast<double>(src[si]);
                       w[fi] += sample_weight;
                     });
  }
}

void MergeAccumulator::finish(std::vector<Tensor>& global_params) const {
  if (global_params.size() != shapes_.size()) {
    throw std::logic_error("global parameter list does not match server model");
  }
  for (std::size_t p = 0; p < shapes_.size(); ++p) {
    float* dst = global_params[p].data.data();
    const std::vector<double>& s = sum_[p];
    const std::vector<double>& w = weight_[p];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (w[i] > 0.0) dst[i] = static_cast<float>(s[i] / w[i]);
    }
  }
}

}  // namespace approxfl
