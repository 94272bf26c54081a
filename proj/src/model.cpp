#include "approxfl/model.hpp"

#include <cmath>
#include <stdexcept>

namespace approxfl {

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Input: return "input";
    case OpKind::Conv: return "conv";
    case OpKind::Dense: return "dense";
    case OpKind::BatchNorm: return "bn";
    case OpKind::Relu: return "relu";
    case OpKind::AvgPool: return "avgpool";
    case OpKind::GlobalAvgPool: return "globalavgpool";
    case OpKind::Add: return "add";
    default: return "softmax_xent";
  }
}

long Program::trainable_elems() const {
  long n = 0;
  for (const auto& p : params) {
    if (p.trainable) n += static_cast<long>(Tensor::numel_of(p.shape));
  }
  return n;
}

long Program::param_elems() const {
  long n = 0;
  for (const auto& p : params) n += static_cast<long>(Tensor::numel_of(p.shape));
  return n;
}

namespace {

struct Builder {
  Program prog;
  bool saw_sa = false;

  int new_slot(TensorDims d) {
    prog.slot_dims.push_back(d);
    return static_cast<int>(prog.slot_dims.size()) - 1;
  }

  int add_param(int op_index, char role, std::vector<int> shape, bool trainable) {
    prog.params.push_back({op_index, role, std::move(shape), trainable});
    return static_cast<int>(prog.params.size()) - 1;
  }

  int emit(Op op) {
    prog.ops.push_back(op);
    return static_cast<int>(prog.ops.size()) - 1;
  }

  int conv(int in_slot, int out_ch, int k, int stride, int pad, bool bias) {
    const TensorDims in = prog.slot_dims[in_slot];
    if (pad < 0) pad = k / 2;
    TensorDims out;
    out.c = out_ch;
    out.h = (in.h + 2 * pad - k) / stride + 1;
    out.w = (in.w + 2 * pad - k) / stride + 1;
    if (out.h <= 0 || out.w <= 0) throw std::invalid_argument("conv output collapses");
    Op op;
    op.kind = OpKind::Conv;
    op.in0 = in_slot;
    op.out = new_slot(out);
    op.in_ch = in.c;
    op.out_ch = out_ch;
    op.ksize = k;
    op.stride = stride;
    op.pad = pad;
    op.bias = bias;
    op.first_sa = !saw_sa;
    saw_sa = true;
    op.in_dims = in;
    op.out_dims = out;
    const int idx = static_cast<int>(prog.ops.size());
    op.w = add_param(idx, 'w', {out_ch, in.c, k, k}, true);
    if (bias) op.b = add_param(idx, 'b', {out_ch}, true);
    emit(op);
    return op.out;
  }

  int bn(int in_slot) {
    const TensorDims d = prog.slot_dims[in_slot];
    Op op;
    op.kind = OpKind::BatchNorm;
    op.in0 = in_slot;
    op.out = new_slot(d);
    op.in_ch = op.out_ch = d.c;
    op.in_dims = op.out_dims = d;
    const int idx = static_cast<int>(prog.ops.size());
    op.gamma = add_param(idx, 'g', {d.c}, true);
    op.beta = add_param(idx, 's', {d.c}, true);
    op.rmean = add_param(idx, 'm', {d.c}, false);
    op.rvar = add_param(idx, 'v', {d.c}, false);
    emit(op);
    return op.out;
  }

  int unary(OpKind kind, int in_slot) {
    const TensorDims d = prog.slot_dims[in_slot];
    Op op;
    op.kind = kind;
    op.in0 = in_slot;
    op.in_dims = d;
    if (kind == OpKind::GlobalAvgPool) {
      op.out_dims = {d.c, 1, 1};
    } else {
      op.out_dims = d;
    }
    op.in_ch = op.out_ch = d.c;
    op.out = new_slot(op.out_dims);
    emit(op);
    return op.out;
  }

  int avgpool(int in_slot, int k) {
    const TensorDims d = prog.slot_dims[in_slot];
    if (d.h % k != 0 || d.w % k != 0) throw std::invalid_argument("avgpool window must divide input");
    Op op;
    op.kind = OpKind::AvgPool;
    op.in0 = in_slot;
    op.ksize = op.stride = k;
    op.in_ch = op.out_ch = d.c;
    op.in_dims = d;
    op.out_dims = {d.c, d.h / k, d.w / k};
    op.out = new_slot(op.out_dims);
    emit(op);
    return op.out;
  }

  int add(int a, int b) {
    const TensorDims da = prog.slot_dims[a];
    const TensorDims db = prog.slot_dims[b];
    if (da.c != db.c || da.h != db.h || da.w != db.w) {
      throw std::invalid_argument("add operands disagree in shape");
    }
    Op op;
    op.kind = OpKind::Add;
    op.in0 = a;
    op.in1 = b;
    op.in_ch = op.out_ch = da.c;
    op.in_dims = op.out_dims = da;
    op.out = new_slot(da);
    emit(op);
    return op.out;
  }

  int dense(int in_slot, int out_n, bool bias, bool classifier) {
    const TensorDims in = prog.slot_dims[in_slot];
    if (in.h != 1 || in.w != 1) {
      throw std::invalid_argument("dense expects pooled [C,1,1] input");
    }
    Op op;
    op.kind = OpKind::Dense;
    op.in0 = in_slot;
    op.in_ch = in.c;
    op.out_ch = out_n;
    op.bias = bias;
    op.keep_full_out = classifier;
    op.in_dims = in;
    op.out_dims = {out_n, 1, 1};
    op.out = new_slot(op.out_dims);
    const int idx = static_cast<int>(prog.ops.size());
    op.w = add_param(idx, 'w', {out_n, in.c}, true);
    if (bias) op.b = add_param(idx, 'b', {out_n}, true);
    emit(op);
    return op.out;
  }

  int walk(const std::vector<LayerDef>& defs, int slot);
};

int Builder::walk(const std::vector<LayerDef>& defs, int slot) {
  for (const auto& l : defs) {
    if (l.type == "conv") {
      slot = conv(slot, l.out_ch, l.ksize, l.stride, l.pad, l.bias);
    } else if (l.type == "bn") {
      slot = bn(slot);
    } else if (l.type == "relu") {
      slot = unary(OpKind::Relu, slot);
    } else if (l.type == "avgpool") {
      slot = avgpool(slot, l.pool);
    } else if (l.type == "globalavgpool") {
      slot = unary(OpKind::GlobalAvgPool, slot);
    } else if (l.type == "dense") {
      slot = dense(slot, l.out_ch, l.bias, true);
    } else if (l.type == "residual") {
      const int entry = slot;
      const TensorDims din = prog.slot_dims[entry];
      const int body_out = walk(l.body, entry);
      const TensorDims dout = prog.slot_dims[body_out];
      int skip = entry;
      if (din.c != dout.c || din.h != dout.h || din.w != dout.w) {
        const int s = (din.h + dout.h - 1) / dout.h;
        skip = conv(entry, dout.c, 1, s, 0, false);
        skip = bn(skip);
      }
      slot = add(body_out, skip);
    } else {
      throw std::invalid_argument("unknown layer type: " + l.type);
    }
  }
  return slot;
}

}  // namespace

Program compile(const ModelSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("model needs >= 2 classes");
  Builder b;
  b.prog.input_ch = spec.in_ch;
  b.prog.input_h = spec.in_h;
  b.prog.input_w = spec.in_w;
  b.prog.classes = spec.classes;
  Op input;
  input.kind = OpKind::Input;
  input.out_dims = {spec.in_ch, spec.in_h, spec.in_w};
  input.out = b.new_slot(input.out_dims);
  b.emit(input);
  int slot = b.walk(spec.layers, input.out);
  const TensorDims logits = b.prog.slot_dims[slot];
  if (logits.c != spec.classes || logits.h != 1 || logits.w != 1) {
    throw std::invalid_argument("model head must emit [classes] logits");
  }
  Op sm;
  sm.kind = OpKind::SoftmaxXent;
  sm.in0 = slot;
  sm.in_ch = sm.out_ch = spec.classes;
  sm.in_dims = logits;
  sm.out_dims = logits;
  sm.out = b.new_slot(logits);
  b.emit(sm);
  return std::move(b.prog);
}

static LayerDef conv_def(int out_ch, int k, int stride, int pad = -1, bool bias = false) {
  LayerDef l;
  l.type = "conv";
  l.out_ch = out_ch;
  l.ksize = k;
  l.stride = stride;
  l.pad = pad;
  l.bias = bias;
  return l;
}

static LayerDef plain(const std::string& type) {
  LayerDef l;
  l.type = type;
  return l;
}

ModelSpec ModelSpec::resnet20(int classes, int in_ch, int hw) {
  ModelSpec s;
  s.name = "resnet20";
  s.in_ch = in_ch;
  s.in_h = s.in_w = hw;
  s.classes = classes;
  s.layers.push_back(conv_def(16, 3, 1));
  s.layers.push_back(plain("bn"));
  s.layers.push_back(plain("relu"));
  const int widths[3] = {16, 32, 64};
  for (int stage = 0; stage < 3; ++stage) {
    for (int block = 0; block < 3; ++block) {
      const int stride = (stage > 0 && block == 0) ? 2 : 1;
      LayerDef res;
      res.type = "residual";
      res.body.push_back(conv_def(widths[stage], 3, stride));
      res.body.push_back(plain("bn"));
      res.body.push_back(plain("relu"));
      res.body.push_back(conv_def(widths[stage], 3, 1));
      res.body.push_back(plain("bn"));
      s.layers.push_back(res);
      s.layers.push_back(plain("relu"));
    }
  }
  s.layers.push_back(plain("globalavgpool"));
  LayerDef head;
  head.type = "dense";
  head.out_ch = classes;
  head.bias = true;
  s.layers.push_back(head);
  return s;
}

ModelSpec ModelSpec::desk_cnn(int classes, int in_ch, int hw) {
  ModelSpec s;
  s.name = "desk_cnn";
  s.in_ch = in_ch;
  s.in_h = s.in_w = hw;
  s.classes = classes;
  s.layers.push_back(conv_def(8, 3, 1));
  s.layers.push_back(plain("bn"));
  s.layers.push_back(plain("relu"));
  LayerDef pool = plain("avgpool");
  pool.pool = 2;
  s.layers.push_back(pool);
  s.layers.push_back(conv_def(16, 3, 1));
  s.layers.push_back(plain("bn"));
  s.layers.push_back(plain("relu"));
  s.layers.push_back(plain("globalavgpool"));
  LayerDef head;
  head.type = "dense";
  head.out_ch = classes;
  head.bias = true;
  s.layers.push_back(head);
  return s;
}

static void scale_defs(std::vector<LayerDef>& defs, double s) {
  for (auto& l : defs) {
    if (l.type == "conv") {
      l.out_ch = std::max(1, static_cast<int>(std::floor(s * l.out_ch)));
    } else if (l.type == "residual") {
      scale_defs(l.body, s);
    }
  }
}

ModelSpec ModelSpec::scaled(double s) const {
  if (s <= 0.0 || s > 1.0) throw std::invalid_argument("width scale must be in (0, 1]");
  ModelSpec out = *this;
  scale_defs(out.layers, s);
  return out;
}

std::vector<Tensor> init_params(const Program& prog, Rng& rng) {
  std::vector<Tensor> params;
  params.reserve(prog.params.size());
  for (const auto& meta : prog.params) {
    Tensor t(meta.shape);
    switch (meta.role) {
      case 'w': {
        const Op& op = prog.ops[meta.op_index];
        long fan_in = op.in_ch;
        if (op.kind == OpKind::Conv) fan_in *= static_cast<long>(op.ksize) * op.ksize;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (float& v : t.data) v = static_cast<float>(rng.uniform(-limit, limit));
        break;
      }
      case 'g':
      case 'v':
        for (float& v : t.data) v = 1.0f;
        break;
      default:
        break;  // biases, beta, running mean stay zero
    }
    params.push_back(std::move(t));
  }
  return params;
}

}  // namespace approxfl
