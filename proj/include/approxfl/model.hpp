#pragma once

#include <string>
#include <vector>

#include "approxfl/rng.hpp"
#include "approxfl/tensor.hpp"

namespace approxfl {

enum class OpKind {
  Input,
  Conv,          // weights [out_ch][in_ch][k][k], optional bias [out_ch]
  Dense,         // weights [out][in], optional bias [out]; input is [C] per sample
  BatchNorm,     // gamma/beta/running mean/running var, all [C]
  Relu,
  AvgPool,       // window k, stride k
  GlobalAvgPool, // [C,H,W] -> [C]
  Add,           // elementwise, two inputs
  SoftmaxXent,   // logits [classes] -> loss + dlogits
};

const char* op_kind_name(OpKind k);

struct TensorDims {
  int c = 0, h = 0, w = 0;
  long numel() const { return static_cast<long>(c) * h * w; }
};

struct Op {
  OpKind kind = OpKind::Input;
  int in0 = -1, in1 = -1;  // slot ids
  int out = -1;
  int in_ch = 0, out_ch = 0, ksize = 1, stride = 1, pad = 0;
  bool bias = false;
  // Param table indices, -1 when absent.
  int w = -1, b = -1, gamma = -1, beta = -1, rmean = -1, rvar = -1;
  bool first_sa = false;       // first conv: no input-gradient pass
  bool keep_full_out = false;  // classifier head, never masked
  TensorDims in_dims, out_dims;
};

struct ParamMeta {
  int op_index = -1;
  char role = 'w';  // w, b, g (gamma), s (beta), m (running mean), v (running var)
  std::vector<int> shape;
  bool trainable = true;
};

struct Program {
  std::vector<Op> ops;
  std::vector<ParamMeta> params;
  std::vector<TensorDims> slot_dims;  // per-sample dims per slot
  int input_ch = 0, input_h = 0, input_w = 0;
  int classes = 0;

  int slot_count() const { return static_cast<int>(slot_dims.size()); }
  long trainable_elems() const;
  long param_elems() const;
};

// Structured model description; compiled into a linear op program with an
// explicit two-input Add for residual connections.
struct LayerDef {
  std::string type;  // conv | bn | relu | avgpool | globalavgpool | dense | residual
  int out_ch = 0;
  int ksize = 3;
  int stride = 1;
  int pad = -1;  // -1: same padding (k/2)
  bool bias = false;
  int pool = 2;
  std::vector<LayerDef> body;  // residual only; projection added when needed
};

struct ModelSpec {
  std::string name = "custom";
  int in_ch = 3, in_h = 8, in_w = 8;
  int classes = 10;
  std::vector<LayerDef> layers;

  // 3x3 stack: conv0 then 3 stages x 3 blocks at widths {16,32,64}, strided
  // stage transitions with 1x1 projections, global pool, linear head.
  static ModelSpec resnet20(int classes = 10, int in_ch = 3, int hw = 32);
  // Small two-conv net for desk-scale runs.
  static ModelSpec desk_cnn(int classes = 10, int in_ch = 3, int hw = 8);
  // Channel widths scaled by s (floor, min 1); classifier width kept.
  ModelSpec scaled(double s) const;
};

Program compile(const ModelSpec& spec);

// He-uniform for conv/dense weights, zeros for biases/beta, ones for gamma
// and running variance.
std::vector<Tensor> init_params(const Program& prog, Rng& rng);

}  // namespace approxfl
