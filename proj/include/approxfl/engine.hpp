#pragma once

#include <vector>

#include "approxfl/accel.hpp"
#include "approxfl/bitfloat.hpp"
#include "approxfl/model.hpp"
#include "approxfl/rng.hpp"
#include "approxfl/tensor.hpp"

namespace approxfl {

// Numeric execution profile of a device: storage format applied on every
// buffer write-back, multiplier used by the systolic array. SIMD-side math
// (batch norm, pooling, softmax, update) is exact fp32.
struct ExecSpec {
  FloatFormat format = FloatFormat::fp32();
  MultiplierSpec multiplier = MultiplierSpec::exact();

  static ExecSpec from_accelerator(const AcceleratorConfig& cfg) {
    return {cfg.storage, cfg.multiplier};
  }
};

struct EvalResult {
  double loss = 0.0;
  std::vector<int> predictions;
};

// Per-parameter gradients; non-trainable entries stay empty.
using Grads = std::vector<Tensor>;

// One forward+backward over a minibatch. Activations are rounded to the
// storage format on write-back; partial sums accumulate in fp32. Batch-norm
// running statistics are updated in place.
double train_step(const Program& prog, std::vector<Tensor>& params,
                  const float* x, const int* y, int batch,
                  const ExecSpec& spec, Grads& grads);

// Inference with running batch-norm statistics.
EvalResult evaluate(const Program& prog, const std::vector<Tensor>& params,
                    const float* x, const int* y, int batch,
                    const ExecSpec& spec);

struct LocalTrainConfig {
  int batch_size = 32;
  int epochs = 1;
  float lr = 0.1f;
  float prox_mu = 0.0f;        // proximal pull toward the broadcast weights
  double batch_fraction = 1.0; // ceil(fraction * batches) minibatches per epoch
};

struct LocalTrainResult {
  std::vector<Tensor> params;
  TrainStepTrace trace;  // per-minibatch shape trace
  int steps = 0;         // minibatches processed
  int samples = 0;       // shard size (aggregation weight)
  double mean_loss = 0.0;
};

// SGD over the client shard: shuffled minibatches, fp32 master weights,
// batch-norm running statistics updated in train mode. The proximal term
// costs no modeled energy.
LocalTrainResult local_train(const Program& prog,
                             const std::vector<Tensor>& start,
                             const float* data, const int* labels,
                             const std::vector<int>& shard,
                             int sample_elems, const ExecSpec& spec,
                             const LocalTrainConfig& cfg, Rng& rng);

}  // namespace approxfl
