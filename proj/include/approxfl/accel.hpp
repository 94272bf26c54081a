#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "approxfl/bitfloat.hpp"
#include "approxfl/model.hpp"

namespace approxfl {

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One systolic-array workload: a PxQ channel contraction replayed over
// n_positions output positions, k*k kernel taps per position.
struct SaOpRec {
  char phase = 'f';  // f: forward, b: input gradient, g: weight gradient
  int out_ch = 0, in_ch = 0, ksize = 1;
  long n_positions = 0;  // batch x output spatial positions
  long in_elems = 0, out_elems = 0, w_elems = 0;  // per-minibatch tensor sizes
};

enum class SimdKind { BatchNorm, Relu, Pool, Softmax, Add, Bias, Update };

struct SimdRec {
  SimdKind kind = SimdKind::Relu;
  long elems = 0;
};

// Parameter tensors touched by the optimizer step (for DRAM update traffic).
struct TrainStepTrace {
  std::vector<SaOpRec> sa;
  std::vector<SimdRec> simd;
  std::vector<long> updated_params;  // element counts per trainable tensor
};

struct TileCounts {
  long passes = 0;     // SA pass count per output position
  long utilized = 0;   // useful MACs per output position
  long charged = 0;    // rows*cols*passes, padding included
  long padded() const { return charged - utilized; }
};

// Per-kernel-tap channel tiling: each tap is a PxQ contraction mapped onto
// the rows x cols array, so passes = ceil(P/rows) * ceil(Q/cols) * k^2.
TileCounts tile_conv(int out_ch, int in_ch, int ksize, int sa_rows = 16,
                     int sa_cols = 16);

struct AcceleratorConfig {
  std::string label = "C1";
  FloatFormat storage = FloatFormat::fp32();
  MultiplierSpec multiplier = MultiplierSpec::exact();
  int sa_rows = 16, sa_cols = 16, simd_lanes = 16;
  int bus_bits = 64;
  long buffer_bytes = 64 * 1024;
  long long dram_bytes = 2LL * 1024 * 1024 * 1024;
};

// Table lookups: C1..C5 fixed-point of the study, MIT-7/3/1 ablation variants.
AcceleratorConfig accelerator_from_label(const std::string& label);

struct EnergyTable {
  // pJ per MAC keyed by "<format>/<multiplier>".
  std::map<std::string, double> mac_pj;
  double alu_pj = 31.4;
  std::map<int, double> sram_pj_per_bit;  // keyed by bus width
  double dram_pj_per_bit = 41.0;
  // Counting constants (words are storage-format wide unless noted).
  double ibuf_words_per_mac = 1.0;
  double obuf_words_per_mac = 0.5;
  double wbuf_words_per_pass_cell = 1.0;  // x rows x cols
  double vmem_words_per_simd_op = 3.0;
  double inmem_bits_per_simd_op = 2.0;
  double simd_ops_bn = 4.0;
  double simd_ops_relu = 1.0;
  double simd_ops_pool = 1.0;
  double simd_ops_softmax = 4.0;
  double simd_ops_add = 1.0;
  double simd_ops_bias = 1.0;
  double simd_ops_update = 2.0;

  static EnergyTable defaults();
  double mac_cost(FloatFormat f, MultiplierKind k) const;
  double sram_cost(int bus_bits) const;
  double simd_op_weight(SimdKind k) const;
};

struct AccessCounts {
  double sa_charged = 0, sa_utilized = 0, sa_padded = 0;
  double simd_ops = 0;
  double ibuf_bits = 0, wbuf_bits = 0, obuf_bits = 0;
  double inmem_bits = 0, vmem_bits = 0;
  double dram_bits = 0;

  AccessCounts& operator+=(const AccessCounts& o);
  AccessCounts& operator*=(double f);
  double sram_bits() const {
    return ibuf_bits + wbuf_bits + obuf_bits + inmem_bits + vmem_bits;
  }
};

struct EnergyLedger {
  double e_sa = 0, e_simd = 0;
  double e_ibuf = 0, e_wbuf = 0, e_obuf = 0, e_inmem = 0, e_vmem = 0;
  double e_dram = 0;
  AccessCounts counts;

  double e_sram() const { return e_ibuf + e_wbuf + e_obuf + e_inmem + e_vmem; }
  double e_comp() const { return e_sa + e_simd; }
  double e_mem() const { return e_sram() + e_dram; }
  double total() const { return e_comp() + e_mem(); }
  EnergyLedger& operator+=(const EnergyLedger& o);
};

// Applies the counting rules to a trace under a device config: SA charges by
// padded tiling, SRAM words at storage width, DRAM crossings for tensors
// larger than the on-chip buffer.
AccessCounts count_accesses(const TrainStepTrace& trace,
                            const AcceleratorConfig& cfg,
                            const EnergyTable& table);

EnergyLedger price(const AccessCounts& counts, const AcceleratorConfig& cfg,
                   const EnergyTable& table);

// Analytical trace of one training step (forward + fused backward + update)
// for a minibatch of the given size.
TrainStepTrace minibatch_trace(const Program& prog, int batch);

// Throws CapacityError when master params + grads + live activations exceed
// device DRAM.
void check_capacity(const Program& prog, int batch,
                    const AcceleratorConfig& cfg);

EnergyLedger minibatch_energy(const Program& prog, int batch,
                              const AcceleratorConfig& cfg,
                              const EnergyTable& table);

}  // namespace approxfl
