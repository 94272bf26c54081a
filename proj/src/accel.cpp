#include "approxfl/accel.hpp"

#include <cmath>

namespace approxfl {

namespace {
long ceil_div(long a, long b) { return (a + b - 1) / b; }

std::string mac_key(FloatFormat f, MultiplierKind k) {
  std::string key = format_name(f);
  key += '/';
  key += multiplier_kind_name(k);
  return key;
}
}  // namespace

TileCounts tile_conv(int out_ch, int in_ch, int ksize, int sa_rows, int sa_cols) {
  if (out_ch <= 0 || in_ch <= 0 || ksize <= 0 || sa_rows <= 0 || sa_cols <= 0) {
    throw std::invalid_argument("tile_conv: dimensions must be positive");
  }
  TileCounts t;
  t.passes = ceil_div(in_ch, sa_rows) * ceil_div(out_ch, sa_cols) *
             static_cast<long>(ksize) * ksize;
  t.utilized = static_cast<long>(in_ch) * out_ch * ksize * ksize;
  t.charged = static_cast<long>(sa_rows) * sa_cols * t.passes;
  return t;
}

AcceleratorConfig accelerator_from_label(const std::string& label) {
  AcceleratorConfig c;
  c.label = label;
  if (label == "C1") {
    return c;
  }
  if (label == "C2") {
    c.storage = FloatFormat::bfloat16();
    c.multiplier = MultiplierSpec::exact(7);
    return c;
  }
  if (label == "C3" || label == "MIT-7") {
    c.storage = FloatFormat::bfloat16();
    c.multiplier = label == "C3" ? MultiplierSpec::mbm(7) : MultiplierSpec::mitchell(7);
    return c;
  }
  if (label == "C4" || label == "MIT-3") {
    c.storage = FloatFormat::bfloat12();
    c.multiplier = label == "C4" ? MultiplierSpec::mbm(3) : MultiplierSpec::mitchell(3);
    c.bus_bits = 60;
    return c;
  }
  if (label == "C5" || label == "MIT-1") {
    c.storage = FloatFormat::bfloat10();
    c.multiplier = label == "C5" ? MultiplierSpec::mbm(1) : MultiplierSpec::mitchell(1);
    c.bus_bits = 60;
    return c;
  }
  throw std::invalid_argument("unknown accelerator label: " + label);
}

EnergyTable EnergyTable::defaults() {
  EnergyTable t;
  t.mac_pj = {
      {"fp32/exact", 26.8}, {"bfloat16/exact", 5.35}, {"bfloat16/mbm", 3.11},
      {"bfloat12/mbm", 2.78}, {"bfloat10/mbm", 2.65},
  };
  t.sram_pj_per_bit = {{64, 0.401}, {60, 0.412}};
  return t;
}

double EnergyTable::mac_cost(FloatFormat f, MultiplierKind k) const {
  auto it = mac_pj.find(mac_key(f, k));
  if (it != mac_pj.end()) return it->second;
  // Table carries no Mitchell rows; the correction adder is below its
  // resolution, so Mitchell prices as MBM at equal width.
  if (k == MultiplierKind::Mitchell) {
    it = mac_pj.find(mac_key(f, MultiplierKind::Mbm));
    if (it != mac_pj.end()) return it->second;
  }
  throw std::invalid_argument("energy table has no MAC cost for " + mac_key(f, k));
}

double EnergyTable::sram_cost(int bus_bits) const {
  auto it = sram_pj_per_bit.find(bus_bits);
  if (it == sram_pj_per_bit.end()) {
    throw std::invalid_argument("energy table has no SRAM cost for bus width " +
                                std::to_string(bus_bits));
  }
  return it->second;
}

double EnergyTable::simd_op_weight(SimdKind k) const {
  switch (k) {
    case SimdKind::BatchNorm: return simd_ops_bn;
    case SimdKind::Relu: return simd_ops_relu;
    case SimdKind::Pool: return simd_ops_pool;
    case SimdKind::Softmax: return simd_ops_softmax;
    case SimdKind::Add: return simd_ops_add;
    case SimdKind::Bias: return simd_ops_bias;
    default: return simd_ops_update;
  }
}

AccessCounts& AccessCounts::operator+=(const AccessCounts& o) {
  sa_charged += o.sa_charged;
  sa_utilized += o.sa_utilized;
  sa_padded += o.sa_padded;
  simd_ops += o.simd_ops;
  ibuf_bits += o.ibuf_bits;
  wbuf_bits += o.wbuf_bits;
  obuf_bits += o.obuf_bits;
  inmem_bits += o.inmem_bits;
  vmem_bits += o.vmem_bits;
  dram_bits += o.dram_bits;
  return *this;
}

AccessCounts& AccessCounts::operator*=(double f) {
  sa_charged *= f;
  sa_utilized *= f;
  sa_padded *= f;
  simd_ops *= f;
  ibuf_bits *= f;
  wbuf_bits *= f;
  obuf_bits *= f;
  inmem_bits *= f;
  vmem_bits *= f;
  dram_bits *= f;
  return *this;
}

EnergyLedger& EnergyLedger::operator+=(const EnergyLedger& o) {
  e_sa += o.e_sa;
  e_simd += o.e_simd;
  e_ibuf += o.e_ibuf;
  e_wbuf += o.e_wbuf;
  e_obuf += o.e_obuf;
  e_inmem += o.e_inmem;
  e_vmem += o.e_vmem;
  e_dram += o.e_dram;
  counts += o.counts;
  return *this;
}

AccessCounts count_accesses(const TrainStepTrace& trace,
                            const AcceleratorConfig& cfg,
                            const EnergyTable& table) {
  AccessCounts c;
  const double fb = cfg.storage.total_bits();
  const double buf_bits = 8.0 * static_cast<double>(cfg.buffer_bytes);
  auto dram_tensor = [&](double elems, double times) {
    const double bits = elems * fb;
    if (bits > buf_bits) c.dram_bits += bits * times;
  };
  for (const auto& op : trace.sa) {
    const TileCounts tiles =
        op.phase == 'b'
            ? tile_conv(op.in_ch, op.out_ch, op.ksize, cfg.sa_rows, cfg.sa_cols)
            : tile_conv(op.out_ch, op.in_ch, op.ksize, cfg.sa_rows, cfg.sa_cols);
    const double charged = static_cast<double>(tiles.charged) * op.n_positions;
    const double utilized = static_cast<double>(tiles.utilized) * op.n_positions;
    c.sa_charged += charged;
    c.sa_utilized += utilized;
    c.sa_padded += charged - utilized;
    c.ibuf_bits += charged * table.ibuf_words_per_mac * fb;
    c.obuf_bits += charged * table.obuf_words_per_mac * fb;
    c.wbuf_bits += static_cast<double>(tiles.passes) * cfg.sa_rows * cfg.sa_cols *
                   table.wbuf_words_per_pass_cell * fb;
    switch (op.phase) {
      case 'f':  // read inputs and weights, write outputs
        dram_tensor(op.in_elems, 1);
        dram_tensor(op.w_elems, 1);
        dram_tensor(op.out_elems, 1);
        break;
      case 'b':  // input gradient: weights in, dX out (dY read fused into 'g')
        dram_tensor(op.w_elems, 1);
        dram_tensor(op.in_elems, 1);
        break;
      default:   // weight gradient: re-stream X and dY, write dW
        dram_tensor(op.in_elems, 1);
        dram_tensor(op.out_elems, 1);
        dram_tensor(op.w_elems, 1);
        break;
    }
  }
  for (const auto& op : trace.simd) {
    const double ops = table.simd_op_weight(op.kind) * op.elems;
    c.simd_ops += ops;
    c.vmem_bits += ops * table.vmem_words_per_simd_op * fb;
    c.inmem_bits += ops * table.inmem_bits_per_simd_op;
  }
  for (long elems : trace.updated_params) {
    dram_tensor(static_cast<double>(elems), 3);  // read w, read g, write w
  }
  return c;
}

EnergyLedger price(const AccessCounts& counts, const AcceleratorConfig& cfg,
                   const EnergyTable& table) {
  EnergyLedger l;
  l.counts = counts;
  const double mac = table.mac_cost(cfg.storage, cfg.multiplier.kind);
  const double sram = table.sram_cost(cfg.bus_bits);
  l.e_sa = counts.sa_charged * mac;
  l.e_simd = counts.simd_ops * table.alu_pj;
  l.e_ibuf = counts.ibuf_bits * sram;
  l.e_wbuf = counts.wbuf_bits * sram;
  l.e_obuf = counts.obuf_bits * sram;
  l.e_inmem = counts.inmem_bits * sram;
  l.e_vmem = counts.vmem_bits * sram;
  l.e_dram = counts.dram_bits * table.dram_pj_per_bit;
  return l;
}

TrainStepTrace minibatch_trace(const Program& prog, int batch) {
  if (batch <= 0) throw std::invalid_argument("batch must be positive");
  TrainStepTrace t;
  const long B = batch;
  auto simd = [&](SimdKind kind, long elems) {
    if (elems > 0) t.simd.push_back({kind, elems});
  };
  for (const auto& op : prog.ops) {
    const long out_el = B * op.out_dims.numel();
    const long in_el = B * op.in_dims.numel();
    switch (op.kind) {
      case OpKind::Conv:
      case OpKind::Dense: {
        const long n_pos = B * op.out_dims.h * op.out_dims.w;
        const long w_el = static_cast<long>(op.out_ch) * op.in_ch * op.ksize * op.ksize;
        SaOpRec rec;
        rec.out_ch = op.out_ch;
        rec.in_ch = op.in_ch;
        rec.ksize = op.ksize;
        rec.n_positions = n_pos;
        rec.in_elems = in_el;
        rec.out_elems = out_el;
        rec.w_elems = w_el;
        rec.phase = 'f';
        t.sa.push_back(rec);
        if (!op.first_sa) {
          rec.phase = 'b';
          t.sa.push_back(rec);
        }
        rec.phase = 'g';
        t.sa.push_back(rec);
        long upd = w_el;
        if (op.bias) {
          simd(SimdKind::Bias, out_el);      // forward add
          simd(SimdKind::Bias, out_el);      // gradient reduction
          upd += op.out_ch;
        }
        simd(SimdKind::Update, upd);
        t.updated_params.push_back(upd);
        break;
      }
      case OpKind::BatchNorm:
        simd(SimdKind::BatchNorm, out_el);   // forward
        simd(SimdKind::BatchNorm, out_el);   // backward
        simd(SimdKind::Update, 2L * op.out_ch);
        t.updated_params.push_back(2L * op.out_ch);
        break;
      case OpKind::Relu:
        simd(SimdKind::Relu, out_el);
        simd(SimdKind::Relu, out_el);
        break;
      case OpKind::AvgPool:
      case OpKind::GlobalAvgPool:
        simd(SimdKind::Pool, in_el);
        simd(SimdKind::Pool, in_el);
        break;
      case OpKind::Add:
        simd(SimdKind::Add, out_el);
        simd(SimdKind::Add, out_el);
        break;
      case OpKind::SoftmaxXent:
        simd(SimdKind::Softmax, in_el);
        simd(SimdKind::Softmax, in_el);
        break;
      case OpKind::Input:
        break;
    }
  }
  return t;
}

void check_capacity(const Program& prog, int batch, const AcceleratorConfig& cfg) {
  // fp32 master weights + gradients, plus live activation and gradient slots.
  double bytes = 8.0 * static_cast<double>(prog.param_elems());
  for (const auto& d : prog.slot_dims) {
    bytes += 8.0 * static_cast<double>(batch) * d.numel();
  }
  if (bytes > static_cast<double>(cfg.dram_bytes)) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "model working set %.0f bytes exceeds device DRAM %lld bytes",
                  bytes, cfg.dram_bytes);
    throw CapacityError(msg);
  }
}

EnergyLedger minibatch_energy(const Program& prog, int batch,
                              const AcceleratorConfig& cfg,
                              const EnergyTable& table) {
  check_capacity(prog, batch, cfg);
  return price(count_accesses(minibatch_trace(prog, batch), cfg, table), cfg, table);
}

}  // namespace approxfl
