#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "approxfl/accel.hpp"
#include "approxfl/bitfloat.hpp"
#include "approxfl/config.hpp"
#include "approxfl/federated.hpp"
#include "approxfl/metrics.hpp"
#include "approxfl/model.hpp"
#include "approxfl/partition.hpp"
#include "approxfl/strategy.hpp"

namespace py = pybind11;
using namespace approxfl;

namespace {

MultiplierSpec make_spec(const std::string& kind, int m, double c) {
  const MultiplierKind k = multiplier_kind_from_name(kind);
  if (k == MultiplierKind::Exact) return MultiplierSpec::exact(m);
  if (k == MultiplierKind::Mitchell) return MultiplierSpec::mitchell(m);
  return c >= 0.0 ? MultiplierSpec::mbm(m, c) : MultiplierSpec::mbm(m);
}

py::dict ledger_dict(const EnergyLedger& led) {
  py::dict d;
  d["total_pj"] = led.total();
  d["e_sa_pj"] = led.e_sa;
  d["e_simd_pj"] = led.e_simd;
  d["e_sram_pj"] = led.e_sram();
  d["e_ibuf_pj"] = led.e_ibuf;
  d["e_wbuf_pj"] = led.e_wbuf;
  d["e_obuf_pj"] = led.e_obuf;
  d["e_inmem_pj"] = led.e_inmem;
  d["e_vmem_pj"] = led.e_vmem;
  d["e_dram_pj"] = led.e_dram;
  d["sa_charged_macs"] = led.counts.sa_charged;
  d["sa_utilized_macs"] = led.counts.sa_utilized;
  d["sa_padded_macs"] = led.counts.sa_padded;
  d["simd_ops"] = led.counts.simd_ops;
  d["sram_bits"] = led.counts.sram_bits();
  d["dram_bits"] = led.counts.dram_bits;
  return d;
}

}  // namespace

PYBIND11_MODULE(_approxfl, mod) {
  mod.doc() =
      "Energy-aware federated training simulator: approximate-multiplier "
      "emulation, analytical energy ledgers, submodel baselines.";
  mod.attr("__version__") = "1.0.0";

  mod.def(
      "round_to_format",
      [](float value, const std::string& format) {
        return round_to_format(value, format_from_name(format));
      },
      py::arg("value"), py::arg("format"));

  mod.def(
      "approx_multiply",
      [](float a, float b, const std::string& multiplier, int mantissa_bits,
         double correction) {
        return approx_multiply(a, b, make_spec(multiplier, mantissa_bits, correction));
      },
      py::arg("a"), py::arg("b"), py::arg("multiplier") = "mbm",
      py::arg("mantissa_bits") = 7, py::arg("correction") = -1.0);

  mod.def(
      "characterize_multiplier",
      [](const std::string& multiplier, int mantissa_bits, double correction) {
        const MultiplierSpec spec = make_spec(multiplier, mantissa_bits, correction);
        const ErrorStats st = characterize_error(spec);
        py::dict d;
        d["multiplier"] = multiplier_kind_name(spec.kind);
        d["mantissa_bits"] = spec.mantissa_bits;
        d["correction"] = spec.correction;
        d["mean_rel"] = st.mean_rel;
        d["mean_abs_rel"] = st.mean_abs_rel;
        d["max_abs_rel"] = st.max_abs_rel;
        return d;
      },
      py::arg("multiplier") = "mbm", py::arg("mantissa_bits") = 7,
      py::arg("correction") = -1.0);

  mod.def("calibrate_mbm", &calibrate_mbm_correction, py::arg("mantissa_bits"));

  mod.def(
      "tile_conv",
      [](int out_ch, int in_ch, int ksize, int sa_rows, int sa_cols) {
        const TileCounts t = tile_conv(out_ch, in_ch, ksize, sa_rows, sa_cols);
        py::dict d;
        d["passes"] = t.passes;
        d["utilized"] = t.utilized;
        d["charged"] = t.charged;
        d["padded"] = t.padded();
        return d;
      },
      py::arg("out_ch"), py::arg("in_ch"), py::arg("ksize"),
      py::arg("sa_rows") = 16, py::arg("sa_cols") = 16);

  mod.def(
      "minibatch_breakdown",
      [](const std::string& accelerator, const std::string& arch, int batch,
         int size, int channels, int classes, double scale) {
        ModelConfig mc;
        mc.arch = arch;
        mc.classes = classes;
        mc.in_ch = channels;
        mc.in_h = mc.in_w = size;
        ModelSpec spec = model_from_config(mc);
        if (scale < 1.0) spec = spec.scaled(scale);
        const Program prog = compile(spec);
        const AcceleratorConfig accel = accelerator_from_label(accelerator);
        check_capacity(prog, batch, accel);
        return ledger_dict(minibatch_energy(prog, batch, accel,
                                            EnergyTable::defaults()));
      },
      py::arg("accelerator"), py::arg("arch") = "resnet20",
      py::arg("batch") = 32, py::arg("size") = 32, py::arg("channels") = 3,
      py::arg("classes") = 10, py::arg("scale") = 1.0);

  mod.def(
      "channel_window",
      [](const std::string& strategy, int full, int sub, int round) {
        return channel_window(strategy_from_name(strategy), full, sub, round);
      },
      py::arg("strategy"), py::arg("full"), py::arg("sub"),
      py::arg("round") = 0);

  mod.def(
      "partition_labels",
      [](const std::vector<int>& labels, int classes, const std::string& kind,
         int devices, double alpha, int groups, std::uint64_t seed) {
        PartitionSpec spec;
        spec.kind = partition_kind_from_name(kind);
        spec.devices = devices;
        spec.alpha = alpha;
        spec.groups = groups;
        spec.seed = seed;
        return partition(labels, classes, spec);
      },
      py::arg("labels"), py::arg("classes"), py::arg("kind") = "iid",
      py::arg("devices") = 16, py::arg("alpha") = 0.1, py::arg("groups") = 3,
      py::arg("seed") = 1);

  mod.def("fairness_variance", &fairness_variance, py::arg("group_accuracies"));

  mod.def(
      "preset_config",
      [](const std::string& name) { return config_to_json(preset_config(name)); },
      py::arg("name"));

  mod.def("preset_names", &preset_names);

  mod.def(
      "run_experiment",
      [](const std::string& config_json) {
        const RunConfig cfg = parse_config_text(config_json, "<config>");
        py::gil_scoped_release release;
        const ExperimentResult res = run_experiment(cfg, nullptr);
        return summary_json(cfg, res.seeds);
      },
      py::arg("config_json"),
      "Runs every configured seed, writes CSV/JSON artifacts under "
      "output_dir, returns the summary JSON text.");
}
