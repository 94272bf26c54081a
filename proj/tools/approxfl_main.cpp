#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "approxfl/accel.hpp"
#include "approxfl/bitfloat.hpp"
#include "approxfl/config.hpp"
#include "approxfl/federated.hpp"
#include "approxfl/model.hpp"
#include "approxfl/partition.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace approxfl;

struct RunArgs {
  std::string config, preset, output_dir;
  long long seed = -1;
  int threads = -1;
  int rounds = -1;
  bool quiet = false;
};

RunConfig resolve_config(const std::string& config, const std::string& preset) {
  if (!config.empty() && !preset.empty()) {
    throw ConfigError("pass either --config or --preset, not both");
  }
  if (!config.empty()) return load_config(config);
  if (!preset.empty()) return preset_config(preset);
  throw ConfigError("one of --config or --preset is required");
}

int cmd_run(const RunArgs& a) {
  RunConfig cfg = resolve_config(a.config, a.preset);
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  if (a.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(a.seed)};
  if (a.threads >= 0) cfg.threads = a.threads;
  if (a.rounds > 0) cfg.rounds = a.rounds;
  cfg.validate();
  ExperimentResult res = run_experiment(cfg, a.quiet ? nullptr : &std::cerr);
  for (const std::string& f : res.files) std::cout << f << "\n";
  return 0;
}

struct BreakdownArgs {
  std::string preset;
  std::string arch = "resnet20";
  int batch = 32;
  int classes = 10, channels = 3, size = 32;
  std::string energy_table;
  std::string json_path;
};

json breakdown_row(const std::string& name, const EnergyLedger& led,
                   double ref_total) {
  json r;
  r["name"] = name;
  r["total_pj"] = led.total();
  r["total_mj"] = led.total() * 1e-9;
  r["ratio_vs_C1"] = ref_total / led.total();
  r["share_sa"] = led.e_sa / led.total();
  r["share_simd"] = led.e_simd / led.total();
  r["share_sram"] = led.e_sram() / led.total();
  r["share_dram"] = led.e_dram / led.total();
  r["sa_charged_macs"] = led.counts.sa_charged;
  r["sa_utilized_macs"] = led.counts.sa_utilized;
  r["simd_ops"] = led.counts.simd_ops;
  return r;
}

int cmd_breakdown(const BreakdownArgs& a) {
  ModelConfig mc;
  mc.arch = a.arch;
  mc.classes = a.classes;
  mc.in_ch = a.channels;
  mc.in_h = mc.in_w = a.size;
  const ModelSpec spec = model_from_config(mc);
  const EnergyTable table = a.energy_table.empty()
                                ? EnergyTable::defaults()
                                : load_energy_table(a.energy_table);

  struct Entry {
    std::string name, accel;
    double scale;
  };
  static const double kScales[] = {1.0, 0.5, 0.25, 0.125};
  std::vector<Entry> entries;
  if (a.preset.empty()) {
    for (int i = 1; i <= 5; ++i) {
      entries.push_back({"C" + std::to_string(i), "C" + std::to_string(i), 1.0});
    }
    for (int i = 1; i <= 4; ++i) {
      entries.push_back({"S" + std::to_string(i), "C1", kScales[i - 1]});
    }
  } else {
    std::string p = a.preset;
    if (p.size() == 2 && (p[0] == 'S' || p[0] == 's') && p[1] >= '1' && p[1] <= '4') {
      entries.push_back({"S" + std::string(1, p[1]), "C1", kScales[p[1] - '1']});
    } else {
      entries.push_back({p, p, 1.0});
    }
  }

  const Program ref_prog = compile(spec);
  const AcceleratorConfig ref_accel = accelerator_from_label("C1");
  check_capacity(ref_prog, a.batch, ref_accel);
  const EnergyLedger ref = minibatch_energy(ref_prog, a.batch, ref_accel, table);

  json rows = json::array();
  std::printf("%-6s %12s %8s %7s %7s %7s %7s\n", "name", "total_mJ", "vs_C1",
              "sa%", "simd%", "sram%", "dram%");
  for (const Entry& e : entries) {
    const Program prog =
        e.scale < 1.0 ? compile(spec.scaled(e.scale)) : compile(spec);
    const AcceleratorConfig accel = accelerator_from_label(e.accel);
    check_capacity(prog, a.batch, accel);
    const EnergyLedger led = minibatch_energy(prog, a.batch, accel, table);
    rows.push_back(breakdown_row(e.name, led, ref.total()));
    std::printf("%-6s %12.4f %7.2fx %6.1f%% %6.2f%% %6.1f%% %6.1f%%\n",
                e.name.c_str(), led.total() * 1e-9, ref.total() / led.total(),
                100.0 * led.e_sa / led.total(), 100.0 * led.e_simd / led.total(),
                100.0 * led.e_sram() / led.total(),
                100.0 * led.e_dram / led.total());
  }
  if (!a.json_path.empty()) {
    json doc;
    doc["arch"] = a.arch;
    doc["batch"] = a.batch;
    doc["input"] = {a.channels, a.size, a.size};
    doc["rows"] = rows;
    std::ofstream f(a.json_path, std::ios::binary);
    if (!f) throw std::runtime_error(a.json_path + ": cannot open for writing");
    f << doc.dump(2) << "\n";
  }
  return 0;
}

int cmd_calibrate(int mantissa, const std::string& json_path) {
  if (mantissa < 1 || mantissa > 12) {
    throw ConfigError("--mantissa: expected 1..12");
  }
  const double c = calibrate_mbm_correction(mantissa);
  const ErrorStats mbm = characterize_error(MultiplierSpec::mbm(mantissa, c));
  const ErrorStats mit = characterize_error(MultiplierSpec::mitchell(mantissa));
  json j;
  j["mantissa_bits"] = mantissa;
  j["correction"] = c;
  j["correction_grid_steps"] = static_cast<int>(c * 4096.0 + 0.5);
  j["mbm"] = {{"mean_rel", mbm.mean_rel},
              {"mean_abs_rel", mbm.mean_abs_rel},
              {"max_abs_rel", mbm.max_abs_rel}};
  j["mitchell"] = {{"mean_rel", mit.mean_rel},
                   {"mean_abs_rel", mit.mean_abs_rel},
                   {"max_abs_rel", mit.max_abs_rel}};
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!json_path.empty()) {
    std::ofstream f(json_path, std::ios::binary);
    if (!f) throw std::runtime_error(json_path + ": cannot open for writing");
    f << text;
  }
  return 0;
}

int cmd_characterize(const std::string& kind, int mantissa, double correction) {
  if (mantissa < 1 || mantissa > 12) {
    throw ConfigError("--mantissa: expected 1..12");
  }
  MultiplierSpec spec;
  try {
    const MultiplierKind k = multiplier_kind_from_name(kind);
    if (k == MultiplierKind::Exact) {
      spec = MultiplierSpec::exact(mantissa);
    } else if (k == MultiplierKind::Mitchell) {
      spec = MultiplierSpec::mitchell(mantissa);
    } else {
      spec = correction >= 0.0 ? MultiplierSpec::mbm(mantissa, correction)
                               : MultiplierSpec::mbm(mantissa);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--multiplier: ") + e.what());
  }
  const ErrorStats st = characterize_error(spec);
  json j;
  j["multiplier"] = multiplier_kind_name(spec.kind);
  j["mantissa_bits"] = spec.mantissa_bits;
  j["correction"] = spec.correction;
  j["mean_rel"] = st.mean_rel;
  j["mean_abs_rel"] = st.mean_abs_rel;
  j["max_abs_rel"] = st.max_abs_rel;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_partition_preview(const std::string& config, const std::string& preset,
                          long long seed_arg, bool indices) {
  RunConfig cfg = resolve_config(config, preset);
  cfg.validate();
  const std::uint64_t seed =
      seed_arg >= 0 ? static_cast<std::uint64_t>(seed_arg) : cfg.seeds.front();
  auto [train, test] = load_train_test(cfg.dataset);
  (void)test;
  PartitionSpec ps = cfg.partition;
  ps.seed = Rng::mix(seed, 0xA127);
  const auto shards = partition(train.labels, train.classes, ps);
  const auto groups = device_data_groups(ps.devices, ps.groups);
  std::vector<std::pair<std::string, double>> mix;
  for (const MixtureEntry& e : cfg.mixture) mix.emplace_back(e.accelerator, e.fraction);
  const auto labels = assign_config_labels(ps.devices, mix);

  json j;
  j["partition"] = partition_kind_name(ps.kind);
  j["devices"] = ps.devices;
  j["groups"] = ps.groups;
  j["seed"] = seed;
  json devs = json::array();
  for (int d = 0; d < ps.devices; ++d) {
    json jd;
    jd["device"] = d;
    jd["group"] = groups[d] + 1;
    jd["accelerator"] = labels[d];
    jd["samples"] = shards[d].size();
    std::vector<long> hist(train.classes, 0);
    for (int idx : shards[d]) ++hist[train.labels[idx]];
    jd["class_histogram"] = hist;
    if (indices) jd["indices"] = shards[d];
    devs.push_back(jd);
  }
  j["shards"] = devs;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Energy-aware federated training simulator: approximate-multiplier "
      "accelerator emulation, analytical energy ledgers, submodel baselines."};
  app.require_subcommand(1);

  RunArgs ra;
  CLI::App* run = app.add_subcommand("run", "Execute a federated experiment");
  run->add_option("--config", ra.config, "JSON run configuration");
  run->add_option("--preset", ra.preset, "named preset (C1..C5, S1..S4, F1..F3, Mix1..Mix4, DropDevices)");
  run->add_option("--output-dir", ra.output_dir, "artifact directory override");
  run->add_option("--seed", ra.seed, "single-seed override");
  run->add_option("--threads", ra.threads, "worker thread override (0 = hardware)");
  run->add_option("--rounds", ra.rounds, "round-count override");
  run->add_flag("--quiet", ra.quiet, "suppress progress logging");

  BreakdownArgs ba;
  CLI::App* bd = app.add_subcommand(
      "breakdown", "Per-component energy of one training mini-batch");
  bd->add_option("--preset", ba.preset, "single accelerator row (default: all C/S rows)");
  bd->add_option("--arch", ba.arch, "resnet20 | desk-cnn")->capture_default_str();
  bd->add_option("--batch", ba.batch, "mini-batch size")->capture_default_str();
  bd->add_option("--classes", ba.classes)->capture_default_str();
  bd->add_option("--channels", ba.channels)->capture_default_str();
  bd->add_option("--size", ba.size, "input height/width")->capture_default_str();
  bd->add_option("--energy-table", ba.energy_table, "JSON cost-table override");
  bd->add_option("--json", ba.json_path, "also write rows as JSON");

  int cal_m = 7;
  std::string cal_json;
  CLI::App* cal = app.add_subcommand(
      "calibrate-mbm", "Sweep the correction constant at a mantissa width");
  cal->add_option("--mantissa", cal_m, "mantissa bits")->capture_default_str();
  cal->add_option("--json", cal_json, "also write the report to a file");

  std::string ch_kind = "mbm";
  int ch_m = 7;
  double ch_c = -1.0;
  CLI::App* ch = app.add_subcommand(
      "characterize-multiplier", "Exhaustive relative-error sweep");
  ch->add_option("--multiplier", ch_kind, "exact | mbm | mitchell")
      ->capture_default_str();
  ch->add_option("--mantissa", ch_m, "mantissa bits")->capture_default_str();
  ch->add_option("--correction", ch_c, "override the calibrated constant");

  std::string pp_config, pp_preset;
  long long pp_seed = -1;
  bool pp_indices = false;
  CLI::App* pp = app.add_subcommand("partition-preview",
                                    "Shard manifest for a configuration");
  pp->add_option("--config", pp_config, "JSON run configuration");
  pp->add_option("--preset", pp_preset, "named preset");
  pp->add_option("--seed", pp_seed, "seed override");
  pp->add_flag("--indices", pp_indices, "include raw sample indices");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(ra);
    if (bd->parsed()) return cmd_breakdown(ba);
    if (cal->parsed()) return cmd_calibrate(cal_m, cal_json);
    if (ch->parsed()) return cmd_characterize(ch_kind, ch_m, ch_c);
    if (pp->parsed()) {
      return cmd_partition_preview(pp_config, pp_preset, pp_seed, pp_indices);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const CapacityError& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
