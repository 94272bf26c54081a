#include "approxfl/federated.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "approxfl/engine.hpp"
#include "approxfl/metrics.hpp"
#include "approxfl/model.hpp"
#include "approxfl/partition.hpp"
#include "approxfl/strategy.hpp"

namespace approxfl {
namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kPartitionTag = 0xA127;
constexpr std::uint64_t kInitTag = 0x1217;
constexpr std::uint64_t kSelectTag = 0x5E1E;
constexpr std::uint64_t kClientTag = 0xC11E0000ULL;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// floor(fraction * devices) per entry in order, remainder to the last.
std::vector<int> mixture_entry_per_device(int devices,
                                          const std::vector<MixtureEntry>& mix) {
  std::vector<int> entry(devices, static_cast<int>(mix.size()) - 1);
  int filled = 0;
  for (std::size_t i = 0; i + 1 < mix.size(); ++i) {
    int n = static_cast<int>(mix[i].fraction * devices);
    for (int k = 0; k < n && filled < devices; ++k) {
      entry[filled++] = static_cast<int>(i);
    }
  }
  return entry;
}

struct ClientOutcome {
  int device = -1;
  bool dropped = false;
  LocalTrainResult result;
  SubsetMask mask;
  const Program* sub_prog = nullptr;
  EnergyLedger energy;
};

struct EvalMetrics {
  double loss = 0.0;
  double top1 = 0.0;
  std::vector<double> group_literal, group_recall;
  double fairness_literal = 0.0, fairness_recall = 0.0;
};

EvalMetrics eval_global(const Program& prog, const std::vector<Tensor>& params,
                        const Dataset& test,
                        const std::vector<std::vector<long>>& group_hist) {
  const ExecSpec exact{};
  const int chunk = 256;
  std::vector<int> preds;
  preds.reserve(test.size());
  double loss_sum = 0.0;
  for (int at = 0; at < test.size(); at += chunk) {
    const int b = std::min(chunk, test.size() - at);
    EvalResult er = evaluate(prog, params, test.sample(at),
                             test.labels.data() + at, b, exact);
    loss_sum += er.loss * b;
    preds.insert(preds.end(), er.predictions.begin(), er.predictions.end());
  }
  EvalMetrics m;
  m.loss = loss_sum / test.size();
  m.top1 = top1_accuracy(preds, test.labels);
  const std::vector<long> conf = confusion_matrix(preds, test.labels, test.classes);
  const std::vector<double> lit =
      per_class_accuracy(conf, test.classes, AccuracyMode::Literal);
  const std::vector<double> rec =
      per_class_accuracy(conf, test.classes, AccuracyMode::Recall);
  for (const std::vector<long>& hist : group_hist) {
    m.group_literal.push_back(group_accuracy(lit, hist));
    m.group_recall.push_back(group_accuracy(rec, hist));
  }
  m.fairness_literal = fairness_variance(m.group_literal);
  m.fairness_recall = fairness_variance(m.group_recall);
  return m;
}

}  // namespace

SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed,
                    const Dataset& train, const Dataset& test,
                    const EnergyTable& table, std::ostream* log) {
  const int devices = cfg.partition.devices;
  PartitionSpec ps = cfg.partition;
  ps.seed = Rng::mix(seed, kPartitionTag);
  const std::vector<std::vector<int>> shards =
      partition(train.labels, train.classes, ps);
  const std::vector<int> data_group = device_data_groups(devices, ps.groups);

  const std::vector<int> entry = mixture_entry_per_device(devices, cfg.mixture);
  std::vector<AcceleratorConfig> accel(devices);
  std::vector<double> scale(devices, 1.0);
  for (int d = 0; d < devices; ++d) {
    accel[d] = accelerator_from_label(cfg.mixture[entry[d]].accelerator);
    scale[d] = cfg.strategy == StrategyKind::SmallModel
                   ? 1.0
                   : cfg.mixture[entry[d]].scale;
  }

  std::vector<std::vector<long>> group_hist(
      ps.groups, std::vector<long>(train.classes, 0));
  for (int d = 0; d < devices; ++d) {
    for (int idx : shards[d]) ++group_hist[data_group[d]][train.labels[idx]];
  }

  ModelSpec global_spec = model_from_config(cfg.model);
  if (cfg.strategy == StrategyKind::SmallModel) {
    double smin = 1.0;
    for (const MixtureEntry& e : cfg.mixture) smin = std::min(smin, e.scale);
    global_spec = global_spec.scaled(smin);
  }
  const Program full_prog = compile(global_spec);

  std::map<long, std::unique_ptr<Program>> sub_progs;
  auto prog_for_scale = [&](double s) -> const Program& {
    if (s >= 1.0) return full_prog;
    const long key = std::lround(s * 1e6);
    auto it = sub_progs.find(key);
    if (it == sub_progs.end()) {
      it = sub_progs
               .emplace(key, std::make_unique<Program>(
                                 compile(global_spec.scaled(s))))
               .first;
    }
    return *it->second;
  };
  for (int d = 0; d < devices; ++d) {
    check_capacity(prog_for_scale(scale[d]), cfg.local.batch_size, accel[d]);
  }

  Rng init_rng(Rng::mix(seed, kInitTag));
  std::vector<Tensor> params = init_params(full_prog, init_rng);

  SeedResult out;
  out.seed = seed;
  double cum_energy = 0.0;

  int threads = cfg.threads > 0
                    ? cfg.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;

  for (int r = 0; r < cfg.rounds; ++r) {
    const double lr = cfg.lr.at(r, cfg.rounds);

    std::vector<int> selected(devices);
    std::iota(selected.begin(), selected.end(), 0);
    if (cfg.clients_per_round < devices) {
      Rng sel(Rng::mix(seed, kSelectTag, static_cast<std::uint64_t>(r)));
      sel.shuffle(selected);
      selected.resize(cfg.clients_per_round);
      std::sort(selected.begin(), selected.end());
    }

    std::vector<ClientOutcome> outcomes(selected.size());
    {
      std::atomic<std::size_t> next{0};
      std::exception_ptr first_error;
      std::mutex err_mutex;
      auto work = [&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= selected.size()) return;
          const int d = selected[i];
          ClientOutcome& oc = outcomes[i];
          oc.device = d;
          try {
            if (cfg.strategy == StrategyKind::DropDevices && entry[d] != 0) {
              oc.dropped = true;
              continue;
            }
            const Program& sub = prog_for_scale(scale[d]);
            oc.sub_prog = &sub;
            oc.mask = build_subset_mask(full_prog, sub, cfg.strategy, r);
            std::vector<Tensor> start =
                extract_submodel(full_prog, sub, oc.mask, params);
            LocalTrainConfig lc = cfg.local;
            lc.lr = static_cast<float>(lr);
            Rng crng(Rng::mix(seed, kClientTag + static_cast<std::uint64_t>(d),
                              static_cast<std::uint64_t>(r)));
            oc.result = local_train(sub, start, train.images.data(),
                                    train.labels.data(), shards[d],
                                    train.sample_elems(),
                                    ExecSpec::from_accelerator(accel[d]), lc,
                                    crng);
            AccessCounts counts = count_accesses(oc.result.trace, accel[d], table);
            counts *= static_cast<double>(oc.result.steps);
            oc.energy = price(counts, accel[d], table);
          } catch (...) {
            std::lock_guard<std::mutex> g(err_mutex);
            if (!first_error) first_error = std::current_exception();
            next.store(selected.size());
            return;
          }
        }
      };
      const int nthreads =
          std::max(1, std::min<int>(threads, static_cast<int>(selected.size())));
      std::vector<std::thread> pool;
      pool.reserve(nthreads);
      for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
      for (std::thread& t : pool) t.join();
      if (first_error) std::rethrow_exception(first_error);
    }

    MergeAccumulator acc(full_prog);
    for (const ClientOutcome& oc : outcomes) {
      if (oc.dropped) continue;
      acc.add(*oc.sub_prog, oc.mask, oc.result.params,
              static_cast<double>(oc.result.samples));
    }
    acc.finish(params);

    const EvalMetrics m = eval_global(full_prog, params, test, group_hist);

    RoundRecord rec;
    rec.round = r;
    rec.lr = lr;
    rec.test_loss = m.loss;
    rec.top1 = m.top1;
    rec.group_literal = m.group_literal;
    rec.group_recall = m.group_recall;
    rec.fairness_literal = m.fairness_literal;
    rec.fairness_recall = m.fairness_recall;
    for (const ClientOutcome& oc : outcomes) {
      DeviceRound dr;
      dr.round = r;
      dr.device = oc.device;
      dr.data_group = data_group[oc.device];
      dr.accelerator = accel[oc.device].label;
      dr.scale = scale[oc.device];
      dr.participated = !oc.dropped;
      dr.dropped = oc.dropped;
      dr.samples = static_cast<int>(shards[oc.device].size());
      dr.steps = oc.dropped ? 0 : oc.result.steps;
      dr.lr = lr;
      dr.mean_loss = oc.dropped ? 0.0 : oc.result.mean_loss;
      if (!oc.dropped) dr.energy = oc.energy;
      rec.round_energy_pj += dr.energy.total();
      rec.devices.push_back(std::move(dr));
    }
    cum_energy += rec.round_energy_pj;
    rec.cum_energy_pj = cum_energy;

    if (log) {
      char line[256];
      std::snprintf(line, sizeof(line),
                    "[%s seed=%llu] round %d/%d lr=%.4f loss=%.4f top1=%.4f "
                    "energy=%.3e pJ",
                    cfg.name.c_str(), static_cast<unsigned long long>(seed),
                    r + 1, cfg.rounds, lr, m.loss, m.top1,
                    rec.round_energy_pj);
      *log << line << std::endl;
    }
    out.rounds.push_back(std::move(rec));
  }
  return out;
}

void write_rounds_csv(const std::string& path, const RunConfig& cfg,
                      const SeedResult& r) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << "round,device,group,accelerator,scale,strategy,participated,dropped,"
       "samples,steps,lr,mean_loss,e_sa_pj,e_simd_pj,e_ibuf_pj,e_wbuf_pj,"
       "e_obuf_pj,e_inmem_pj,e_vmem_pj,e_sram_pj,e_dram_pj,e_total_pj,"
       "sa_charged_macs,sa_utilized_macs,sa_padded_macs,simd_ops,sram_bits,"
       "dram_bits\n";
  for (const RoundRecord& rr : r.rounds) {
    for (const DeviceRound& d : rr.devices) {
      const EnergyLedger& e = d.energy;
      f << d.round << ',' << d.device << ',' << (d.data_group + 1) << ','
        << d.accelerator << ',' << fmt("%.6g", d.scale) << ','
        << strategy_name(cfg.strategy) << ',' << (d.participated ? 1 : 0)
        << ',' << (d.dropped ? 1 : 0) << ',' << d.samples << ',' << d.steps
        << ',' << fmt("%.6g", d.lr) << ',' << fmt("%.6f", d.mean_loss) << ','
        << fmt("%.6e", e.e_sa) << ',' << fmt("%.6e", e.e_simd) << ','
        << fmt("%.6e", e.e_ibuf) << ',' << fmt("%.6e", e.e_wbuf) << ','
        << fmt("%.6e", e.e_obuf) << ',' << fmt("%.6e", e.e_inmem) << ','
        << fmt("%.6e", e.e_vmem) << ',' << fmt("%.6e", e.e_sram()) << ','
        << fmt("%.6e", e.e_dram) << ',' << fmt("%.6e", e.total()) << ','
        << fmt("%.0f", e.counts.sa_charged) << ','
        << fmt("%.0f", e.counts.sa_utilized) << ','
        << fmt("%.0f", e.counts.sa_padded) << ','
        << fmt("%.0f", e.counts.simd_ops) << ','
        << fmt("%.0f", e.counts.sram_bits()) << ','
        << fmt("%.0f", e.counts.dram_bits) << '\n';
    }
  }
}

void write_metrics_csv(const std::string& path, const RunConfig& cfg,
                       const SeedResult& r) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << "round,lr,test_loss,top1";
  const int groups = cfg.partition.groups;
  for (int g = 1; g <= groups; ++g) f << ",g" << g << "_literal";
  for (int g = 1; g <= groups; ++g) f << ",g" << g << "_recall";
  f << ",fairness_literal,fairness_recall,round_energy_pj,cum_energy_pj\n";
  for (const RoundRecord& rr : r.rounds) {
    f << rr.round << ',' << fmt("%.6g", rr.lr) << ','
      << fmt("%.6f", rr.test_loss) << ',' << fmt("%.6f", rr.top1);
    for (double v : rr.group_literal) f << ',' << fmt("%.6f", v);
    for (double v : rr.group_recall) f << ',' << fmt("%.6f", v);
    f << ',' << fmt("%.8f", rr.fairness_literal) << ','
      << fmt("%.8f", rr.fairness_recall) << ','
      << fmt("%.6e", rr.round_energy_pj) << ','
      << fmt("%.6e", rr.cum_energy_pj) << '\n';
  }
}

std::string summary_json(const RunConfig& cfg,
                         const std::vector<SeedResult>& seeds) {
  auto mean_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair<double, double>(mean,
                                     std::sqrt(var / static_cast<double>(v.size())));
  };

  json j;
  j["config"] = json::parse(config_to_json(cfg));
  j["accuracy_modes"] =
      "literal: per-class hits / all test samples (headline); "
      "recall: per-class hits / class support";

  json per_seed = json::array();
  std::vector<double> top1s, losses, energies, fairness_rec;
  std::vector<std::vector<double>> group_rec(cfg.partition.groups);
  for (const SeedResult& s : seeds) {
    const RoundRecord& last = s.rounds.back();
    top1s.push_back(last.top1);
    losses.push_back(last.test_loss);
    energies.push_back(last.cum_energy_pj);
    fairness_rec.push_back(last.fairness_recall);
    for (int g = 0; g < cfg.partition.groups; ++g) {
      group_rec[g].push_back(last.group_recall[g]);
    }
    json js;
    js["seed"] = s.seed;
    js["final_top1"] = last.top1;
    js["final_loss"] = last.test_loss;
    js["total_energy_pj"] = last.cum_energy_pj;
    js["group_literal"] = last.group_literal;
    js["group_recall"] = last.group_recall;
    js["fairness_literal"] = last.fairness_literal;
    js["fairness_recall"] = last.fairness_recall;
    per_seed.push_back(js);
  }
  j["seeds"] = per_seed;

  json agg;
  auto [t_mean, t_std] = mean_std(top1s);
  auto [l_mean, l_std] = mean_std(losses);
  auto [e_mean, e_std] = mean_std(energies);
  auto [f_mean, f_std] = mean_std(fairness_rec);
  agg["top1_mean"] = t_mean;
  agg["top1_std"] = t_std;
  agg["loss_mean"] = l_mean;
  agg["loss_std"] = l_std;
  agg["total_energy_pj_mean"] = e_mean;
  agg["total_energy_pj_std"] = e_std;
  agg["fairness_recall_mean"] = f_mean;
  agg["fairness_recall_std"] = f_std;
  json gm = json::array(), gs = json::array();
  for (int g = 0; g < cfg.partition.groups; ++g) {
    auto [m, s] = mean_std(group_rec[g]);
    gm.push_back(m);
    gs.push_back(s);
  }
  agg["group_recall_mean"] = gm;
  agg["group_recall_std"] = gs;
  j["aggregate"] = agg;

  json curve = json::array();
  const std::size_t rounds = seeds.front().rounds.size();
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<double> accs, cums;
    for (const SeedResult& s : seeds) {
      accs.push_back(s.rounds[r].top1);
      cums.push_back(s.rounds[r].cum_energy_pj);
    }
    auto [a_mean, a_std] = mean_std(accs);
    auto [c_mean, c_std] = mean_std(cums);
    json row;
    row["round"] = static_cast<int>(r);
    row["cum_energy_pj_mean"] = c_mean;
    row["top1_mean"] = a_mean;
    row["top1_std"] = a_std;
    curve.push_back(row);
  }
  j["accuracy_vs_energy"] = curve;
  return j.dump(2) + "\n";
}

ExperimentResult run_experiment(const RunConfig& cfg, std::ostream* log) {
  cfg.validate();
  auto [train, test] = load_train_test(cfg.dataset);
  if (train.classes != cfg.model.classes ||
      train.channels != cfg.model.in_ch || train.height != cfg.model.in_h ||
      train.width != cfg.model.in_w) {
    throw ConfigError("dataset: loaded dimensions do not match model.input");
  }
  if (test.classes != train.classes || test.sample_elems() != train.sample_elems()) {
    throw ConfigError("dataset: train/test dimensions differ");
  }
  const EnergyTable table = cfg.energy_table_path.empty()
                                ? EnergyTable::defaults()
                                : load_energy_table(cfg.energy_table_path);
  std::filesystem::create_directories(cfg.output_dir);
  if (log) {
    *log << "[" << cfg.name
         << "] group accuracy uses literal mode as headline; recall-mode "
            "columns are emitted alongside"
         << std::endl;
  }
  ExperimentResult res;
  for (std::uint64_t seed : cfg.seeds) {
    SeedResult sr = run_seed(cfg, seed, train, test, table, log);
    const std::string base =
        cfg.output_dir + "/" + cfg.name + "-seed" + std::to_string(seed);
    write_rounds_csv(base + "-rounds.csv", cfg, sr);
    res.files.push_back(base + "-rounds.csv");
    write_metrics_csv(base + "-metrics.csv", cfg, sr);
    res.files.push_back(base + "-metrics.csv");
    res.seeds.push_back(std::move(sr));
  }
  const std::string spath = cfg.output_dir + "/" + cfg.name + "-summary.json";
  std::ofstream sf(spath, std::ios::binary);
  if (!sf) throw std::runtime_error(spath + ": cannot open for writing");
  sf << summary_json(cfg, res.seeds);
  res.files.push_back(spath);
  return res;
}

}  // namespace approxfl
