#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "approxfl/accel.hpp"
#include "approxfl/config.hpp"
#include "approxfl/dataset.hpp"

namespace approxfl {

// One CSV row: a device's share of one round.
struct DeviceRound {
  int round = 0;
  int device = 0;
  int data_group = 0;
  std::string accelerator;
  double scale = 1.0;
  bool participated = false;
  bool dropped = false;
  int samples = 0;
  int steps = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  EnergyLedger energy;
};

struct RoundRecord {
  int round = 0;
  double lr = 0.0;
  double test_loss = 0.0;
  double top1 = 0.0;
  std::vector<double> group_literal;  // per data group
  std::vector<double> group_recall;
  double fairness_literal = 0.0;
  double fairness_recall = 0.0;
  double round_energy_pj = 0.0;
  double cum_energy_pj = 0.0;
  std::vector<DeviceRound> devices;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;
};

// One full federated run for a single seed: partition, per-round client
// training (thread pool), weighted merge in device order, exact-precision
// evaluation with group metrics in both accuracy modes.
SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed,
                    const Dataset& train, const Dataset& test,
                    const EnergyTable& table, std::ostream* log);

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  std::vector<std::string> files;  // artifact paths in write order
};

// Runs every configured seed and writes rounds-seed<N>.csv,
// metrics-seed<N>.csv and summary.json under output_dir.
ExperimentResult run_experiment(const RunConfig& cfg, std::ostream* log);

void write_rounds_csv(const std::string& path, const RunConfig& cfg,
                      const SeedResult& r);
void write_metrics_csv(const std::string& path, const RunConfig& cfg,
                       const SeedResult& r);
std::string summary_json(const RunConfig& cfg,
                         const std::vector<SeedResult>& seeds);

}  // namespace approxfl
