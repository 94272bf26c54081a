#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "approxfl/accel.hpp"
#include "approxfl/dataset.hpp"
#include "approxfl/engine.hpp"
#include "approxfl/model.hpp"
#include "approxfl/partition.hpp"
#include "approxfl/strategy.hpp"

namespace approxfl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MixtureEntry {
  std::string accelerator = "C1";
  double fraction = 1.0;
  double scale = 1.0;  // width factor for subset strategies
};

struct DatasetConfig {
  std::string kind = "synthetic";  // synthetic | file
  SyntheticSpec synth;             // train portion; test drawn after it
  int test_samples = 1000;
  std::string train_path, test_path;
};

struct LrSchedule {
  std::string kind = "cosine";  // cosine | constant
  double initial = 0.1;
  double final_lr = 0.001;
  double at(int round, int rounds) const;
};

struct ModelConfig {
  std::string arch = "desk-cnn";  // desk-cnn | resnet20
  int classes = 10;
  int in_ch = 3, in_h = 8, in_w = 8;
};

struct RunConfig {
  int schema_version = 1;
  std::string name = "run";
  ModelConfig model;
  DatasetConfig dataset;
  PartitionSpec partition;  // devices mirrors fleet size
  std::vector<MixtureEntry> mixture{MixtureEntry{}};
  StrategyKind strategy = StrategyKind::Ours;
  int rounds = 30;
  int clients_per_round = 16;
  LocalTrainConfig local;
  LrSchedule lr;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int threads = 0;  // 0: hardware concurrency
  std::string output_dir = "out";
  std::string energy_table_path;

  void validate() const;  // throws ConfigError naming the offending field
};

// Named bundles: C1..C5, S1..S4, F1..F3, Mix1..Mix4, DropDevices.
std::vector<std::string> preset_names();
RunConfig preset_config(const std::string& name);

// JSON document; a "preset" key seeds the config, remaining keys override.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);
std::string config_to_json(const RunConfig& cfg);

ModelSpec model_from_config(const ModelConfig& m);

// Train/test pair per the dataset config. Synthetic mode draws
// train+test samples from one stream and splits, so the sets are disjoint
// but share class templates.
std::pair<Dataset, Dataset> load_train_test(const DatasetConfig& d);

// Defaults overlaid with any keys present in the file.
EnergyTable load_energy_table(const std::string& path);

}  // namespace approxfl
