#include "approxfl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace approxfl {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) fail(path + "." + it.key(), "unknown key");
  }
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::string lower(const std::string& s) {
  std::string out;
  for (char c : s) out += static_cast<char>(std::tolower(c));
  return out;
}

int min_conv_width(const std::vector<LayerDef>& layers) {
  int m = 1 << 30;
  for (const LayerDef& l : layers) {
    if (l.type == "conv") m = std::min(m, l.out_ch);
    if (l.type == "residual") m = std::min(m, min_conv_width(l.body));
  }
  return m;
}

void parse_model(const json& j, ModelConfig& m, const std::string& path) {
  check_keys(j, {"arch", "classes", "input"}, path);
  if (const json* v = find(j, "arch")) m.arch = as_string(*v, path + ".arch");
  if (const json* v = find(j, "classes")) m.classes = as_int(*v, path + ".classes");
  if (const json* v = find(j, "input")) {
    if (!v->is_array() || v->size() != 3) {
      fail(path + ".input", "expected [channels, height, width]");
    }
    m.in_ch = as_int((*v)[0], path + ".input[0]");
    m.in_h = as_int((*v)[1], path + ".input[1]");
    m.in_w = as_int((*v)[2], path + ".input[2]");
  }
}

void parse_dataset(const json& j, DatasetConfig& d, const std::string& path) {
  check_keys(j,
             {"kind", "train_samples", "test_samples", "classes", "channels",
              "height", "width", "noise", "seed", "train", "test"},
             path);
  if (const json* v = find(j, "kind")) d.kind = as_string(*v, path + ".kind");
  if (const json* v = find(j, "train_samples")) {
    d.synth.samples = as_int(*v, path + ".train_samples");
  }
  if (const json* v = find(j, "test_samples")) {
    d.test_samples = as_int(*v, path + ".test_samples");
  }
  if (const json* v = find(j, "classes")) {
    d.synth.classes = as_int(*v, path + ".classes");
  }
  if (const json* v = find(j, "channels")) {
    d.synth.channels = as_int(*v, path + ".channels");
  }
  if (const json* v = find(j, "height")) d.synth.height = as_int(*v, path + ".height");
  if (const json* v = find(j, "width")) d.synth.width = as_int(*v, path + ".width");
  if (const json* v = find(j, "noise")) d.synth.noise = as_number(*v, path + ".noise");
  if (const json* v = find(j, "seed")) {
    d.synth.seed = static_cast<std::uint64_t>(as_number(*v, path + ".seed"));
  }
  if (const json* v = find(j, "train")) d.train_path = as_string(*v, path + ".train");
  if (const json* v = find(j, "test")) d.test_path = as_string(*v, path + ".test");
}

void parse_partition(const json& j, PartitionSpec& p, const std::string& path) {
  check_keys(j, {"kind", "alpha", "groups"}, path);
  if (const json* v = find(j, "kind")) {
    try {
      p.kind = partition_kind_from_name(as_string(*v, path + ".kind"));
    } catch (const std::invalid_argument& e) {
      fail(path + ".kind", e.what());
    }
  }
  if (const json* v = find(j, "alpha")) p.alpha = as_number(*v, path + ".alpha");
  if (const json* v = find(j, "groups")) p.groups = as_int(*v, path + ".groups");
}

void parse_fleet(const json& j, RunConfig& c, const std::string& path) {
  check_keys(j, {"devices", "mixture"}, path);
  if (const json* v = find(j, "devices")) {
    c.partition.devices = as_int(*v, path + ".devices");
  }
  if (const json* v = find(j, "mixture")) {
    if (!v->is_array() || v->empty()) fail(path + ".mixture", "expected a non-empty array");
    c.mixture.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string epath = path + ".mixture[" + std::to_string(i) + "]";
      const json& e = (*v)[i];
      if (!e.is_object()) fail(epath, "expected an object");
      check_keys(e, {"accelerator", "fraction", "scale"}, epath);
      MixtureEntry me;
      if (const json* a = find(e, "accelerator")) {
        me.accelerator = as_string(*a, epath + ".accelerator");
      }
      if (const json* f = find(e, "fraction")) {
        me.fraction = as_number(*f, epath + ".fraction");
      }
      if (const json* s = find(e, "scale")) me.scale = as_number(*s, epath + ".scale");
      c.mixture.push_back(me);
    }
  }
}

void parse_local(const json& j, LocalTrainConfig& l, const std::string& path) {
  check_keys(j, {"batch_size", "epochs", "batch_fraction", "prox_mu"}, path);
  if (const json* v = find(j, "batch_size")) l.batch_size = as_int(*v, path + ".batch_size");
  if (const json* v = find(j, "epochs")) l.epochs = as_int(*v, path + ".epochs");
  if (const json* v = find(j, "batch_fraction")) {
    l.batch_fraction = as_number(*v, path + ".batch_fraction");
  }
  if (const json* v = find(j, "prox_mu")) {
    l.prox_mu = static_cast<float>(as_number(*v, path + ".prox_mu"));
  }
}

void parse_lr(const json& j, LrSchedule& s, const std::string& path) {
  check_keys(j, {"schedule", "initial", "final"}, path);
  if (const json* v = find(j, "schedule")) s.kind = as_string(*v, path + ".schedule");
  if (const json* v = find(j, "initial")) s.initial = as_number(*v, path + ".initial");
  if (const json* v = find(j, "final")) s.final_lr = as_number(*v, path + ".final");
}

RunConfig parse_config(const json& j, const std::string& origin) {
  if (!j.is_object()) fail(origin, "top-level document must be an object");
  check_keys(j,
             {"schema_version", "preset", "name", "model", "dataset",
              "partition", "fleet", "strategy", "rounds", "clients_per_round",
              "local", "lr", "seeds", "threads", "output_dir", "energy_table"},
             origin);
  RunConfig c;
  if (const json* v = find(j, "preset")) {
    c = preset_config(as_string(*v, origin + ".preset"));
  }
  if (const json* v = find(j, "schema_version")) {
    c.schema_version = as_int(*v, origin + ".schema_version");
  }
  if (const json* v = find(j, "name")) c.name = as_string(*v, origin + ".name");
  if (const json* v = find(j, "model")) parse_model(*v, c.model, origin + ".model");
  if (const json* v = find(j, "dataset")) {
    parse_dataset(*v, c.dataset, origin + ".dataset");
  }
  if (const json* v = find(j, "partition")) {
    parse_partition(*v, c.partition, origin + ".partition");
  }
  if (const json* v = find(j, "fleet")) parse_fleet(*v, c, origin + ".fleet");
  if (const json* v = find(j, "strategy")) {
    try {
      c.strategy = strategy_from_name(as_string(*v, origin + ".strategy"));
    } catch (const std::invalid_argument& e) {
      fail(origin + ".strategy", e.what());
    }
  }
  if (const json* v = find(j, "rounds")) c.rounds = as_int(*v, origin + ".rounds");
  if (const json* v = find(j, "clients_per_round")) {
    c.clients_per_round = as_int(*v, origin + ".clients_per_round");
  }
  if (const json* v = find(j, "local")) parse_local(*v, c.local, origin + ".local");
  if (const json* v = find(j, "lr")) parse_lr(*v, c.lr, origin + ".lr");
  if (const json* v = find(j, "seeds")) {
    if (!v->is_array() || v->empty()) fail(origin + ".seeds", "expected a non-empty array");
    c.seeds.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string p = origin + ".seeds[" + std::to_string(i) + "]";
      if (!(*v)[i].is_number_integer()) fail(p, "expected an integer");
      c.seeds.push_back((*v)[i].get<std::uint64_t>());
    }
  }
  if (const json* v = find(j, "threads")) c.threads = as_int(*v, origin + ".threads");
  if (const json* v = find(j, "output_dir")) {
    c.output_dir = as_string(*v, origin + ".output_dir");
  }
  if (const json* v = find(j, "energy_table")) {
    c.energy_table_path = as_string(*v, origin + ".energy_table");
  }
  c.validate();
  return c;
}

}  // namespace

double LrSchedule::at(int round, int rounds) const {
  if (kind == "constant" || rounds <= 1) return initial;
  const double t = static_cast<double>(round) / static_cast<double>(rounds - 1);
  return final_lr + 0.5 * (initial - final_lr) * (1.0 + std::cos(t * M_PI));
}

void RunConfig::validate() const {
  if (schema_version != 1) fail("schema_version", "unsupported version");
  if (model.arch != "desk-cnn" && model.arch != "resnet20") {
    fail("model.arch", "expected desk-cnn or resnet20");
  }
  if (model.classes < 2) fail("model.classes", "need at least 2 classes");
  if (model.in_ch < 1 || model.in_h < 1 || model.in_w < 1) {
    fail("model.input", "dimensions must be positive");
  }
  if (model.in_h != model.in_w) fail("model.input", "expected square input");
  if (dataset.kind == "synthetic") {
    if (dataset.synth.samples < 1) fail("dataset.train_samples", "must be positive");
    if (dataset.test_samples < 1) fail("dataset.test_samples", "must be positive");
    if (dataset.synth.classes != model.classes) {
      fail("dataset.classes", "does not match model.classes");
    }
    if (dataset.synth.channels != model.in_ch || dataset.synth.height != model.in_h ||
        dataset.synth.width != model.in_w) {
      fail("dataset", "sample dimensions do not match model.input");
    }
  } else if (dataset.kind == "file") {
    if (dataset.train_path.empty()) fail("dataset.train", "path required");
    if (dataset.test_path.empty()) fail("dataset.test", "path required");
  } else {
    fail("dataset.kind", "expected synthetic or file");
  }
  if (partition.devices < 1) fail("fleet.devices", "must be positive");
  if (partition.groups < 1) fail("partition.groups", "must be positive");
  if (partition.kind == PartitionKind::Dirichlet && partition.alpha <= 0.0) {
    fail("partition.alpha", "must be positive");
  }
  if (partition.kind == PartitionKind::ResourceCorrelated &&
      model.classes < partition.groups) {
    fail("partition.groups", "more groups than classes");
  }
  if (mixture.empty()) fail("fleet.mixture", "must not be empty");
  double frac_sum = 0.0;
  const int min_width = min_conv_width(model_from_config(model).layers);
  for (std::size_t i = 0; i < mixture.size(); ++i) {
    const std::string p = "fleet.mixture[" + std::to_string(i) + "]";
    const MixtureEntry& e = mixture[i];
    try {
      accelerator_from_label(e.accelerator);
    } catch (const std::invalid_argument& err) {
      fail(p + ".accelerator", err.what());
    }
    if (e.fraction <= 0.0 || e.fraction > 1.0) fail(p + ".fraction", "expected (0, 1]");
    if (e.scale <= 0.0 || e.scale > 1.0) fail(p + ".scale", "expected (0, 1]");
    if (static_cast<int>(e.scale * min_width) < 1) {
      fail(p + ".scale", "scales the narrowest layer to zero channels");
    }
    frac_sum += e.fraction;
  }
  if (std::fabs(frac_sum - 1.0) > 1e-9) {
    fail("fleet.mixture", "fractions must sum to 1");
  }
  if (rounds < 1) fail("rounds", "must be positive");
  if (clients_per_round < 1 || clients_per_round > partition.devices) {
    fail("clients_per_round", "expected [1, fleet.devices]");
  }
  if (local.batch_size < 1) fail("local.batch_size", "must be positive");
  if (local.epochs < 1) fail("local.epochs", "must be positive");
  if (local.batch_fraction <= 0.0 || local.batch_fraction > 1.0) {
    fail("local.batch_fraction", "expected (0, 1]");
  }
  if (local.prox_mu < 0.0f) fail("local.prox_mu", "must be non-negative");
  if (lr.kind != "cosine" && lr.kind != "constant") {
    fail("lr.schedule", "expected cosine or constant");
  }
  if (lr.initial <= 0.0) fail("lr.initial", "must be positive");
  if (lr.final_lr < 0.0) fail("lr.final", "must be non-negative");
  if (seeds.empty()) fail("seeds", "must not be empty");
  if (threads < 0) fail("threads", "must be non-negative");
  if (output_dir.empty()) fail("output_dir", "must not be empty");
}

std::vector<std::string> preset_names() {
  return {"C1",   "C2",   "C3",   "C4",   "C5",   "S1",   "S2",
          "S3",   "S4",   "F1",   "F2",   "F3",   "Mix1", "Mix2",
          "Mix3", "Mix4", "DropDevices"};
}

RunConfig preset_config(const std::string& name) {
  const std::string key = lower(name);
  RunConfig c;
  c.partition.kind = PartitionKind::ResourceCorrelated;
  auto homogeneous = [&](const std::string& label, StrategyKind s, double scale = 1.0) {
    c.mixture = {MixtureEntry{label, 1.0, scale}};
    c.strategy = s;
  };
  if (key == "c1" || key == "c2" || key == "c3" || key == "c4" || key == "c5") {
    c.name = "C" + key.substr(1);
    homogeneous("C" + key.substr(1), StrategyKind::Ours);
  } else if (key == "s1" || key == "s2" || key == "s3" || key == "s4") {
    static const double scales[] = {1.0, 0.5, 0.25, 0.125};
    c.name = "S" + key.substr(1);
    homogeneous("C1", StrategyKind::HeteroFL, scales[key[1] - '1']);
  } else if (key == "f1" || key == "f2" || key == "f3") {
    static const double fractions[] = {1.0, 0.5, 0.25};
    c.name = "F" + key.substr(1);
    homogeneous("C1", StrategyKind::FedProx);
    c.local.batch_fraction = fractions[key[1] - '1'];
    c.local.prox_mu = 0.01f;
  } else if (key == "mix1") {
    c.name = "Mix1";
    c.strategy = StrategyKind::Ours;
    c.mixture = {{"C1", 0.2, 1.0}, {"C2", 0.8, 1.0}};
  } else if (key == "mix2") {
    c.name = "Mix2";
    c.strategy = StrategyKind::Ours;
    c.mixture = {{"C1", 0.2, 1.0}, {"C2", 0.2, 1.0}, {"C3", 0.6, 1.0}};
  } else if (key == "mix3") {
    c.name = "Mix3";
    c.strategy = StrategyKind::Ours;
    c.mixture = {{"C1", 0.2, 1.0}, {"C2", 0.2, 1.0}, {"C3", 0.2, 1.0}, {"C4", 0.4, 1.0}};
  } else if (key == "mix4") {
    c.name = "Mix4";
    c.strategy = StrategyKind::Ours;
    c.mixture = {{"C1", 0.2, 1.0},
                 {"C2", 0.2, 1.0},
                 {"C3", 0.2, 1.0},
                 {"C4", 0.2, 1.0},
                 {"C5", 0.2, 1.0}};
  } else if (key == "dropdevices" || key == "drop-devices") {
    c.name = "DropDevices";
    c.strategy = StrategyKind::DropDevices;
    c.mixture = {{"C1", 1.0 / 3.0, 1.0}, {"C4", 2.0 / 3.0, 1.0}};
  } else {
    throw ConfigError("preset: unknown name " + name);
  }
  return c;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return parse_config(j, origin);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  j["model"] = {{"arch", c.model.arch},
                {"classes", c.model.classes},
                {"input", {c.model.in_ch, c.model.in_h, c.model.in_w}}};
  if (c.dataset.kind == "synthetic") {
    j["dataset"] = {{"kind", "synthetic"},
                    {"train_samples", c.dataset.synth.samples},
                    {"test_samples", c.dataset.test_samples},
                    {"classes", c.dataset.synth.classes},
                    {"channels", c.dataset.synth.channels},
                    {"height", c.dataset.synth.height},
                    {"width", c.dataset.synth.width},
                    {"noise", c.dataset.synth.noise},
                    {"seed", c.dataset.synth.seed}};
  } else {
    j["dataset"] = {{"kind", "file"},
                    {"train", c.dataset.train_path},
                    {"test", c.dataset.test_path}};
  }
  j["partition"] = {{"kind", partition_kind_name(c.partition.kind)},
                    {"alpha", c.partition.alpha},
                    {"groups", c.partition.groups}};
  json mixture = json::array();
  for (const MixtureEntry& e : c.mixture) {
    mixture.push_back({{"accelerator", e.accelerator},
                       {"fraction", e.fraction},
                       {"scale", e.scale}});
  }
  j["fleet"] = {{"devices", c.partition.devices}, {"mixture", mixture}};
  j["strategy"] = strategy_name(c.strategy);
  j["rounds"] = c.rounds;
  j["clients_per_round"] = c.clients_per_round;
  j["local"] = {{"batch_size", c.local.batch_size},
                {"epochs", c.local.epochs},
                {"batch_fraction", c.local.batch_fraction},
                {"prox_mu", c.local.prox_mu}};
  j["lr"] = {{"schedule", c.lr.kind},
             {"initial", c.lr.initial},
             {"final", c.lr.final_lr}};
  j["seeds"] = c.seeds;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  if (!c.energy_table_path.empty()) j["energy_table"] = c.energy_table_path;
  return j.dump(2);
}

ModelSpec model_from_config(const ModelConfig& m) {
  if (m.arch == "resnet20") {
    return ModelSpec::resnet20(m.classes, m.in_ch, m.in_h);
  }
  return ModelSpec::desk_cnn(m.classes, m.in_ch, m.in_h);
}

std::pair<Dataset, Dataset> load_train_test(const DatasetConfig& d) {
  if (d.kind == "file") {
    return {read_dataset(d.train_path), read_dataset(d.test_path)};
  }
  SyntheticSpec all = d.synth;
  all.samples = d.synth.samples + d.test_samples;
  Dataset both = make_synthetic(all);
  Dataset train, test;
  train.channels = test.channels = both.channels;
  train.height = test.height = both.height;
  train.width = test.width = both.width;
  train.classes = test.classes = both.classes;
  const long elems = both.sample_elems();
  train.images.assign(both.images.begin(),
                      both.images.begin() + elems * d.synth.samples);
  train.labels.assign(both.labels.begin(),
                      both.labels.begin() + d.synth.samples);
  test.images.assign(both.images.begin() + elems * d.synth.samples,
                     both.images.end());
  test.labels.assign(both.labels.begin() + d.synth.samples, both.labels.end());
  return {std::move(train), std::move(test)};
}

EnergyTable load_energy_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  check_keys(j,
             {"mac_pj", "alu_pj", "sram_pj_per_bit", "dram_pj_per_bit",
              "counting"},
             path);
  EnergyTable t = EnergyTable::defaults();
  if (const json* v = find(j, "mac_pj")) {
    for (auto it = v->begin(); it != v->end(); ++it) {
      t.mac_pj[it.key()] = as_number(it.value(), path + ".mac_pj." + it.key());
    }
  }
  if (const json* v = find(j, "alu_pj")) t.alu_pj = as_number(*v, path + ".alu_pj");
  if (const json* v = find(j, "sram_pj_per_bit")) {
    for (auto it = v->begin(); it != v->end(); ++it) {
      t.sram_pj_per_bit[std::stoi(it.key())] =
          as_number(it.value(), path + ".sram_pj_per_bit." + it.key());
    }
  }
  if (const json* v = find(j, "dram_pj_per_bit")) {
    t.dram_pj_per_bit = as_number(*v, path + ".dram_pj_per_bit");
  }
  if (const json* v = find(j, "counting")) {
    const std::string p = path + ".counting";
    check_keys(*v,
               {"ibuf_words_per_mac", "obuf_words_per_mac",
                "wbuf_words_per_pass_cell", "vmem_words_per_simd_op",
                "inmem_bits_per_simd_op", "simd_ops_bn", "simd_ops_relu",
                "simd_ops_pool", "simd_ops_softmax", "simd_ops_add",
                "simd_ops_bias", "simd_ops_update"},
               p);
    auto num = [&](const char* key, double& slot) {
      if (const json* w = find(*v, key)) slot = as_number(*w, p + "." + key);
    };
    num("ibuf_words_per_mac", t.ibuf_words_per_mac);
    num("obuf_words_per_mac", t.obuf_words_per_mac);
    num("wbuf_words_per_pass_cell", t.wbuf_words_per_pass_cell);
    num("vmem_words_per_simd_op", t.vmem_words_per_simd_op);
    num("inmem_bits_per_simd_op", t.inmem_bits_per_simd_op);
    num("simd_ops_bn", t.simd_ops_bn);
    num("simd_ops_relu", t.simd_ops_relu);
    num("simd_ops_pool", t.simd_ops_pool);
    num("simd_ops_softmax", t.simd_ops_softmax);
    num("simd_ops_add", t.simd_ops_add);
    num("simd_ops_bias", t.simd_ops_bias);
    num("simd_ops_update", t.simd_ops_update);
  }
  return t;
}

}  // namespace approxfl
