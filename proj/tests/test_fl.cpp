#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "approxfl/config.hpp"
#include "approxfl/dataset.hpp"
#include "approxfl/federated.hpp"
#include "approxfl/metrics.hpp"
#include "approxfl/model.hpp"
#include "approxfl/partition.hpp"
#include "approxfl/strategy.hpp"
#include "doctest.h"

using namespace approxfl;
namespace fs = std::filesystem;

namespace {

int ulp_distance(float a, float b) {
  if (a == b) return 0;
  const auto ua = std::bit_cast<std::int32_t>(a);
  const auto ub = std::bit_cast<std::int32_t>(b);
  if ((ua < 0) != (ub < 0)) return INT32_MAX;
  return static_cast<int>(std::abs(static_cast<long>(ua) - ub));
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path d = fs::temp_directory_path() / leaf;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_SUITE("fl") {

TEST_CASE("strategy names parse with separator and case variants") {
  CHECK(strategy_from_name("ours") == StrategyKind::Ours);
  CHECK(strategy_from_name("energy-aware") == StrategyKind::Ours);
  CHECK(strategy_from_name("HeteroFL") == StrategyKind::HeteroFL);
  CHECK(strategy_from_name("fedrolex") == StrategyKind::FedRolex);
  CHECK(strategy_from_name("small_model") == StrategyKind::SmallModel);
  CHECK(strategy_from_name("drop-devices") == StrategyKind::DropDevices);
  CHECK(strategy_from_name("FedProx") == StrategyKind::FedProx);
  CHECK_THROWS_AS(strategy_from_name("fedavg2"), std::invalid_argument);
  for (StrategyKind k : {StrategyKind::Ours, StrategyKind::HeteroFL, StrategyKind::FedRolex,
                         StrategyKind::SmallModel, StrategyKind::DropDevices,
                         StrategyKind::FedProx}) {
    CHECK(strategy_from_name(strategy_name(k)) == k);
  }
}

TEST_CASE("channel windows: prefix for static strategies, rolling for FedRolex") {
  CHECK(channel_window(StrategyKind::HeteroFL, 8, 2, 0) == std::vector<int>{0, 1});
  CHECK(channel_window(StrategyKind::HeteroFL, 8, 2, 13) == std::vector<int>{0, 1});
  CHECK(channel_window(StrategyKind::Ours, 8, 3, 5) == std::vector<int>{0, 1, 2});
  CHECK(channel_window(StrategyKind::FedRolex, 8, 2, 0) == std::vector<int>{0, 1});
  CHECK(channel_window(StrategyKind::FedRolex, 8, 2, 7) == std::vector<int>{7, 0});
  CHECK(channel_window(StrategyKind::FedRolex, 8, 2, 8) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(channel_window(StrategyKind::Ours, 8, 9, 0), std::invalid_argument);
  CHECK_THROWS_AS(channel_window(StrategyKind::Ours, 8, 0, 0), std::invalid_argument);
}

TEST_CASE("window coverage and invariance across the width grid") {
  for (int full : {8, 16, 64}) {
    for (double s : {0.5, 0.25, 0.125}) {
      const int sub = static_cast<int>(full * s);
      // Rolling windows visit every channel equally over a full cycle.
      std::vector<int> visits(full, 0);
      for (int r = 0; r < full; ++r) {
        const std::vector<int> w = channel_window(StrategyKind::FedRolex, full, sub, r);
        REQUIRE(static_cast<int>(w.size()) == sub);
        std::set<int> uniq(w.begin(), w.end());
        CHECK(static_cast<int>(uniq.size()) == sub);  // no duplicates
        for (int ch : w) {
          REQUIRE(ch >= 0);
          REQUIRE(ch < full);
          ++visits[ch];
        }
      }
      for (int ch = 0; ch < full; ++ch) CHECK(visits[ch] == sub);

      // Static windows never move and are the identical prefix.
      const std::vector<int> base = channel_window(StrategyKind::HeteroFL, full, sub, 0);
      for (int r = 1; r < 2 * full; ++r) {
        CHECK(channel_window(StrategyKind::HeteroFL, full, sub, r) == base);
        CHECK(channel_window(StrategyKind::Ours, full, sub, r) == base);
      }
      for (int i = 0; i < sub; ++i) CHECK(base[i] == i);

      // Same arguments, same answer.
      CHECK(channel_window(StrategyKind::FedRolex, full, sub, 3) ==
            channel_window(StrategyKind::FedRolex, full, sub, 3));
    }
  }
}

TEST_CASE("subset masks stay structurally consistent") {
  const ModelSpec full_spec = ModelSpec::resnet20(10, 3, 16);
  const Program full = compile(full_spec);
  const Program sub = compile(full_spec.scaled(0.5));
  REQUIRE(full.ops.size() == sub.ops.size());
  REQUIRE(full.params.size() == sub.params.size());

  for (const StrategyKind kind : {StrategyKind::HeteroFL, StrategyKind::FedRolex}) {
    for (const int round : {0, 5}) {
      const SubsetMask mask = build_subset_mask(full, sub, kind, round);
      REQUIRE(mask.params.size() == full.params.size());

      for (std::size_t pi = 0; pi < full.params.size(); ++pi) {
        const ParamMeta& fm = full.params[pi];
        const ParamMeta& sm = sub.params[pi];
        const ParamSlice& sl = mask.params[pi];
        // Slice extents match the sub-model parameter shape.
        CHECK(static_cast<int>(sl.rows.size()) == sm.shape[0]);
        if (sm.shape.size() > 1) {
          CHECK(static_cast<int>(sl.cols.size()) == sm.shape[1]);
        } else {
          CHECK(sl.cols.empty());
        }
        // Every index addresses the full tensor.
        for (int r : sl.rows) {
          CHECK(r >= 0);
          CHECK(r < fm.shape[0]);
        }
        const Op& op = full.ops[fm.op_index];
        if (op.kind == OpKind::Conv || op.kind == OpKind::Dense) {
          if (fm.role == 'w') {
            // Input channels follow the producing slot's kept channels.
            CHECK(sl.cols == mask.slot_channels[op.in0]);
            if (op.keep_full_out) {
              CHECK(static_cast<int>(sl.rows.size()) == fm.shape[0]);
              for (int i = 0; i < fm.shape[0]; ++i) CHECK(sl.rows[i] == i);
            }
          }
        }
        if (op.kind == OpKind::BatchNorm) {
          // All four parameters mirror the producing conv window.
          CHECK(sl.rows == mask.slot_channels[op.in0]);
        }
      }

      // The first conv consumes the physical input: identity channels.
      for (const Op& op : full.ops) {
        if (op.kind == OpKind::Conv && op.first_sa) {
          CHECK(mask.params[op.w].cols == std::vector<int>{0, 1, 2});
        }
        if (op.kind == OpKind::Add) {
          CHECK(mask.slot_channels[op.in0] == mask.slot_channels[op.in1]);
        }
      }
    }
  }
}

TEST_CASE("extract and merge round-trip bitwise through an identity weight") {
  const ModelSpec spec = ModelSpec::resnet20(10, 3, 8);
  const Program full = compile(spec);
  const Program sub = compile(spec.scaled(0.5));
  Rng rng(8);
  std::vector<Tensor> server = init_params(full, rng);
  const SubsetMask mask = build_subset_mask(full, sub, StrategyKind::HeteroFL, 0);
  const std::vector<Tensor> slice = extract_submodel(full, sub, mask, server);

  for (const double w : {1.0, 3.0}) {
    std::vector<Tensor> merged = server;
    MergeAccumulator acc(full);
    acc.add(sub, mask, slice, w);
    acc.finish(merged);
    for (std::size_t pi = 0; pi < server.size(); ++pi) {
      CHECK(merged[pi].numel() == server[pi].numel());
      CHECK(std::memcmp(merged[pi].ptr(), server[pi].ptr(),
                        server[pi].numel() * sizeof(float)) == 0);
    }
  }
}

TEST_CASE("merge writes only masked elements; the rest keep server bits") {
  const ModelSpec spec = ModelSpec::resnet20(10, 3, 8);
  const Program full = compile(spec);
  const Program sub = compile(spec.scaled(0.25));
  Rng rng(4);
  const std::vector<Tensor> server = init_params(full, rng);
  const SubsetMask mask = build_subset_mask(full, sub, StrategyKind::HeteroFL, 0);
  std::vector<Tensor> slice = extract_submodel(full, sub, mask, server);
  for (Tensor& t : slice) {
    for (std::size_t e = 0; e < t.numel(); ++e) t[e] += 1.0f;
  }

  std::vector<Tensor> merged = server;
  MergeAccumulator acc(full);
  acc.add(sub, mask, slice, 5.0);
  acc.finish(merged);

  long touched = 0, untouched = 0;
  for (std::size_t pi = 0; pi < server.size(); ++pi) {
    for (std::size_t e = 0; e < server[pi].numel(); ++e) {
      if (merged[pi][e] != server[pi][e]) {
        ++touched;
        CHECK(merged[pi][e] == doctest::Approx(server[pi][e] + 1.0f).epsilon(1e-6));
      } else {
        ++untouched;
      }
    }
  }
  // A quarter-width slice touches well under half of the full model.
  CHECK(touched > 0);
  CHECK(untouched > touched);
  // Element count of the slice equals the number of touched positions.
  long slice_elems = 0;
  for (const Tensor& t : slice) slice_elems += static_cast<long>(t.numel());
  CHECK(touched == slice_elems);
}

TEST_CASE("aggregation equals the brute-force weighted mean and ignores order") {
  const Program prog = compile(ModelSpec::desk_cnn());
  Rng rng(15);
  std::vector<Tensor> server = init_params(prog, rng);
  const SubsetMask identity = build_subset_mask(prog, prog, StrategyKind::Ours, 0);

  const int K = 5;
  const double weights[K] = {3, 17, 40, 2, 11};
  std::vector<std::vector<Tensor>> clients(K, server);
  for (int k = 0; k < K; ++k) {
    Rng crng(100 + k);
    for (Tensor& t : clients[k]) {
      for (std::size_t e = 0; e < t.numel(); ++e) {
        t[e] += static_cast<float>(0.1 * crng.normal());
      }
    }
  }

  std::vector<Tensor> merged = server;
  MergeAccumulator acc(prog);
  for (int k = 0; k < K; ++k) acc.add(prog, identity, clients[k], weights[k]);
  acc.finish(merged);

  // Brute force in extended precision.
  for (std::size_t pi = 0; pi < server.size(); ++pi) {
    for (std::size_t e = 0; e < server[pi].numel(); ++e) {
      long double num = 0.0L, den = 0.0L;
      for (int k = 0; k < K; ++k) {
        num += static_cast<long double>(weights[k]) * clients[k][pi][e];
        den += weights[k];
      }
      const float expect = static_cast<float>(num / den);
      CHECK(ulp_distance(merged[pi][e], expect) <= 1);
    }
  }

  // Permuted client order gives the same float result to the last ulp.
  const int order[K] = {4, 2, 0, 3, 1};
  std::vector<Tensor> merged2 = server;
  MergeAccumulator acc2(prog);
  for (int i = 0; i < K; ++i) acc2.add(prog, identity, clients[order[i]], weights[order[i]]);
  acc2.finish(merged2);
  for (std::size_t pi = 0; pi < server.size(); ++pi) {
    for (std::size_t e = 0; e < server[pi].numel(); ++e) {
      CHECK(ulp_distance(merged[pi][e], merged2[pi][e]) <= 1);
    }
  }
}

TEST_CASE("confusion matrix and accuracy modes") {
  const std::vector<int> labels = {0, 0, 1, 2};
  const std::vector<int> preds = {0, 1, 1, 1};
  const std::vector<long> cm = confusion_matrix(preds, labels, 3);
  CHECK(cm == std::vector<long>{1, 1, 0, 0, 1, 0, 0, 1, 0});

  const std::vector<double> lit = per_class_accuracy(cm, 3, AccuracyMode::Literal);
  CHECK(lit[0] == 0.25);
  CHECK(lit[1] == 0.25);
  CHECK(lit[2] == 0.0);
  const std::vector<double> rec = per_class_accuracy(cm, 3, AccuracyMode::Recall);
  CHECK(rec[0] == 0.5);
  CHECK(rec[1] == 1.0);
  CHECK(rec[2] == 0.0);

  CHECK(top1_accuracy(preds, labels) == 0.5);
  CHECK_THROWS_AS(confusion_matrix({3}, {0}, 3), std::invalid_argument);
  CHECK(accuracy_mode_from_name("literal") == AccuracyMode::Literal);
  CHECK(accuracy_mode_from_name("recall") == AccuracyMode::Recall);
  CHECK_THROWS_AS(accuracy_mode_from_name("macro"), std::invalid_argument);
}

TEST_CASE("group accuracy weighting and fairness variance") {
  CHECK(group_accuracy({0.8, 0.4}, {3, 1}) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(group_accuracy({0.8, 0.4}, {0, 0}) == 0.0);
  CHECK(fairness_variance({0.6, 0.5, 0.4}) == doctest::Approx(0.02 / 3).epsilon(1e-12));
  CHECK(fairness_variance({0.5, 0.5, 0.5}) == 0.0);
  CHECK(fairness_variance({}) == 0.0);
}

TEST_CASE("partition helpers: blocks, device groups, label mixtures") {
  CHECK(rc_class_blocks(10, 3) ==
        std::vector<std::vector<int>>{{0, 1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  CHECK(rc_class_blocks(7, 3) == std::vector<std::vector<int>>{{0, 1, 2}, {3, 4}, {5, 6}});

  const std::vector<int> groups16 = device_data_groups(16, 3);
  REQUIRE(static_cast<int>(groups16.size()) == 16);
  int counts[3] = {0, 0, 0};
  for (int g : groups16) ++counts[g];
  CHECK(counts[0] == 5);
  CHECK(counts[1] == 5);
  CHECK(counts[2] == 6);
  CHECK(std::is_sorted(groups16.begin(), groups16.end()));  // contiguous

  const auto labels = assign_config_labels(100, {{"C1", 1.0 / 3}, {"C4", 2.0 / 3}});
  CHECK(std::count(labels.begin(), labels.end(), "C1") == 33);
  CHECK(std::count(labels.begin(), labels.end(), "C4") == 67);
  CHECK(labels.front() == "C1");
  CHECK(labels.back() == "C4");
}

TEST_CASE("partitions are exact covers with balanced shards") {
  const Dataset d = make_synthetic(SyntheticSpec{});
  PartitionSpec ps;
  ps.devices = 16;
  ps.seed = 11;

  for (PartitionKind kind :
       {PartitionKind::Iid, PartitionKind::Dirichlet, PartitionKind::ResourceCorrelated}) {
    ps.kind = kind;
    const auto shards = partition(d.labels, d.classes, ps);
    REQUIRE(static_cast<int>(shards.size()) == 16);
    std::vector<int> seen(d.size(), 0);
    for (const auto& s : shards) {
      for (int i : s) {
        REQUIRE(i >= 0);
        REQUIRE(i < d.size());
        ++seen[i];
      }
    }
    for (int c : seen) CHECK(c == 1);  // bijection

    // Deterministic for identical specs.
    const auto again = partition(d.labels, d.classes, ps);
    CHECK(shards == again);
  }

  // Equal-sized shards (+-1) in iid mode, and seed changes the layout.
  ps.kind = PartitionKind::Iid;
  const auto iid = partition(d.labels, d.classes, ps);
  for (const auto& s : iid) {
    CHECK(static_cast<int>(s.size()) == d.size() / 16);
  }
  ps.seed = 12;
  CHECK(partition(d.labels, d.classes, ps) != iid);
}

TEST_CASE("resource-correlated partitions isolate class blocks per group") {
  const Dataset d = make_synthetic(SyntheticSpec{});
  PartitionSpec ps;
  ps.kind = PartitionKind::ResourceCorrelated;
  ps.devices = 16;
  ps.groups = 3;
  ps.seed = 5;
  const auto shards = partition(d.labels, d.classes, ps);
  const auto blocks = rc_class_blocks(d.classes, 3);
  const auto dev_groups = device_data_groups(16, 3);

  std::vector<long> group_sizes(3, 0);
  for (int dev = 0; dev < 16; ++dev) {
    const int g = dev_groups[dev];
    const std::set<int> allowed(blocks[g].begin(), blocks[g].end());
    for (int i : shards[dev]) {
      CHECK(allowed.count(d.labels[i]) == 1);
    }
    group_sizes[g] += static_cast<long>(shards[dev].size());
  }
  // Balanced within each group to +-1.
  for (int g = 0; g < 3; ++g) {
    long mn = d.size(), mx = 0;
    for (int dev = 0; dev < 16; ++dev) {
      if (dev_groups[dev] != g) continue;
      mn = std::min(mn, static_cast<long>(shards[dev].size()));
      mx = std::max(mx, static_cast<long>(shards[dev].size()));
    }
    CHECK(mx - mn <= 1);
  }
}

TEST_CASE("synthetic dataset is deterministic, balanced, and stream-addressed") {
  SyntheticSpec spec;
  spec.samples = 120;
  const Dataset a = make_synthetic(spec);
  const Dataset b = make_synthetic(spec);
  CHECK(a.labels == b.labels);
  CHECK(a.images == b.images);
  CHECK(a.size() == 120);
  CHECK(a.channels == 3);
  CHECK(a.height == 8);
  CHECK(a.width == 8);
  for (int i = 0; i < a.size(); ++i) CHECK(a.labels[i] == i % a.classes);

  // A longer draw from the same stream starts with the same samples.
  SyntheticSpec longer = spec;
  longer.samples = 200;
  const Dataset c = make_synthetic(longer);
  CHECK(std::memcmp(c.images.data(), a.images.data(),
                    a.images.size() * sizeof(float)) == 0);

  SyntheticSpec other = spec;
  other.seed = 8;
  const Dataset e = make_synthetic(other);
  CHECK(e.images != a.images);
}

TEST_CASE("dataset container round-trips and rejects malformed files") {
  const fs::path dir = fresh_dir("approxfl-ds-test");
  const fs::path path = dir / "t.axfd";
  SyntheticSpec spec;
  spec.samples = 50;
  const Dataset d = make_synthetic(spec);
  write_dataset(d, path.string());

  const Dataset r = read_dataset(path.string());
  CHECK(r.channels == d.channels);
  CHECK(r.height == d.height);
  CHECK(r.width == d.width);
  CHECK(r.classes == d.classes);
  CHECK(r.labels == d.labels);
  CHECK(r.images == d.images);

  // Truncated payload.
  std::string payload = read_file(path);
  std::ofstream trunc(dir / "trunc.axfd", std::ios::binary);
  trunc.write(payload.data(), static_cast<long>(payload.size() / 2));
  trunc.close();
  CHECK_THROWS_AS(read_dataset((dir / "trunc.axfd").string()), std::invalid_argument);

  // Wrong magic.
  std::string bad = payload;
  bad[0] = 'Z';
  std::ofstream badf(dir / "bad.axfd", std::ios::binary);
  badf.write(bad.data(), static_cast<long>(bad.size()));
  badf.close();
  CHECK_THROWS_AS(read_dataset((dir / "bad.axfd").string()), std::invalid_argument);

  CHECK_THROWS_AS(read_dataset((dir / "missing.axfd").string()), std::invalid_argument);
}

TEST_CASE("train/test split shares templates but not samples") {
  DatasetConfig dc;
  dc.synth.samples = 300;
  dc.test_samples = 100;
  const auto [train, test] = load_train_test(dc);
  CHECK(train.size() == 300);
  CHECK(test.size() == 100);
  CHECK(train.classes == test.classes);

  // The test set continues the same stream: equal to the tail of a single
  // 400-sample draw.
  SyntheticSpec whole = dc.synth;
  whole.samples = 400;
  const Dataset all = make_synthetic(whole);
  CHECK(std::memcmp(train.images.data(), all.images.data(),
                    train.images.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(test.images.data(),
                    all.images.data() + train.images.size(),
                    test.images.size() * sizeof(float)) == 0);

  // No test image duplicates a train image.
  const int elems = train.sample_elems();
  for (int t = 0; t < test.size(); t += 7) {
    bool dup = false;
    for (int i = 0; i < train.size(); ++i) {
      if (std::memcmp(test.sample(t), train.sample(i),
                      static_cast<std::size_t>(elems) * sizeof(float)) == 0) {
        dup = true;
        break;
      }
    }
    CHECK_FALSE(dup);
  }
}

TEST_CASE("presets resolve, validate, and carry the documented fixed points") {
  const std::vector<std::string> names = preset_names();
  CHECK(names.size() == 17);
  for (const std::string& n : names) {
    const RunConfig cfg = preset_config(n);
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.partition.kind == PartitionKind::ResourceCorrelated);
    CHECK(cfg.rounds == 30);
    CHECK(cfg.partition.devices == 16);
  }

  const RunConfig c3 = preset_config("C3");
  REQUIRE(c3.mixture.size() == 1);
  CHECK(c3.mixture[0].accelerator == "C3");
  CHECK(c3.strategy == StrategyKind::Ours);
  const AcceleratorConfig hw = accelerator_from_label(c3.mixture[0].accelerator);
  CHECK(hw.storage == FloatFormat::bfloat16());
  CHECK(hw.multiplier.kind == MultiplierKind::Mbm);
  CHECK(hw.multiplier.mantissa_bits == 7);

  const RunConfig s4 = preset_config("S4");
  CHECK(s4.strategy == StrategyKind::HeteroFL);
  CHECK(s4.mixture[0].accelerator == "C1");
  CHECK(s4.mixture[0].scale == 0.125);

  const RunConfig f2 = preset_config("F2");
  CHECK(f2.strategy == StrategyKind::FedProx);
  CHECK(f2.local.prox_mu == doctest::Approx(0.01));
  CHECK(f2.local.batch_fraction == 0.5);

  const RunConfig drop = preset_config("DropDevices");
  CHECK(drop.strategy == StrategyKind::DropDevices);
  REQUIRE(drop.mixture.size() == 2);
  CHECK(drop.mixture[0].accelerator == "C1");
  CHECK(drop.mixture[0].fraction == doctest::Approx(1.0 / 3));
  CHECK(drop.mixture[1].accelerator == "C4");

  CHECK_THROWS_AS(preset_config("C9"), ConfigError);
}

TEST_CASE("config parsing: defaults, overrides, and field-naming errors") {
  const RunConfig base = parse_config_text("{}", "test");
  CHECK(base.name == "run");
  CHECK(base.rounds == 30);
  CHECK(base.model.arch == "desk-cnn");

  const RunConfig r = parse_config_text(
      R"({"preset": "C2", "rounds": 5, "local": {"batch_size": 8}})", "test");
  CHECK(r.mixture[0].accelerator == "C2");
  CHECK(r.rounds == 5);
  CHECK(r.local.batch_size == 8);

  // Unknown keys are named in the error.
  try {
    parse_config_text(R"({"modell": {}})", "test");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("modell") != std::string::npos);
  }
  try {
    parse_config_text(R"({"local": {"batch_sizee": 8}})", "test");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("batch_sizee") != std::string::npos);
  }

  // Validation failures carry the offending field.
  RunConfig bad = preset_config("C1");
  bad.mixture[0].fraction = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = preset_config("C1");
  bad.clients_per_round = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = preset_config("S4");
  bad.mixture[0].scale = 0.05;  // narrower than a single channel
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  // Round trip through the JSON echo.
  const RunConfig c4 = preset_config("Mix3");
  const std::string echoed = config_to_json(c4);
  const RunConfig back = parse_config_text(echoed, "echo");
  CHECK(config_to_json(back) == echoed);
}

TEST_CASE("learning-rate schedule endpoints") {
  LrSchedule lr;  // cosine 0.1 -> 0.001
  CHECK(lr.at(0, 30) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(lr.at(29, 30) == doctest::Approx(0.001).epsilon(1e-9));
  CHECK(lr.at(10, 30) < lr.at(9, 30));  // monotone decay
  LrSchedule flat;
  flat.kind = "constant";
  flat.initial = 0.05;
  CHECK(flat.at(0, 30) == 0.05);
  CHECK(flat.at(29, 30) == 0.05);
}

TEST_CASE("two-round experiment writes schema-complete deterministic artifacts") {
  RunConfig cfg;
  cfg.name = "tiny";
  cfg.dataset.synth.samples = 200;
  cfg.dataset.test_samples = 100;
  cfg.partition.devices = 4;
  cfg.clients_per_round = 4;
  cfg.rounds = 2;
  cfg.seeds = {1};
  cfg.local.batch_size = 16;
  cfg.threads = 2;

  const fs::path out1 = fresh_dir("approxfl-run-a");
  cfg.output_dir = out1.string();
  const ExperimentResult res = run_experiment(cfg, nullptr);
  REQUIRE(res.seeds.size() == 1);
  REQUIRE(res.seeds[0].rounds.size() == 2);
  CHECK(res.files.size() == 3);

  const fs::path rounds_csv = out1 / "tiny-seed1-rounds.csv";
  const fs::path metrics_csv = out1 / "tiny-seed1-metrics.csv";
  const fs::path summary = out1 / "tiny-summary.json";
  CHECK(fs::exists(rounds_csv));
  CHECK(fs::exists(metrics_csv));
  CHECK(fs::exists(summary));

  const std::string rounds = read_file(rounds_csv);
  CHECK(rounds.rfind("round,device,group,accelerator,scale,strategy,participated,dropped,"
                     "samples,steps,lr,mean_loss,e_sa_pj,e_simd_pj,e_ibuf_pj,e_wbuf_pj,"
                     "e_obuf_pj,e_inmem_pj,e_vmem_pj,e_sram_pj,e_dram_pj,e_total_pj,"
                     "sa_charged_macs,sa_utilized_macs,sa_padded_macs,simd_ops,sram_bits,"
                     "dram_bits\n", 0) == 0);
  CHECK(std::count(rounds.begin(), rounds.end(), '\n') == 1 + 2 * 4);

  const std::string metrics = read_file(metrics_csv);
  CHECK(metrics.rfind("round,lr,test_loss,top1,g1_literal,g2_literal,g3_literal,"
                      "g1_recall,g2_recall,g3_recall,fairness_literal,fairness_recall,"
                      "round_energy_pj,cum_energy_pj\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 2);

  // Byte-identical rerun into a second directory.
  const fs::path out2 = fresh_dir("approxfl-run-b");
  cfg.output_dir = out2.string();
  cfg.threads = 7;  // thread count must not leak into results
  run_experiment(cfg, nullptr);
  CHECK(read_file(out1 / "tiny-seed1-rounds.csv") == read_file(out2 / "tiny-seed1-rounds.csv"));
  CHECK(read_file(out1 / "tiny-seed1-metrics.csv") ==
        read_file(out2 / "tiny-seed1-metrics.csv"));
}

}  // TEST_SUITE
