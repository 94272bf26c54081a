#include "approxfl/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace approxfl {

PartitionKind partition_kind_from_name(const std::string& name) {
  if (name == "iid") return PartitionKind::Iid;
  if (name == "dirichlet" || name == "non-iid") return PartitionKind::Dirichlet;
  if (name == "rc" || name == "rc-non-iid" || name == "resource-correlated") {
    return PartitionKind::ResourceCorrelated;
  }
  throw std::invalid_argument("unknown partition kind: " + name);
}

const char* partition_kind_name(PartitionKind k) {
  switch (k) {
    case PartitionKind::Iid: return "iid";
    case PartitionKind::Dirichlet: return "dirichlet";
    default: return "rc";
  }
}

std::vector<std::vector<int>> rc_class_blocks(int classes, int groups) {
  if (groups <= 0 || classes < groups) {
    throw std::invalid_argument("need at least one class per group");
  }
  std::vector<std::vector<int>> blocks(groups);
  const int base = classes / groups;
  int rem = classes % groups;
  int next = 0;
  for (int g = 0; g < groups; ++g) {
    const int take = base + (rem > 0 ? 1 : 0);
    if (rem > 0) --rem;
    for (int i = 0; i < take; ++i) blocks[g].push_back(next++);
  }
  return blocks;
}

std::vector<int> device_data_groups(int devices, int groups) {
  if (devices <= 0 || groups <= 0) {
    throw std::invalid_argument("devices and groups must be positive");
  }
  std::vector<int> out(devices);
  const int base = devices / groups;
  for (int d = 0; d < devices; ++d) {
    const int g = base > 0 ? std::min(d / base, groups - 1) : groups - 1;
    out[d] = g;
  }
  return out;
}

std::vector<std::string> assign_config_labels(
    int devices, const std::vector<std::pair<std::string, double>>& mixture) {
  if (mixture.empty()) throw std::invalid_argument("mixture must be non-empty");
  double total = 0.0;
  for (const auto& [label, frac] : mixture) {
    if (frac <= 0.0) throw std::invalid_argument("mixture fraction must be positive: " + label);
    total += frac;
  }
  if (std::fabs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("mixture fractions must sum to 1");
  }
  std::vector<std::string> labels(devices);
  int next = 0;
  for (std::size_t g = 0; g < mixture.size(); ++g) {
    int count = static_cast<int>(std::floor(mixture[g].second * devices));
    if (g + 1 == mixture.size()) count = devices - next;  // remainder to last
    for (int i = 0; i < count && next < devices; ++i) labels[next++] = mixture[g].first;
  }
  while (next < devices) labels[next++] = mixture.back().first;
  return labels;
}

namespace {

// Deal a shuffled pool round-robin so sizes balance to +-1.
void deal(const std::vector<int>& pool, std::vector<std::vector<int>>& shards,
          const std::vector<int>& device_ids) {
  for (std::size_t i = 0; i < pool.size(); ++i) {
    shards[device_ids[i % device_ids.size()]].push_back(pool[i]);
  }
}

std::vector<std::vector<int>> partition_iid(const std::vector<int>& labels,
                                            const PartitionSpec& spec) {
  std::vector<int> pool(labels.size());
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(Rng::mix(spec.seed, 0x9A47ull));
  rng.shuffle(pool);
  std::vector<std::vector<int>> shards(spec.devices);
  std::vector<int> ids(spec.devices);
  std::iota(ids.begin(), ids.end(), 0);
  deal(pool, shards, ids);
  return shards;
}

std::vector<std::vector<int>> partition_dirichlet(const std::vector<int>& labels,
                                                  int classes,
                                                  const PartitionSpec& spec) {
  const int D = spec.devices;
  const int n = static_cast<int>(labels.size());
  std::vector<std::vector<int>> by_class(classes);
  for (int i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  Rng rng(Rng::mix(spec.seed, 0xD171ull));
  std::vector<std::vector<int>> shards(D);
  for (int c = 0; c < classes; ++c) {
    auto& pool = by_class[c];
    rng.shuffle(pool);
    std::vector<double> w(D);
    double total = 0.0;
    for (int d = 0; d < D; ++d) {
      w[d] = rng.gamma(spec.alpha);
      total += w[d];
    }
    // Largest-remainder apportionment of this class across devices.
    std::vector<int> take(D, 0);
    std::vector<std::pair<double, int>> frac(D);
    int assigned = 0;
    const int m = static_cast<int>(pool.size());
    for (int d = 0; d < D; ++d) {
      const double share = total > 0.0 ? w[d] / total * m : static_cast<double>(m) / D;
      take[d] = static_cast<int>(std::floor(share));
      frac[d] = {share - take[d], d};
      assigned += take[d];
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int i = 0; assigned < m; ++i, ++assigned) ++take[frac[i % D].second];
    int next = 0;
    for (int d = 0; d < D; ++d) {
      for (int i = 0; i < take[d]; ++i) shards[d].push_back(pool[next++]);
    }
  }
  // Greedy rebalance to equal sizes (+-1): move samples from the fullest
  // shard's most-abundant class to the emptiest shard.
  const int lo = n / D;
  const int hi = lo + (n % D ? 1 : 0);
  auto size_of = [&](int d) { return static_cast<int>(shards[d].size()); };
  for (;;) {
    int big = 0, small = 0;
    for (int d = 1; d < D; ++d) {
      if (size_of(d) > size_of(big)) big = d;
      if (size_of(d) < size_of(small)) small = d;
    }
    if (size_of(big) <= hi && size_of(small) >= lo) break;
    shards[small].push_back(shards[big].back());
    shards[big].pop_back();
  }
  return shards;
}

std::vector<std::vector<int>> partition_rc(const std::vector<int>& labels,
                                           int classes,
                                           const PartitionSpec& spec) {
  const auto blocks = rc_class_blocks(classes, spec.groups);
  const auto groups = device_data_groups(spec.devices, spec.groups);
  std::vector<int> class_group(classes, 0);
  for (int g = 0; g < spec.groups; ++g) {
    for (int c : blocks[g]) class_group[c] = g;
  }
  std::vector<std::vector<int>> group_pool(spec.groups);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    group_pool[class_group[labels[i]]].push_back(static_cast<int>(i));
  }
  std::vector<std::vector<int>> group_devices(spec.groups);
  for (int d = 0; d < spec.devices; ++d) group_devices[groups[d]].push_back(d);
  Rng rng(Rng::mix(spec.seed, 0x4C09ull));
  std::vector<std::vector<int>> shards(spec.devices);
  for (int g = 0; g < spec.groups; ++g) {
    if (group_devices[g].empty()) {
      throw std::invalid_argument("resource-correlated mode needs devices in every group");
    }
    rng.shuffle(group_pool[g]);
    deal(group_pool[g], shards, group_devices[g]);
  }
  return shards;
}

}  // namespace

std::vector<std::vector<int>> partition(const std::vector<int>& labels,
                                        int classes,
                                        const PartitionSpec& spec) {
  if (spec.devices <= 0) throw std::invalid_argument("devices must be positive");
  if (labels.size() < static_cast<std::size_t>(spec.devices)) {
    throw std::invalid_argument("fewer samples than devices");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw std::invalid_argument("label out of range");
  }
  switch (spec.kind) {
    case PartitionKind::Iid: return partition_iid(labels, spec);
    case PartitionKind::Dirichlet:
      if (spec.alpha <= 0.0) throw std::invalid_argument("alpha must be positive");
      return partition_dirichlet(labels, classes, spec);
    default: return partition_rc(labels, classes, spec);
  }
}

}  // namespace approxfl
