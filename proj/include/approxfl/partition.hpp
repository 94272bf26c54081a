#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "approxfl/rng.hpp"

namespace approxfl {

enum class PartitionKind { Iid, Dirichlet, ResourceCorrelated };

PartitionKind partition_kind_from_name(const std::string& name);
const char* partition_kind_name(PartitionKind k);

struct PartitionSpec {
  PartitionKind kind = PartitionKind::Iid;
  double alpha = 0.1;     // Dirichlet concentration
  int devices = 16;
  int groups = 3;         // resource-correlated class blocks
  std::uint64_t seed = 1;
};

// Shards index the label vector. Every sample lands on exactly one device.
// iid and dirichlet shards are equal-sized (+-1). Resource-correlated mode
// splits classes into contiguous blocks (sizes as equal as possible, first
// blocks take the remainder), one block per device group; shards are
// equal-sized (+-1) within each group.
std::vector<std::vector<int>> partition(const std::vector<int>& labels,
                                        int classes,
                                        const PartitionSpec& spec);

// Contiguous class blocks for resource-correlated mode, e.g. 10 classes over
// 3 groups -> sizes {4,3,3}.
std::vector<std::vector<int>> rc_class_blocks(int classes, int groups);

// Contiguous device thirds; the trailing group absorbs the remainder.
std::vector<int> device_data_groups(int devices, int groups = 3);

// Device -> config label from an ordered mixture of (label, fraction):
// counts are floor(fraction * devices) in order, remainder to the last entry.
std::vector<std::string> assign_config_labels(
    int devices, const std::vector<std::pair<std::string, double>>& mixture);

}  // namespace approxfl
