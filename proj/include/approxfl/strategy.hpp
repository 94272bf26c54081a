#pragma once

#include <string>
#include <vector>

#include "approxfl/model.hpp"
#include "approxfl/tensor.hpp"

namespace approxfl {

enum class StrategyKind {
  Ours,         // capacity-matched submodels, approximate local arithmetic
  HeteroFL,     // static prefix windows
  FedRolex,     // rolling windows advanced each round
  SmallModel,   // every device trains the smallest architecture
  DropDevices,  // only full-capacity devices participate
  FedProx,      // full model, proximal term, reduced participation per round
};

StrategyKind strategy_from_name(const std::string& name);
const char* strategy_name(StrategyKind k);

// Output-channel indices a sub-width layer keeps, as full-model indices.
// Rolling strategies start at round % full and wrap; all others keep the
// prefix. Depends only on (full, sub, kind, round).
std::vector<int> channel_window(StrategyKind kind, int full, int sub, int round);

struct ParamSlice {
  std::vector<int> rows;  // kept indices along dim 0 (out channels)
  std::vector<int> cols;  // kept indices along dim 1; empty for 1-D params
};

// Per-parameter index maps from a scaled program into the full program.
struct SubsetMask {
  std::vector<ParamSlice> params;                // aligned with full program params
  std::vector<std::vector<int>> slot_channels;   // kept channels per slot
};

// Walks the two programs op by op (they must share structure) and derives
// consistent channel windows: conv inputs follow the producing slot, the
// classifier head keeps all outputs, residual adds require equal windows.
SubsetMask build_subset_mask(const Program& full_prog, const Program& sub_prog,
                             StrategyKind kind, int round);

// Copies the masked slice of every full-model parameter into freshly shaped
// sub-model tensors.
std::vector<Tensor> extract_submodel(const Program& full_prog,
                                     const Program& sub_prog,
                                     const SubsetMask& mask,
                                     const std::vector<Tensor>& full_params);

// Weighted per-element aggregation of client updates mapped back through
// their masks. Elements no client touched keep the server value bit-for-bit.
class MergeAccumulator {
 public:
  explicit MergeAccumulator(const Program& full_prog);

  void add(const Program& sub_prog, const SubsetMask& mask,
           const std::vector<Tensor>& sub_params, double sample_weight);
  void finish(std::vector<Tensor>& global_params) const;

 private:
  std::vector<std::vector<int>> shapes_;
  std::vector<std::vector<double>> sum_;
  std::vector<std::vector<double>> weight_;
};

}  // namespace approxfl
