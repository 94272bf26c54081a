#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "approxfl/rng.hpp"

namespace approxfl {

struct Dataset {
  int channels = 0, height = 0, width = 0;
  int classes = 0;
  std::vector<float> images;  // [n][c][h][w]
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  int sample_elems() const { return channels * height * width; }
  const float* sample(int i) const {
    return images.data() + static_cast<std::size_t>(i) * sample_elems();
  }
};

struct SyntheticSpec {
  int samples = 2000;
  int classes = 10;
  int channels = 3, height = 8, width = 8;
  double noise = 0.35;
  std::uint64_t seed = 7;
};

// Seeded class-template images plus Gaussian noise; labels balanced
// round-robin. Sample i is addressed by stream index, so generation is
// order-independent.
Dataset make_synthetic(const SyntheticSpec& spec);

// Binary container: magic "AXFD", u32 version, u32 count, u16 channels,
// u16 height, u16 width, u16 classes, u16 labels[count], f32 data,
// little-endian throughout.
Dataset read_dataset(const std::string& path);
void write_dataset(const Dataset& d, const std::string& path);

}  // namespace approxfl
