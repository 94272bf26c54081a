#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "approxfl/bitfloat.hpp"

namespace approxfl {

struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0f);
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
  }

  std::size_t numel() const { return data.size(); }
  bool empty() const { return data.empty(); }
  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }
  float& operator[](std::size_t i) { return data[i]; }
  float operator[](std::size_t i) const { return data[i]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0f); }
};

inline void round_tensor(Tensor& t, FloatFormat f) {
  if (f.is_fp32()) return;
  for (float& v : t.data) v = round_to_format(v, f);
}

inline void round_span(float* p, std::size_t n, FloatFormat f) {
  if (f.is_fp32()) return;
  for (std::size_t i = 0; i < n; ++i) p[i] = round_to_format(p[i], f);
}

}  // namespace approxfl
