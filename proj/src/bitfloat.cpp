#include "approxfl/bitfloat.hpp"

#include <cmath>
#include <stdexcept>

namespace approxfl {

FloatFormat format_from_name(const std::string& name) {
  if (name == "fp32" || name == "float32") return FloatFormat::fp32();
  if (name == "bf16" || name == "bfloat16") return FloatFormat::bfloat16();
  if (name == "bf12" || name == "bfloat12") return FloatFormat::bfloat12();
  if (name == "bf10" || name == "bfloat10") return FloatFormat::bfloat10();
  throw std::invalid_argument("unknown float format: " + name);
}

const char* format_name(FloatFormat f) {
  switch (f.mantissa_bits) {
    case 23: return "fp32";
    case 7: return "bfloat16";
    case 3: return "bfloat12";
    case 1: return "bfloat10";
    default: return "custom";
  }
}

MultiplierKind multiplier_kind_from_name(const std::string& name) {
  if (name == "exact") return MultiplierKind::Exact;
  if (name == "mbm") return MultiplierKind::Mbm;
  if (name == "mitchell") return MultiplierKind::Mitchell;
  throw std::invalid_argument("unknown multiplier kind: " + name);
}

const char* multiplier_kind_name(MultiplierKind k) {
  switch (k) {
    case MultiplierKind::Exact: return "exact";
    case MultiplierKind::Mbm: return "mbm";
    default: return "mitchell";
  }
}

ErrorStats characterize_error(const MultiplierSpec& spec) {
  const int m = spec.mantissa_bits;
  if (m < 1 || m > 12) {
    throw std::invalid_argument("characterize_error: mantissa width out of range");
  }
  const int n = 1 << m;
  const int shift = 23 - m;
  ErrorStats st;
  double sum = 0.0, sum_abs = 0.0;
  for (int i = 0; i < n; ++i) {
    const float a = std::bit_cast<float>(0x3F800000u | (static_cast<std::uint32_t>(i) << shift));
    for (int j = 0; j < n; ++j) {
      const float b = std::bit_cast<float>(0x3F800000u | (static_cast<std::uint32_t>(j) << shift));
      const double truth = static_cast<double>(a) * static_cast<double>(b);
      const double got = approx_multiply(a, b, spec);
      const double rel = (got - truth) / truth;
      sum += rel;
      sum_abs += std::fabs(rel);
      if (std::fabs(rel) > st.max_abs_rel) st.max_abs_rel = std::fabs(rel);
    }
  }
  const double count = static_cast<double>(n) * n;
  st.mean_rel = sum / count;
  st.mean_abs_rel = sum_abs / count;
  return st;
}

double calibrate_mbm_correction(int mantissa_bits) {
  double best_c = 0.0;
  double best_bias = -1.0;
  for (int k = 0; k <= 1024; ++k) {
    const double c = k / 4096.0;
    const ErrorStats st =
        characterize_error(MultiplierSpec::mbm(mantissa_bits, c));
    const double bias = std::fabs(st.mean_rel);
    if (best_bias < 0.0 || bias < best_bias) {
      best_bias = bias;
      best_c = c;
    }
  }
  return best_c;
}

}  // namespace approxfl
