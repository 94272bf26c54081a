#pragma once

#include <bit>
#include <cstdint>
#include <string>

namespace approxfl {

// Storage formats share the fp32 layout: 1 sign bit, 8 exponent bits, and the
// top `mantissa_bits` of the mantissa field. Rounding is truncation.
struct FloatFormat {
  int mantissa_bits = 23;

  static constexpr FloatFormat fp32() { return {23}; }
  static constexpr FloatFormat bfloat16() { return {7}; }
  static constexpr FloatFormat bfloat12() { return {3}; }
  static constexpr FloatFormat bfloat10() { return {1}; }

  constexpr int total_bits() const { return 1 + 8 + mantissa_bits; }
  constexpr bool is_fp32() const { return mantissa_bits == 23; }
  constexpr std::uint32_t keep_mask() const {
    return ~((1u << (23 - mantissa_bits)) - 1u);
  }
  friend constexpr bool operator==(FloatFormat a, FloatFormat b) {
    return a.mantissa_bits == b.mantissa_bits;
  }
};

FloatFormat format_from_name(const std::string& name);
const char* format_name(FloatFormat f);

enum class MultiplierKind { Exact, Mbm, Mitchell };

MultiplierKind multiplier_kind_from_name(const std::string& name);
const char* multiplier_kind_name(MultiplierKind k);

// Per-width correction constants, frozen from calibrate_mbm_correction: the
// value on a 2^-12 grid in [0, 0.25] minimizing |mean signed relative error|
// over the exhaustive operand sweep at that width.
constexpr double kMbmCorrection7 = 326.0 / 4096.0;  // 0.079589843750
constexpr double kMbmCorrection3 = 294.0 / 4096.0;  // 0.071777343750
constexpr double kMbmCorrection1 = 164.0 / 4096.0;  // 0.040039062500

constexpr double default_mbm_correction(int mantissa_bits) {
  if (mantissa_bits >= 5) return kMbmCorrection7;
  if (mantissa_bits >= 2) return kMbmCorrection3;
  return kMbmCorrection1;
}

struct MultiplierSpec {
  MultiplierKind kind = MultiplierKind::Exact;
  int mantissa_bits = 23;
  double correction = 0.0;

  static MultiplierSpec exact(int m = 23) {
    return {MultiplierKind::Exact, m, 0.0};
  }
  static MultiplierSpec mbm(int m) {
    return {MultiplierKind::Mbm, m, default_mbm_correction(m)};
  }
  static MultiplierSpec mbm(int m, double c) {
    return {MultiplierKind::Mbm, m, c};
  }
  static MultiplierSpec mitchell(int m) {
    return {MultiplierKind::Mitchell, m, 0.0};
  }
  // Correction in 0.23 fixed point, the width the datapath carries.
  std::uint32_t correction_fixed() const {
    double c = (kind == MultiplierKind::Mbm) ? correction : 0.0;
    if (c < 0.0) c = 0.0;
    if (c > 0.5) c = 0.5;
    return static_cast<std::uint32_t>(c * 8388608.0 + 0.5);
  }
};

namespace detail {

constexpr std::uint32_t kSignMask = 0x80000000u;
constexpr std::uint32_t kExpMask = 0x7F800000u;
constexpr std::uint32_t kMantMask = 0x007FFFFFu;
constexpr std::uint32_t kHidden = 0x00800000u;

// Logarithmic mantissa datapath shared by Mitchell (c = 0) and MBM.
// Fraction register is 0.23 fixed point; when the corrected fraction
// overflows after a carry the correction is skipped, matching the
// reference hardware rather than a renormalizing evaluation of the
// piecewise formula.
inline std::uint32_t log_mul_bits(std::uint32_t ua, std::uint32_t ub,
                                  std::uint32_t c_fix) {
  const std::uint32_t sign = (ua ^ ub) & kSignMask;
  const std::uint32_t ea = (ua >> 23) & 0xFFu;
  const std::uint32_t eb = (ub >> 23) & 0xFFu;
  const std::uint32_t sum = (ua & kMantMask) + (ub & kMantMask);
  const std::uint32_t carry = sum >> 23;
  std::uint32_t frac = (sum & kMantMask) + (c_fix >> carry);
  if (carry && frac >= kHidden) frac = sum;
  std::uint32_t whbit = (kHidden + frac) << carry;
  std::int32_t exp_adj = 0;
  if (whbit >= (kHidden << 1)) {
    whbit >>= 1;
    exp_adj = 1;
  }
  const std::int32_t e =
      static_cast<std::int32_t>(ea) + static_cast<std::int32_t>(eb) - 127 + exp_adj;
  if (e <= 0) return sign;  // underflow flushes to zero
  if (e >= 255) {           // overflow saturates to max finite magnitude
    return sign | 0x7F7FFFFFu;
  }
  return sign | (static_cast<std::uint32_t>(e) << 23) | (whbit & kMantMask);
}

}  // namespace detail

// Truncating cast into the storage format. Subnormals flush to signed zero,
// NaN and infinity pass through.
inline float round_to_format(float x, FloatFormat f) {
  if (f.is_fp32()) return x;
  std::uint32_t u = std::bit_cast<std::uint32_t>(x);
  const std::uint32_t exp = u & detail::kExpMask;
  if (exp == detail::kExpMask) return x;
  if (exp == 0) return std::bit_cast<float>(u & detail::kSignMask);
  return std::bit_cast<float>(u & (detail::kSignMask | detail::kExpMask |
                                   f.keep_mask()));
}

// Product of two storage-format values. The result keeps the multiplier's
// full output precision; storage rounding happens on buffer write-back,
// after exact 32-bit accumulation.
inline float approx_multiply(float a, float b, const MultiplierSpec& spec) {
  if (spec.kind == MultiplierKind::Exact) {
    const float p = a * b;
    const std::uint32_t up = std::bit_cast<std::uint32_t>(p);
    const std::uint32_t exp = up & detail::kExpMask;
    if (exp == detail::kExpMask) {
      const std::uint32_t ua = std::bit_cast<std::uint32_t>(a);
      const std::uint32_t ub = std::bit_cast<std::uint32_t>(b);
      if (((ua & detail::kExpMask) != detail::kExpMask) &&
          ((ub & detail::kExpMask) != detail::kExpMask)) {
        return std::bit_cast<float>((up & detail::kSignMask) | 0x7F7FFFFFu);
      }
      return p;  // propagate NaN / infinite operands
    }
    if (exp == 0) return std::bit_cast<float>(up & detail::kSignMask);
    return p;
  }
  const std::uint32_t ua = std::bit_cast<std::uint32_t>(a);
  const std::uint32_t ub = std::bit_cast<std::uint32_t>(b);
  if ((ua & detail::kExpMask) == detail::kExpMask ||
      (ub & detail::kExpMask) == detail::kExpMask) {
    return a * b;  // NaN / infinity handled by the host float path
  }
  if ((ua & detail::kExpMask) == 0 || (ub & detail::kExpMask) == 0) {
    return std::bit_cast<float>((ua ^ ub) & detail::kSignMask);
  }
  return std::bit_cast<float>(detail::log_mul_bits(ua, ub, spec.correction_fixed()));
}

// acc + a*b with the addition in full 32-bit precision.
inline float multiply_accumulate(float acc, float a, float b,
                                 const MultiplierSpec& spec) {
  return acc + approx_multiply(a, b, spec);
}

struct ErrorStats {
  double mean_rel = 0.0;      // signed mean (bias)
  double mean_abs_rel = 0.0;
  double max_abs_rel = 0.0;
};

// Exhaustive sweep over all operand mantissa pairs at the spec's width,
// exponents fixed; relative error against the exact product.
ErrorStats characterize_error(const MultiplierSpec& spec);

// Sweep c over [0, 0.25] in 2^-12 steps, minimizing |mean signed relative
// error| over the exhaustive operand sweep.
double calibrate_mbm_correction(int mantissa_bits);

}  // namespace approxfl
