#include "dspkat/cordic.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace dspkat::dsp {

namespace {

// Internal angle accumulator resolution: 2^-30 rad.
constexpr int kAngleFrac = 30;
// Normalized operand magnitude lies in [2^29, 2^30).
constexpr int kNormTop = 30;

const std::array<std::int64_t, kCordicIterations>& atan_table() {
  static const auto table = [] {
    std::array<std::int64_t, kCordicIterations> t{};
    for (int i = 0; i < kCordicIterations; ++i)
      t[i] = std::llround(std::ldexp(std::atan(std::ldexp(1.0, -i)), kAngleFrac));
    return t;
  }();
  return table;
}

std::int64_t pi_internal() {
  static const std::int64_t v = std::llround(std::ldexp(std::numbers::pi, kAngleFrac));
  return v;
}

std::int64_t div_round(std::int64_t num, std::int64_t den) {
  // den > 0
  const std::int64_t q = num / den;
  const std::int64_t r = num % den;
  if (2 * std::llabs(r) >= den) return q + (num < 0 ? -1 : 1);
  return q;
}

struct CoreResult {
  std::int64_t x = 0;      // ~ gain * |v| * 2^shift
  int shift = 0;           // operand was scaled by 2^shift
  std::int64_t angle = 0;  // 2^-30 rad, (-pi, pi]
};

CoreResult cordic_core(std::int64_t x, std::int64_t y) {
  CoreResult out;
  if (x == 0 && y == 0) return out;

  std::int64_t offset = 0;
  if (x < 0) {
    offset = y >= 0 ? pi_internal() : -pi_internal();
    x = -x;
    y = -y;
  }

  std::int64_t m = std::max(std::llabs(x), std::llabs(y));
  int shift = 0;
  while (m >= (std::int64_t{1} << kNormTop)) {
    m >>= 1;
    --shift;
  }
  while (m < (std::int64_t{1} << (kNormTop - 1))) {
    m <<= 1;
    ++shift;
  }
  x = shift_round_even(x, -shift);
  y = shift_round_even(y, -shift);

  const auto& atans = atan_table();
  std::int64_t z = 0;
  for (int i = 0; i < kCordicIterations; ++i) {
    const std::int64_t xs = x >> i;
    const std::int64_t ys = y >> i;
    if (y >= 0) {
      x += ys;
      y -= xs;
      z += atans[i];
    } else {
      x -= ys;
      y += xs;
      z -= atans[i];
    }
  }
  // Residual angle after the last micro-rotation: atan(y/x) ~= y/x.
  z += div_round(y * (std::int64_t{1} << kAngleFrac), x);

  std::int64_t angle = z + offset;
  const std::int64_t pi = pi_internal();
  if (angle > pi) angle -= 2 * pi;
  if (angle <= -pi) angle += 2 * pi;

  out.x = x;
  out.shift = shift;
  out.angle = angle;
  return out;
}

std::int32_t angle_to_q2_21(std::int64_t angle) {
  std::int64_t raw = shift_round_even(angle, kAngleFrac - kQ2_21.frac_bits);
  const std::int64_t pi = pi_q2_21();
  if (raw > pi) raw -= 2 * pi;
  if (raw <= -pi) raw += 2 * pi;
  return saturate(raw, kQ2_21);
}

std::int32_t magnitude_from_core(const CoreResult& c, bool gain_compensation) {
  if (c.x == 0) return 0;
  if (!gain_compensation) return saturate(shift_round_even(c.x, c.shift), kQ0_23);
  const std::int64_t scaled = c.x * cordic_gain_compensation_raw();
  return saturate(shift_round_even(scaled, kQ0_23.frac_bits + c.shift), kQ0_23);
}

}  // namespace

double cordic_gain() {
  double k = 1.0;
  for (int i = 0; i < kCordicIterations; ++i) k *= std::sqrt(1.0 + std::ldexp(1.0, -2 * i));
  return k;
}

std::int32_t cordic_gain_compensation_raw() {
  static const std::int32_t v = quantize(1.0 / cordic_gain(), kQ0_23).raw;
  return v;
}

std::int32_t pi_q2_21() {
  static const std::int32_t v = quantize(std::numbers::pi, kQ2_21).raw;
  return v;
}

Polar cordic_vectoring(Fixed x, Fixed y, bool gain_compensation) {
  if (x.fmt != kQ0_23 || y.fmt != kQ0_23) throw ContractError("cordic_vectoring expects Q0.23 operands");
  const CoreResult c = cordic_core(x.raw, y.raw);
  return {{magnitude_from_core(c, gain_compensation), kQ0_23}, {angle_to_q2_21(c.angle), kQ2_21}};
}

std::int32_t cordic_magnitude_raw(std::int32_t x, std::int32_t y, bool gain_compensation) {
  return magnitude_from_core(cordic_core(x, y), gain_compensation);
}

std::int32_t cordic_phase_raw(std::int64_t x, std::int64_t y) {
  if (x == 0 && y == 0) return 0;
  return angle_to_q2_21(cordic_core(x, y).angle);
}

}  // namespace dspkat::dsp
