#pragma once

#include <cstdint>

#include "dspkat/fixed_point.hpp"

namespace dspkat::dsp {

inline constexpr int kCordicIterations = 16;

/// CORDIC gain after kCordicIterations micro-rotations.
double cordic_gain();
/// 1/gain as stored in the compensation ROM (Q0.23 raw).
std::int32_t cordic_gain_compensation_raw();

struct Polar {
  Fixed magnitude;  // Q0.23, saturating
  Fixed phase;      // Q2.21 radians in (-pi, pi]
};

/// Vectoring-mode CORDIC on a Q0.23 vector. (0, 0) maps to (0, 0).
Polar cordic_vectoring(Fixed x, Fixed y, bool gain_compensation = true);

/// Magnitude-only path used by the CFAR block (Q0.23 raw in and out).
std::int32_t cordic_magnitude_raw(std::int32_t x, std::int32_t y, bool gain_compensation = true);

/// Phase of an arbitrary-scale integer vector, Q2.21 raw. The input is
/// normalized before the micro-rotations, so only the ratio y/x matters.
std::int32_t cordic_phase_raw(std::int64_t x, std::int64_t y);

/// Q2.21 representation of pi.
std::int32_t pi_q2_21();

}  // namespace dspkat::dsp
