#include <doctest.h>

#include <cmath>
#include <limits>

#include "dspkat/fixed_point.hpp"
#include "dspkat/rng.hpp"

using namespace dspkat;

namespace {

// Exact round-half-even of p / 2^s using floor division, no shifts.
__int128 rne_div_pow2(__int128 p, int s) {
  const __int128 d = static_cast<__int128>(1) << s;
  __int128 q = p / d;
  __int128 r = p % d;
  if (r < 0) {
    r += d;
    q -= 1;
  }
  if (2 * r > d || (2 * r == d && (q % 2 != 0))) q += 1;
  return q;
}

std::int64_t clamp_to(__int128 v, QFormat f) {
  if (v > f.max_raw()) return f.max_raw();
  if (v < f.min_raw()) return f.min_raw();
  return static_cast<std::int64_t>(v);
}

}  // namespace

TEST_CASE("format widths") {
  CHECK(kQ12_4.width() == 16);
  CHECK(kQ0_23.width() == 24);
  CHECK(kQ2_21.width() == 24);
  CHECK(kQ8_8.width() == 16);
}

TEST_CASE("quantize") {
  CHECK(quantize(1.0, kQ12_4).word() == 0x0010);
  CHECK(quantize(-453.0, kQ12_4).word() == 0xE3B0);
  CHECK(quantize(4096.0, kQ12_4).word() == 0x7FFF);
  CHECK(quantize(-5000.0, kQ12_4).word() == 0x8000);
  // ties go to even
  CHECK(quantize(0.5 / 16, kQ12_4).raw == 0);
  CHECK(quantize(1.5 / 16, kQ12_4).raw == 2);
  CHECK(quantize(-2.5 / 16, kQ12_4).raw == -2);
  CHECK_THROWS_AS(quantize(std::numeric_limits<double>::quiet_NaN(), kQ0_23), ContractError);
}

TEST_CASE("to_real") {
  CHECK(to_real(from_word(0x0010, kQ12_4)) == 1.0);
  CHECK(to_real(from_word(0xE3B0, kQ12_4)) == -453.0);
  CHECK(to_real(from_word(0xFF8174, kQ0_23)) == doctest::Approx(-3.8623e-3).epsilon(1e-4));
  CHECK(from_word(0xFF8174, kQ0_23).raw == -32396);
}

TEST_CASE("quantization bound and round trip") {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    const double x = rng.uniform(-2047.0, 2047.0);
    CHECK(std::fabs(to_real(quantize(x, kQ12_4)) - x) <= std::ldexp(1.0, -5));
    const double y = rng.uniform(-0.999, 0.999);
    CHECK(std::fabs(to_real(quantize(y, kQ0_23)) - y) <= std::ldexp(1.0, -24));
    const Fixed f = from_raw(rng.range(-(1 << 23), (1 << 23) - 1), kQ0_23);
    CHECK(quantize(to_real(f), kQ0_23) == f);
  }
}

TEST_CASE("sat_add and sat_sub") {
  const auto q = [](std::uint32_t w) { return from_word(w, kQ12_4); };
  CHECK(sat_add(q(0x7FFF), q(0x0001)).word() == 0x7FFF);
  CHECK(sat_add(q(0x0010), q(0xFFF0)).word() == 0x0000);
  CHECK(sat_sub(q(0x8000), q(0x0001)).word() == 0x8000);
  CHECK(sat_neg(q(0x8000)).word() == 0x7FFF);
  CHECK_THROWS_AS(sat_add(q(1), from_raw(1, kQ0_23)), ContractError);

  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const Fixed a = from_raw(rng.range(-32768, 32767), kQ12_4);
    const Fixed b = from_raw(rng.range(-32768, 32767), kQ12_4);
    const Fixed s = sat_add(a, b);
    CHECK(s == sat_add(b, a));
    CHECK(s.raw == clamp_to(std::int64_t{a.raw} + b.raw, kQ12_4));
  }
}

TEST_CASE("sat_mul examples") {
  const Fixed half = quantize(0.5, kQ0_23);
  CHECK(sat_mul(half, half, kQ0_23).word() == 0x200000);
  const Fixed m1 = from_word(0x800000, kQ0_23);
  CHECK(sat_mul(m1, m1, kQ0_23).word() == 0x7FFFFF);
  CHECK(sat_mul(from_word(0x400000, kQ0_23), from_word(0x000003, kQ0_23), kQ0_23).word() == 0x000002);
}

TEST_CASE("sat_mul against a 128-bit oracle") {
  Rng rng(2024);
  const QFormat fmts[] = {kQ12_4, kQ0_23, kQ2_21, kQ8_8};
  for (int i = 0; i < 100000; ++i) {
    const QFormat fa = fmts[rng.below(4)];
    const QFormat fb = fmts[rng.below(4)];
    const QFormat fo = fmts[rng.below(4)];
    const Fixed a = from_raw(rng.range(fa.min_raw(), fa.max_raw()), fa);
    const Fixed b = from_raw(rng.range(fb.min_raw(), fb.max_raw()), fb);
    const __int128 p = static_cast<__int128>(a.raw) * b.raw;
    const int s = fa.frac_bits + fb.frac_bits - fo.frac_bits;
    const __int128 scaled = s >= 0 ? rne_div_pow2(p, s) : p * (static_cast<__int128>(1) << -s);
    const Fixed got = sat_mul(a, b, fo);
    REQUIRE(got.raw == clamp_to(scaled, fo));
  }
}

TEST_CASE("shift_round_even and sign_extend") {
  CHECK(shift_round_even(3, 1) == 2);
  CHECK(shift_round_even(5, 1) == 2);
  CHECK(shift_round_even(-3, 1) == -2);
  CHECK(shift_round_even(-5, 1) == -2);
  CHECK(shift_round_even(7, -2) == 28);
  CHECK(sign_extend(0xFFFF, 16) == -1);
  CHECK(sign_extend(0x7FFFFF, 24) == 0x7FFFFF);
  CHECK(sign_extend(0x800000, 24) == -(1 << 23));
}
