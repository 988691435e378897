#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <tuple>

#include "dspkat/cordic.hpp"
#include "dspkat/dsp_chain.hpp"
#include "dspkat/rng.hpp"

using namespace dspkat;
using namespace dspkat::dsp;

namespace {

constexpr double kLsb = 0x1.0p-23;

std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / static_cast<double>(n);
      acc += x[i] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc / static_cast<double>(n);
  }
  return out;
}

double err(ComplexRaw got, std::complex<double> want) {
  return std::max(std::fabs(got.re * kLsb - want.real()), std::fabs(got.im * kLsb - want.imag()));
}

ChainConfig small_config(std::uint32_t n, std::uint32_t m, std::uint32_t r) {
  ChainConfig c;
  c.samples = n;
  c.bursts = m;
  c.channels = r;
  c.window = Window::kNone;
  return c;
}

// Plain per-cell CFAR rule with no shared machinery.
std::set<std::pair<std::uint32_t, std::uint32_t>> cfar_oracle(const MagnitudeMap& mag, const ChainConfig& cfg) {
  std::vector<std::tuple<std::int32_t, std::uint32_t, std::uint32_t>> hits;
  const int ranges = static_cast<int>(mag.rows());
  const int g = static_cast<int>(cfg.cfar_guard), w = static_cast<int>(cfg.cfar_window);
  for (std::size_t d = 1; d < mag.cols(); ++d) {
    for (int k = 0; k < ranges; ++k) {
      long long sum = 0, count = 0;
      for (int j = 0; j < ranges; ++j) {
        const int dist = std::abs(j - k);
        if (dist > g && dist <= g + w) {
          sum += mag.at(0, j, d);
          ++count;
        }
      }
      if (count == 0) continue;
      long long mean = sum / count;
      const long long rem = sum % count;
      if (2 * rem > count || (2 * rem == count && mean % 2 == 1)) ++mean;
      long long prod = mean * cfg.cfar_alpha_raw;
      long long thr = prod / 256;
      const long long r = prod % 256;
      if (2 * r > 256 || (2 * r == 256 && thr % 2 == 1)) ++thr;
      thr = std::min<long long>(thr, (1 << 23) - 1);
      if (mag.at(0, k, d) > thr) hits.emplace_back(-mag.at(0, k, d), k, static_cast<std::uint32_t>(d));
    }
  }
  std::sort(hits.begin(), hits.end());
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::size_t i = 0; i < hits.size() && i < cfg.max_targets; ++i)
    out.insert({std::get<1>(hits[i]), std::get<2>(hits[i])});
  return out;
}

}  // namespace

TEST_CASE("mti") {
  ChainConfig cfg = small_config(16, 5, 2);
  BurstSet in(2, 5, 16, 123);
  CHECK(mti(in, cfg) == BurstSet(2, 4, 16, 0));

  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t m = 0; m < 5; ++m)
      for (std::size_t n = 0; n < 16; ++n) in.at(r, m, n) = static_cast<std::int32_t>(m);
  CHECK(mti(in, cfg) == BurstSet(2, 4, 16, 1));

  cfg.bursts = 3;
  BurstSet three(1, 3, 16);
  cfg.channels = 1;
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t n = 0; n < 16; ++n) three.at(0, m, n) = static_cast<std::int32_t>(10 * m + n);
  cfg.mti_enabled = false;
  const BurstSet pass = mti(three, cfg);
  REQUIRE(pass.rows() == 2);
  for (std::size_t n = 0; n < 16; ++n) {
    CHECK(pass.at(0, 0, n) == three.at(0, 1, n));
    CHECK(pass.at(0, 1, n) == three.at(0, 2, n));
  }

  cfg.mti_enabled = true;
  three.at(0, 1, 0) = 32767;
  three.at(0, 2, 0) = -32768;
  CHECK(mti(three, cfg).at(0, 1, 0) == -32768);
  CHECK_THROWS_AS(mti(BurstSet(1, 2, 16), cfg), DimensionError);
}

TEST_CASE("rfft basic cases") {
  const ChainConfig cfg = small_config(64, 17, 1);
  std::vector<std::int32_t> x(64, 0);
  for (const auto& b : rfft(x, cfg)) CHECK(b == ComplexRaw{});

  std::fill(x.begin(), x.end(), 160);  // 10.0 in Q12.4
  auto dc = rfft(x, cfg);
  CHECK(dc.size() == 32);
  CHECK(std::abs(dc[0].re - std::lround(10.0 / 2048 / kLsb)) <= 1);
  for (std::size_t k = 1; k < 32; ++k) CHECK(err(dc[k], 0.0) <= 2 * kLsb);

  const double amp = 800.0;
  for (int n = 0; n < 64; ++n) x[n] = static_cast<std::int32_t>(std::lround(amp * 16 * std::cos(2 * std::numbers::pi * 5 * n / 64)));
  const auto tone = rfft(x, cfg);
  const double mag5 = std::hypot(tone[5].re, tone[5].im) * kLsb;
  CHECK(mag5 == doctest::Approx(amp / 2048 / 2).epsilon(1e-4));
  for (std::size_t k = 0; k < 32; ++k)
    if (k != 5) CHECK(std::hypot(tone[k].re, tone[k].im) * kLsb < 1e-4);
}

TEST_CASE("cfft basic cases") {
  std::vector<ComplexRaw> z(16);
  for (const auto& b : cfft(z)) CHECK(b == ComplexRaw{});
  std::vector<ComplexRaw> c(16, ComplexRaw{1000000, -500000});
  const auto cb = cfft(c);
  CHECK(cb[0] == ComplexRaw{1000000, -500000});
  for (std::size_t k = 1; k < 16; ++k) CHECK(err(cb[k], 0.0) <= kLsb);

  std::vector<ComplexRaw> e(16);
  for (int m = 0; m < 16; ++m) {
    const double a = 2 * std::numbers::pi * 3 * m / 16;
    e[m] = {static_cast<std::int32_t>(std::lround(0.5 * std::cos(a) / kLsb)),
            static_cast<std::int32_t>(std::lround(0.5 * std::sin(a) / kLsb))};
  }
  const auto eb = cfft(e);
  for (std::size_t k = 0; k < 16; ++k) {
    const double mag = std::hypot(eb[k].re, eb[k].im) * kLsb;
    if (k == 3) CHECK(mag == doctest::Approx(0.5).epsilon(1e-5));
    else CHECK(mag < 4 * kLsb);
  }
}

TEST_CASE("fft error bound against a direct DFT") {
  Rng rng(5);
  for (std::uint32_t len : {8u, 16u, 64u, 256u}) {
    const double bound = kLsb * (4 * std::log2(len) + 2);
    double worst = 0;
    for (int trial = 0; trial < 60; ++trial) {
      std::vector<ComplexRaw> v(len);
      std::vector<std::complex<double>> ref(len);
      for (std::uint32_t i = 0; i < len; ++i) {
        v[i] = {static_cast<std::int32_t>(rng.range(-(1 << 22), (1 << 22))),
                static_cast<std::int32_t>(rng.range(-(1 << 22), (1 << 22)))};
        ref[i] = {v[i].re * kLsb, v[i].im * kLsb};
      }
      const auto got = cfft(v);
      const auto want = naive_dft(ref);
      for (std::uint32_t k = 0; k < len; ++k) worst = std::max(worst, err(got[k], want[k]));
    }
    CHECK(worst <= bound);
  }
}

TEST_CASE("hann window ROM") {
  const auto w = hann_coefficients(64);
  CHECK(w[0] == 0);
  CHECK(w[32] == (1 << 30));
  CHECK(w[16] == (1 << 29));
  for (std::uint32_t i = 1; i < 64; ++i) CHECK(w[i] == w[64 - i]);
}

TEST_CASE("cordic vectoring") {
  const auto q = [](double v) { return quantize(v, kQ0_23); };
  const double lsb = std::ldexp(1.0, -21);
  auto p = cordic_vectoring(from_raw((1 << 23) - 1, kQ0_23), q(0));
  CHECK(std::abs(p.magnitude.raw - ((1 << 23) - 1)) <= 2);
  CHECK(p.phase.raw == 0);

  p = cordic_vectoring(q(0.6), q(0.8));
  CHECK(p.magnitude.raw == (1 << 23) - 1);
  CHECK(std::fabs(to_real(p.phase) - std::atan2(0.8, 0.6)) < 4 * lsb);

  p = cordic_vectoring(q(-0.5), q(0));
  CHECK(std::abs(p.magnitude.raw - (1 << 22)) <= 2);
  CHECK(p.phase.raw == pi_q2_21());
  CHECK(to_real(p.phase) == doctest::Approx(std::numbers::pi).epsilon(1e-6));

  p = cordic_vectoring(q(0), q(0));
  CHECK(p.magnitude.raw == 0);
  CHECK(p.phase.raw == 0);

  p = cordic_vectoring(q(0), q(-0.25));
  CHECK(to_real(p.phase) == doctest::Approx(-std::numbers::pi / 2).epsilon(1e-6));

  CHECK(cordic_gain() == doctest::Approx(1.6467602581).epsilon(1e-9));
  CHECK(cordic_gain_compensation_raw() == std::lround(std::ldexp(1.0 / cordic_gain(), 23)));
}

TEST_CASE("cordic accuracy sample") {
  Rng rng(3);
  for (int i = 0; i < 20000; ++i) {
    const double r = std::exp(rng.uniform(std::log(0x1.0p-10), std::log(0.99)));
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const Fixed x = quantize(r * std::cos(a), kQ0_23), y = quantize(r * std::sin(a), kQ0_23);
    const double xr = to_real(x), yr = to_real(y);
    const auto p = cordic_vectoring(x, y);
    const double want = std::hypot(xr, yr);
    REQUIRE(std::fabs(to_real(p.magnitude) - want) / want <= 0x1.0p-13);
    double dphi = std::fabs(to_real(p.phase) - std::atan2(yr, xr));
    dphi = std::min(dphi, 2 * std::numbers::pi - dphi);
    REQUIRE(dphi <= 0x1.0p-13);
  }
}

TEST_CASE("cfar examples") {
  ChainConfig cfg = small_config(64, 17, 1);
  cfg.cfar_alpha_raw = 0x0180;  // 1.5
  MagnitudeMap flat(1, 32, 16, 1000);
  CHECK(cfar_detect(flat, cfg).empty());

  cfg.cfar_alpha_raw = 0x0400;
  cfg.cfar_guard = 1;
  cfg.cfar_window = 4;
  MagnitudeMap spike = flat;
  spike.at(0, 7, 3) = 10000;
  const auto t = cfar_detect(spike, cfg);
  REQUIRE(t.size() == 1);
  CHECK(t[0] == Target{7, 3, 10000});

  spike.at(0, 20, 9) = 20000;
  cfg.max_targets = 1;
  const auto one = cfar_detect(spike, cfg);
  REQUIRE(one.size() == 1);
  CHECK(one[0].range_bin == 20);

  // Doppler bin 0 is never reported.
  MagnitudeMap clutter = flat;
  clutter.at(0, 5, 0) = 50000;
  cfg.max_targets = 8;
  CHECK(cfar_detect(clutter, cfg).empty());
}

TEST_CASE("cfar tie break and ordering") {
  ChainConfig cfg = small_config(64, 17, 1);
  cfg.cfar_alpha_raw = 0x0200;
  MagnitudeMap m(1, 32, 16, 100);
  m.at(0, 10, 5) = 5000;
  m.at(0, 3, 7) = 5000;
  m.at(0, 3, 2) = 5000;
  m.at(0, 25, 4) = 7000;
  const auto t = cfar_detect(m, cfg);
  REQUIRE(t.size() == 4);
  CHECK(t[0] == Target{25, 4, 7000});
  CHECK(t[1] == Target{3, 2, 5000});
  CHECK(t[2] == Target{3, 7, 5000});
  CHECK(t[3] == Target{10, 5, 5000});
}

TEST_CASE("cfar matches a brute-force oracle on random maps") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    ChainConfig cfg = small_config(1u << rng.range(2, 6), (1u << rng.range(1, 4)) + 1, 1);
    cfg.cfar_alpha_raw = static_cast<std::uint16_t>(rng.range(0x100, 0x600));
    cfg.cfar_guard = static_cast<std::uint32_t>(rng.range(0, 3));
    cfg.cfar_window = static_cast<std::uint32_t>(rng.range(1, 6));
    cfg.max_targets = static_cast<std::uint32_t>(rng.range(1, 16));
    MagnitudeMap mag(1, cfg.range_bins(), cfg.doppler_bins());
    for (auto& v : mag.data()) {
      v = static_cast<std::int32_t>(rng.range(0, 20000));
      if (rng.below(10) == 0) v = static_cast<std::int32_t>(rng.range(20000, (1 << 23) - 1));
    }
    const auto got = cfar_detect(mag, cfg);
    std::set<std::pair<std::uint32_t, std::uint32_t>> cells;
    for (std::size_t i = 0; i < got.size(); ++i) {
      cells.insert({got[i].range_bin, got[i].doppler_bin});
      if (i > 0) CHECK(got[i - 1].magnitude_raw >= got[i].magnitude_raw);
    }
    REQUIRE(cells == cfar_oracle(mag, cfg));
  }
}

TEST_CASE("channel permutation leaves the detection set unchanged") {
  Rng rng(23);
  ChainConfig cfg = small_config(32, 9, 3);
  cfg.cfar_alpha_raw = 0x0300;
  Spectrum maps(3, 16, 8);
  for (auto& v : maps.data())
    v = {static_cast<std::int32_t>(rng.range(-20000, 20000)), static_cast<std::int32_t>(rng.range(-20000, 20000))};
  maps.at(0, 4, 3) = {2000000, 100};
  maps.at(1, 4, 3) = {-1500000, 300000};
  Spectrum perm(3, 16, 8);
  for (std::size_t k = 0; k < 16; ++k)
    for (std::size_t d = 0; d < 8; ++d) {
      perm.at(0, k, d) = maps.at(2, k, d);
      perm.at(1, k, d) = maps.at(0, k, d);
      perm.at(2, k, d) = maps.at(1, k, d);
    }
  const auto a = cfar(maps, cfg), b = cfar(perm, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].range_bin == b[i].range_bin);
    CHECK(a[i].doppler_bin == b[i].doppler_bin);
  }
}

TEST_CASE("angle estimate") {
  ChainConfig cfg = small_config(32, 17, 3);
  Spectrum maps(3, 16, 16);
  const double phi = std::numbers::pi / 4;
  const std::complex<double> x0(0.3, -0.1);
  const auto put = [&](std::size_t r, std::size_t k, std::size_t d, std::complex<double> v) {
    maps.at(r, k, d) = {static_cast<std::int32_t>(std::lround(v.real() / kLsb)),
                        static_cast<std::int32_t>(std::lround(v.imag() / kLsb))};
  };
  put(0, 5, 3, x0);
  put(1, 5, 3, x0);
  put(2, 5, 3, x0);
  put(0, 9, 12, x0);
  put(1, 9, 12, x0 * std::polar(1.0, phi));
  put(2, 9, 12, x0 * std::polar(1.0, -2.0));
  const std::vector<Target> targets = {{5, 3, 100}, {9, 12, 100}, {9, 8, 0}};
  const auto a = angle_estimate(targets, maps, cfg);
  REQUIRE(a.size() == 3);
  CHECK(a[0].az_phase_raw == 0);
  CHECK(a[0].el_phase_raw == 0);
  CHECK(a[0].direction == Direction::kApproaching);
  const double q = std::ldexp(1.0, -21);
  CHECK(std::fabs(a[1].az_phase_raw * q - phi) < 20 * q);
  CHECK(std::fabs(a[1].el_phase_raw * q + 2.0) < 20 * q);
  CHECK(a[1].direction == Direction::kReceding);
  CHECK(a[2].direction == Direction::kStatic);

  cfg.channels = 2;
  CHECK_THROWS_AS(angle_estimate(targets, Spectrum(2, 16, 16), cfg), UnsupportedError);
}

TEST_CASE("step durations") {
  const ChainConfig cfg;
  CHECK(step_duration(Step::kMti, cfg) == 3072);
  CHECK(step_duration(Step::kRfft, cfg) == 3 * 16 * 32 * 6);
  CHECK(step_duration(Step::kCfft, cfg) == 3 * 32 * 8 * 4);
  CHECK(step_duration(Step::kCfar, cfg) == 32 * 16 * (3 + 8 + 2 + 18));
  CHECK(step_duration(Step::kAe, cfg, 3) == 108);
  CHECK(step_duration(Step::kFull, cfg, 3) ==
        step_duration(Step::kMti, cfg) + step_duration(Step::kRfft, cfg) + step_duration(Step::kCfft, cfg) +
            step_duration(Step::kCfar, cfg) + step_duration(Step::kAe, cfg, 3));
}
