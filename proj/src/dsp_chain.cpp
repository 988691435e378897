#include "dspkat/dsp_chain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dspkat/cordic.hpp"

namespace dspkat::dsp {

namespace {

constexpr int kFrac = 23;  // Q0.23 memory format
// Between butterfly stages the datapath keeps 8 guard bits (Q0.31) and the
// twiddle/window ROMs hold 30 fractional bits; results are rounded to Q0.23
// once, on the way out.
constexpr int kWideFrac = 31;
constexpr int kRomFrac = 30;
constexpr std::int64_t kWideMax = (std::int64_t{1} << kWideFrac) - 1;

struct Twiddle {
  std::int64_t re;
  std::int64_t im;
};

struct Wide {
  std::int64_t re;
  std::int64_t im;
};

std::vector<Twiddle> twiddles(std::size_t n) {
  std::vector<Twiddle> t(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    t[j] = {std::llround(std::ldexp(std::cos(a), kRomFrac)), std::llround(std::ldexp(std::sin(a), kRomFrac))};
  }
  return t;
}

std::int64_t clamp_wide(std::int64_t v) { return std::clamp(v, -kWideMax - 1, kWideMax); }

template <typename T>
void bit_reverse(std::span<T> data) {
  const std::size_t n = data.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
}

void fft_wide(std::span<Wide> data, bool conj_twiddle) {
  const std::size_t n = data.size();
  if (!is_power_of_two(static_cast<std::uint32_t>(n))) throw DimensionError("FFT length must be a power of two");
  if (n == 1) return;
  const auto tw = twiddles(n);
  bit_reverse(data);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t base = 0; base < n; base += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const Twiddle w = tw[j * stride];
        const std::int64_t wi = conj_twiddle ? -w.im : w.im;
        Wide& a = data[base + j];
        Wide& b = data[base + j + half];
        // 61-bit products, one rounding per output including the 1/2 stage shift.
        const std::int64_t tr = w.re * b.re - wi * b.im;
        const std::int64_t ti = w.re * b.im + wi * b.re;
        const std::int64_t ar = a.re << kRomFrac;
        const std::int64_t ai = a.im << kRomFrac;
        a = {clamp_wide(shift_round_even(ar + tr, kRomFrac + 1)), clamp_wide(shift_round_even(ai + ti, kRomFrac + 1))};
        b = {clamp_wide(shift_round_even(ar - tr, kRomFrac + 1)), clamp_wide(shift_round_even(ai - ti, kRomFrac + 1))};
      }
    }
  }
}

std::vector<ComplexRaw> narrow(std::span<const Wide> data) {
  std::vector<ComplexRaw> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = {saturate(shift_round_even(data[i].re, kWideFrac - kFrac), kQ0_23),
              saturate(shift_round_even(data[i].im, kWideFrac - kFrac), kQ0_23)};
  }
  return out;
}

void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

std::int64_t div_round_even(std::int64_t num, std::int64_t den) {
  // den > 0, num >= 0
  const std::int64_t q = num / den;
  const std::int64_t r = num % den;
  if (2 * r > den || (2 * r == den && (q & 1) != 0)) return q + 1;
  return q;
}

}  // namespace

void fft_scaled(std::span<ComplexRaw> data, bool conj_twiddle) {
  std::vector<Wide> wide(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    wide[i] = {std::int64_t{data[i].re} << (kWideFrac - kFrac), std::int64_t{data[i].im} << (kWideFrac - kFrac)};
  fft_wide(wide, conj_twiddle);
  const auto out = narrow(wide);
  std::copy(out.begin(), out.end(), data.begin());
}

std::vector<std::int32_t> hann_coefficients(std::uint32_t n) {
  std::vector<std::int32_t> c(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    c[i] = static_cast<std::int32_t>(std::llround(std::ldexp(w, kRomFrac)));
  }
  return c;
}

BurstSet mti(const BurstSet& in, const ChainConfig& cfg, const Faults& faults) {
  require_dims(in.channels() == cfg.channels && in.rows() == cfg.bursts && in.cols() == cfg.samples,
               "mti: input must be R x M x N");
  BurstSet out(cfg.channels, cfg.doppler_bins(), cfg.samples);
  for (std::size_t r = 0; r < cfg.channels; ++r) {
    for (std::size_t m = 0; m < cfg.doppler_bins(); ++m) {
      for (std::size_t n = 0; n < cfg.samples; ++n) {
        const std::int64_t next = in.at(r, m + 1, n);
        const std::int64_t cur = in.at(r, m, n);
        std::int64_t v = next;
        if (cfg.mti_enabled) v = faults.mti_reversed ? cur - next : next - cur;
        out.at(r, m, n) = saturate(v, kQ12_4);
      }
    }
  }
  return out;
}

std::vector<ComplexRaw> rfft(std::span<const std::int32_t> burst, const ChainConfig& cfg, const Faults& faults) {
  const std::size_t n = burst.size();
  require_dims(n == cfg.samples, "rfft: burst length must equal N");
  std::vector<Wide> buf(n);
  // Full-scale Q12.4 (+-2048) maps onto (-1, 1): a pure left shift.
  const int norm_shift = kWideFrac - kQ12_4.frac_bits - kQ12_4.int_bits;
  std::vector<std::int32_t> win;
  if (cfg.window == Window::kHann) win = hann_coefficients(static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t x = std::int64_t{burst[i]} << norm_shift;
    if (!win.empty()) x = shift_round_even(x * win[i], kRomFrac);
    buf[i] = {clamp_wide(x), 0};
  }
  fft_wide(buf, faults.rfft_conj_twiddle);
  auto out = narrow(std::span<const Wide>(buf).first(n / 2));
  return out;
}

std::vector<ComplexRaw> cfft(std::span<const ComplexRaw> series, const Faults& faults) {
  std::vector<ComplexRaw> buf(series.begin(), series.end());
  fft_scaled(buf, faults.cfft_conj_twiddle);
  return buf;
}

Spectrum range_fft(const BurstSet& mti_out, const ChainConfig& cfg, const Faults& faults) {
  require_dims(mti_out.channels() == cfg.channels && mti_out.rows() == cfg.doppler_bins() &&
                   mti_out.cols() == cfg.samples,
               "range_fft: input must be R x (M-1) x N");
  Spectrum out(cfg.channels, cfg.doppler_bins(), cfg.range_bins());
  for (std::size_t r = 0; r < cfg.channels; ++r) {
    for (std::size_t m = 0; m < cfg.doppler_bins(); ++m) {
      const auto bins = rfft(mti_out.row(r, m), cfg, faults);
      std::copy(bins.begin(), bins.end(), out.row(r, m).begin());
    }
  }
  return out;
}

Spectrum doppler_fft(const Spectrum& range_spectra, const ChainConfig& cfg, const Faults& faults) {
  require_dims(range_spectra.channels() == cfg.channels && range_spectra.rows() == cfg.doppler_bins() &&
                   range_spectra.cols() == cfg.range_bins(),
               "doppler_fft: input must be R x (M-1) x N/2");
  Spectrum out(cfg.channels, cfg.range_bins(), cfg.doppler_bins());
  std::vector<ComplexRaw> series(cfg.doppler_bins());
  for (std::size_t r = 0; r < cfg.channels; ++r) {
    for (std::size_t k = 0; k < cfg.range_bins(); ++k) {
      for (std::size_t m = 0; m < cfg.doppler_bins(); ++m) series[m] = range_spectra.at(r, m, k);
      const auto bins = cfft(series, faults);
      std::copy(bins.begin(), bins.end(), out.row(r, k).begin());
    }
  }
  return out;
}

MagnitudeMap magnitude_map(const Spectrum& maps, const ChainConfig& cfg, const Faults& faults) {
  require_dims(maps.channels() == cfg.channels && maps.rows() == cfg.range_bins() && maps.cols() == cfg.doppler_bins(),
               "magnitude_map: maps must be R x N/2 x (M-1)");
  MagnitudeMap mag(1, cfg.range_bins(), cfg.doppler_bins());
  for (std::size_t k = 0; k < cfg.range_bins(); ++k) {
    for (std::size_t d = 0; d < cfg.doppler_bins(); ++d) {
      std::int32_t acc = 0;
      for (std::size_t r = 0; r < cfg.channels; ++r) {
        const ComplexRaw v = maps.at(r, k, d);
        const std::int32_t m = cordic_magnitude_raw(v.re, v.im, !faults.cfar_no_gain_comp);
        acc = saturate(std::int64_t{acc} + m, kQ0_23);
      }
      mag.at(0, k, d) = acc;
    }
  }
  return mag;
}

void sort_targets(std::vector<Target>& targets) {
  std::sort(targets.begin(), targets.end(), [](const Target& a, const Target& b) {
    if (a.magnitude_raw != b.magnitude_raw) return a.magnitude_raw > b.magnitude_raw;
    if (a.range_bin != b.range_bin) return a.range_bin < b.range_bin;
    return a.doppler_bin < b.doppler_bin;
  });
}

std::vector<Target> cfar_detect(const MagnitudeMap& mag, const ChainConfig& cfg) {
  const std::size_t ranges = mag.rows();
  const std::size_t dopplers = mag.cols();
  const std::int64_t g = cfg.cfar_guard;
  const std::int64_t w = cfg.cfar_window;
  const Fixed alpha{static_cast<std::int32_t>(cfg.cfar_alpha_raw), kQ8_8};

  std::vector<Target> hits;
  std::vector<std::int64_t> prefix(ranges + 1);
  // Doppler bin 0 carries static clutter and is never tested.
  for (std::size_t d = 1; d < dopplers; ++d) {
    prefix[0] = 0;
    for (std::size_t k = 0; k < ranges; ++k) prefix[k + 1] = prefix[k] + mag.at(0, k, d);
    auto window_sum = [&](std::int64_t lo, std::int64_t hi, std::int64_t& count) {
      lo = std::max<std::int64_t>(lo, 0);
      hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(ranges) - 1);
      if (hi < lo) return std::int64_t{0};
      count += hi - lo + 1;
      return prefix[hi + 1] - prefix[lo];
    };
    for (std::size_t k = 0; k < ranges; ++k) {
      const auto kk = static_cast<std::int64_t>(k);
      std::int64_t count = 0;
      std::int64_t sum = window_sum(kk - g - w, kk - g - 1, count);
      sum += window_sum(kk + g + 1, kk + g + w, count);
      if (count == 0) continue;
      const Fixed mean{saturate(div_round_even(sum, count), kQ0_23), kQ0_23};
      const Fixed threshold = sat_mul(alpha, mean, kQ0_23);
      const std::int32_t cell = mag.at(0, k, d);
      if (cell > threshold.raw) hits.push_back({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(d), cell});
    }
  }
  sort_targets(hits);
  if (hits.size() > cfg.max_targets) hits.resize(cfg.max_targets);
  return hits;
}

std::vector<Target> cfar(const Spectrum& maps, const ChainConfig& cfg, const Faults& faults) {
  return cfar_detect(magnitude_map(maps, cfg, faults), cfg);
}

std::vector<AngleResult> angle_estimate(const std::vector<Target>& targets, const Spectrum& maps,
                                        const ChainConfig& cfg, const Faults& faults) {
  if (cfg.channels < 3) throw UnsupportedError("angle estimation requires R = 3 channels");
  require_dims(maps.channels() == cfg.channels && maps.rows() == cfg.range_bins() && maps.cols() == cfg.doppler_bins(),
               "angle_estimate: maps must be R x N/2 x (M-1)");
  // Phase of X_ch * conj(X_ref), products kept at full precision.
  auto phase_between = [&](const ComplexRaw& ch, const ComplexRaw& ref) {
    const std::int64_t re = std::int64_t{ch.re} * ref.re + std::int64_t{ch.im} * ref.im;
    const std::int64_t im = std::int64_t{ch.im} * ref.re - std::int64_t{ch.re} * ref.im;
    return cordic_phase_raw(re, im);
  };
  std::vector<AngleResult> out;
  out.reserve(targets.size());
  for (const Target& t : targets) {
    if (t.range_bin >= cfg.range_bins() || t.doppler_bin >= cfg.doppler_bins())
      throw DimensionError("angle_estimate: target outside the map");
    const ComplexRaw x0 = maps.at(0, t.range_bin, t.doppler_bin);
    const ComplexRaw x1 = maps.at(1, t.range_bin, t.doppler_bin);
    const ComplexRaw x2 = maps.at(2, t.range_bin, t.doppler_bin);
    AngleResult a;
    a.range_bin = t.range_bin;
    a.doppler_bin = t.doppler_bin;
    if (faults.ae_conj_reference) {
      a.az_phase_raw = phase_between(x0, x1);
      a.el_phase_raw = phase_between(x0, x2);
    } else {
      a.az_phase_raw = phase_between(x1, x0);
      a.el_phase_raw = phase_between(x2, x0);
    }
    a.direction = direction_for(t.doppler_bin, cfg);
    out.push_back(a);
  }
  return out;
}

std::uint64_t step_duration(Step step, const ChainConfig& cfg, std::size_t target_count) {
  const std::uint64_t n = cfg.samples;
  const std::uint64_t d = cfg.doppler_bins();
  const std::uint64_t r = cfg.channels;
  const std::uint64_t k = cfg.range_bins();
  switch (step) {
    case Step::kAdc: return 0;
    case Step::kMti: return r * d * n;
    case Step::kRfft: return r * d * k * log2_exact(cfg.samples);
    case Step::kCfft: return r * k * (d / 2) * log2_exact(cfg.doppler_bins());
    case Step::kCfar: return k * d * (r + 2 * cfg.cfar_window + 2 * cfg.cfar_guard + 18);
    case Step::kAe: return 2 * 18 * static_cast<std::uint64_t>(target_count);
    case Step::kFull:
      return step_duration(Step::kMti, cfg) + step_duration(Step::kRfft, cfg) + step_duration(Step::kCfft, cfg) +
             step_duration(Step::kCfar, cfg) + (cfg.channels >= 3 ? step_duration(Step::kAe, cfg, target_count) : 0);
  }
  return 0;
}

}  // namespace dspkat::dsp
