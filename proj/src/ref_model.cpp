#include "dspkat/ref_model.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "dspkat/fixed_point.hpp"

namespace dspkat::ref {

namespace {

// FFTW planning is not thread-safe; execution on a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double grid(double x, QFormat fmt) { return to_real(quantize(x, fmt)); }

std::complex<double> grid(std::complex<double> x, QFormat fmt) { return {grid(x.real(), fmt), grid(x.imag(), fmt)}; }

void require_dims(bool ok, const char* what) {
  if (!ok) throw dsp::DimensionError(what);
}

// Full-scale Q12.4 real units onto (-1, 1).
constexpr double kAdcFullScale = 2048.0;

}  // namespace

std::vector<std::complex<double>> dft_scaled(std::span<const std::complex<double>> x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(x.size());
  if (n == 0) return out;
  auto* pin = reinterpret_cast<fftw_complex*>(in.data());
  auto* pout = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(n, pin, pout, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

std::vector<double> window_coefficients(Window w, std::uint32_t n) {
  std::vector<double> c(n, 1.0);
  if (w == Window::kHann)
    for (std::uint32_t i = 0; i < n; ++i) c[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return c;
}

RealCube calc_mti_result(const RealCube& adc, const ModelConfig& mc) {
  const ChainConfig& cfg = mc.chain;
  require_dims(adc.channels() == cfg.channels && adc.rows() == cfg.bursts && adc.cols() == cfg.samples,
               "calc_mti_result: input must be R x M x N");
  RealCube out(cfg.channels, cfg.doppler_bins(), cfg.samples);
  for (std::size_t r = 0; r < cfg.channels; ++r)
    for (std::size_t m = 0; m < cfg.doppler_bins(); ++m)
      for (std::size_t n = 0; n < cfg.samples; ++n) {
        double v = adc.at(r, m + 1, n);
        if (cfg.mti_enabled) v -= adc.at(r, m, n);
        out.at(r, m, n) = mc.quantize ? grid(v, kQ12_4) : v;
      }
  return out;
}

ComplexCube calc_range_fft_result(const RealCube& mti, const ModelConfig& mc) {
  const ChainConfig& cfg = mc.chain;
  require_dims(mti.channels() == cfg.channels && mti.rows() == cfg.doppler_bins() && mti.cols() == cfg.samples,
               "calc_range_fft_result: input must be R x (M-1) x N");
  const auto win = window_coefficients(cfg.window, cfg.samples);
  ComplexCube out(cfg.channels, cfg.doppler_bins(), cfg.range_bins());
  std::vector<std::complex<double>> buf(cfg.samples);
  for (std::size_t r = 0; r < cfg.channels; ++r)
    for (std::size_t m = 0; m < cfg.doppler_bins(); ++m) {
      for (std::size_t n = 0; n < cfg.samples; ++n) buf[n] = mti.at(r, m, n) / kAdcFullScale * win[n];
      const auto spec = dft_scaled(buf);
      for (std::size_t k = 0; k < cfg.range_bins(); ++k) out.at(r, m, k) = mc.quantize ? grid(spec[k], kQ0_23) : spec[k];
    }
  return out;
}

ComplexCube calc_doppler_fft_result(const ComplexCube& rfft, const ModelConfig& mc) {
  const ChainConfig& cfg = mc.chain;
  require_dims(rfft.channels() == cfg.channels && rfft.rows() == cfg.doppler_bins() && rfft.cols() == cfg.range_bins(),
               "calc_doppler_fft_result: input must be R x (M-1) x N/2");
  ComplexCube out(cfg.channels, cfg.range_bins(), cfg.doppler_bins());
  std::vector<std::complex<double>> buf(cfg.doppler_bins());
  for (std::size_t r = 0; r < cfg.channels; ++r)
    for (std::size_t k = 0; k < cfg.range_bins(); ++k) {
      for (std::size_t m = 0; m < cfg.doppler_bins(); ++m) buf[m] = rfft.at(r, m, k);
      const auto spec = dft_scaled(buf);
      for (std::size_t d = 0; d < cfg.doppler_bins(); ++d) out.at(r, k, d) = mc.quantize ? grid(spec[d], kQ0_23) : spec[d];
    }
  return out;
}

std::vector<CellStat> cfar_cell_statistics(const ComplexCube& maps, const ModelConfig& mc) {
  const ChainConfig& cfg = mc.chain;
  require_dims(maps.channels() == cfg.channels && maps.rows() == cfg.range_bins() && maps.cols() == cfg.doppler_bins(),
               "cfar: maps must be R x N/2 x (M-1)");
  const std::int64_t ranges = cfg.range_bins();
  Cube<double> mag(1, cfg.range_bins(), cfg.doppler_bins());
  for (std::size_t k = 0; k < cfg.range_bins(); ++k)
    for (std::size_t d = 0; d < cfg.doppler_bins(); ++d) {
      double s = 0.0;
      for (std::size_t r = 0; r < cfg.channels; ++r) s += std::abs(maps.at(r, k, d));
      mag.at(0, k, d) = s;
    }

  const std::int64_t g = cfg.cfar_guard;
  const std::int64_t w = cfg.cfar_window;
  std::vector<CellStat> stats;
  for (std::uint32_t d = 1; d < cfg.doppler_bins(); ++d)
    for (std::int64_t k = 0; k < ranges; ++k) {
      double sum = 0.0;
      int count = 0;
      for (std::int64_t j = k - g - w; j <= k + g + w; ++j) {
        if (j < 0 || j >= ranges || std::abs(j - k) <= g) continue;
        sum += mag.at(0, static_cast<std::size_t>(j), d);
        ++count;
      }
      CellStat s;
      s.range_bin = static_cast<std::uint32_t>(k);
      s.doppler_bin = d;
      s.magnitude = mag.at(0, static_cast<std::size_t>(k), d);
      s.has_window = count > 0;
      s.threshold = count > 0 ? cfg.cfar_alpha() * sum / count : 0.0;
      stats.push_back(s);
    }
  return stats;
}

std::vector<ModelTarget> calc_cfar_result(const ComplexCube& maps, const ModelConfig& mc) {
  std::vector<ModelTarget> hits;
  for (const CellStat& s : cfar_cell_statistics(maps, mc))
    if (s.has_window && s.magnitude > s.threshold) hits.push_back({s.range_bin, s.doppler_bin, s.magnitude});
  std::sort(hits.begin(), hits.end(), [](const ModelTarget& a, const ModelTarget& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    if (a.range_bin != b.range_bin) return a.range_bin < b.range_bin;
    return a.doppler_bin < b.doppler_bin;
  });
  if (hits.size() > mc.chain.max_targets) hits.resize(mc.chain.max_targets);
  if (mc.quantize)
    for (auto& t : hits) t.magnitude = grid(t.magnitude, kQ0_23);
  return hits;
}

std::vector<ModelAngle> calc_angle_result(const std::vector<ModelTarget>& targets, const ComplexCube& maps,
                                          const ModelConfig& mc) {
  const ChainConfig& cfg = mc.chain;
  if (cfg.channels < 3) throw dsp::UnsupportedError("angle estimation requires R = 3 channels");
  require_dims(maps.channels() == cfg.channels && maps.rows() == cfg.range_bins() && maps.cols() == cfg.doppler_bins(),
               "calc_angle_result: maps must be R x N/2 x (M-1)");
  std::vector<ModelAngle> out;
  for (const ModelTarget& t : targets) {
    const auto x0 = maps.at(0, t.range_bin, t.doppler_bin);
    const auto x1 = maps.at(1, t.range_bin, t.doppler_bin);
    const auto x2 = maps.at(2, t.range_bin, t.doppler_bin);
    ModelAngle a;
    a.range_bin = t.range_bin;
    a.doppler_bin = t.doppler_bin;
    a.az_phase = std::arg(x1 * std::conj(x0));
    a.el_phase = std::arg(x2 * std::conj(x0));
    // std::arg yields [-pi, pi]; fold -pi onto pi.
    if (a.az_phase <= -std::numbers::pi) a.az_phase = std::numbers::pi;
    if (a.el_phase <= -std::numbers::pi) a.el_phase = std::numbers::pi;
    if (mc.quantize) {
      a.az_phase = to_real(Fixed{phase_raw(a.az_phase), kQ2_21});
      a.el_phase = to_real(Fixed{phase_raw(a.el_phase), kQ2_21});
    }
    a.direction = direction_for(t.doppler_bin, cfg);
    out.push_back(a);
  }
  return out;
}

ChainResult run_chain(const RealCube& adc, const ModelConfig& mc) {
  ChainResult res;
  res.mti = calc_mti_result(adc, mc);
  res.rfft = calc_range_fft_result(res.mti, mc);
  res.cfft = calc_doppler_fft_result(res.rfft, mc);
  res.targets = calc_cfar_result(res.cfft, mc);
  if (mc.chain.channels >= 3) res.angles = calc_angle_result(res.targets, res.cfft, mc);
  return res;
}

RealCube to_model(const dsp::BurstSet& raw) {
  RealCube out(raw.channels(), raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.size(); ++i) out.data()[i] = to_real(Fixed{raw.data()[i], kQ12_4});
  return out;
}

ComplexCube to_model(const dsp::Spectrum& raw) {
  ComplexCube out(raw.channels(), raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const ComplexRaw v = raw.data()[i];
    out.data()[i] = {to_real(Fixed{v.re, kQ0_23}), to_real(Fixed{v.im, kQ0_23})};
  }
  return out;
}

dsp::BurstSet to_raw_bursts(const RealCube& values) {
  dsp::BurstSet out(values.channels(), values.rows(), values.cols());
  for (std::size_t i = 0; i < values.size(); ++i) out.data()[i] = quantize(values.data()[i], kQ12_4).raw;
  return out;
}

dsp::Spectrum to_raw_spectrum(const ComplexCube& values) {
  dsp::Spectrum out(values.channels(), values.rows(), values.cols());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto v = values.data()[i];
    out.data()[i] = {quantize(v.real(), kQ0_23).raw, quantize(v.imag(), kQ0_23).raw};
  }
  return out;
}

std::int32_t magnitude_raw(double magnitude) { return quantize(magnitude, kQ0_23).raw; }

std::int32_t phase_raw(double phase) {
  std::int32_t raw = quantize(phase, kQ2_21).raw;
  // pi rounds beyond the representable half-open interval edge.
  const std::int32_t pi = quantize(std::numbers::pi, kQ2_21).raw;
  if (raw > pi) raw -= 2 * pi;
  if (raw <= -pi) raw += 2 * pi;
  return raw;
}

}  // namespace dspkat::ref
