#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "dspkat/chain_config.hpp"
#include "dspkat/cube.hpp"
#include "dspkat/dsp_chain.hpp"

// Double-precision golden model of the processing chain. Each step is a
// stand-alone function; cascading them reproduces the full chain. With
// `quantize` set, every step result is rounded onto its memory format grid,
// which is how expected scenario files are produced.
namespace dspkat::ref {

using RealCube = Cube<double>;
using ComplexCube = Cube<std::complex<double>>;

struct ModelConfig {
  ChainConfig chain;
  bool quantize = true;
};

struct ModelTarget {
  std::uint32_t range_bin = 0;
  std::uint32_t doppler_bin = 0;
  double magnitude = 0.0;  // sum over channels of |X|
};

struct ModelAngle {
  std::uint32_t range_bin = 0;
  std::uint32_t doppler_bin = 0;
  double az_phase = 0.0;  // radians, (-pi, pi]
  double el_phase = 0.0;
  Direction direction = Direction::kStatic;
};

/// Input: R x M x N samples in Q12.4 real units. Output: R x (M-1) x N.
RealCube calc_mti_result(const RealCube& adc, const ModelConfig& cfg);
/// Input: R x (M-1) x N in Q12.4 real units. Output: R x (M-1) x N/2 bins
/// of the windowed DFT of the full-scale-normalized input, scaled by 1/N.
ComplexCube calc_range_fft_result(const RealCube& mti, const ModelConfig& cfg);
/// Input: R x (M-1) x N/2. Output maps: R x N/2 x (M-1), scaled by 1/(M-1).
ComplexCube calc_doppler_fft_result(const ComplexCube& rfft, const ModelConfig& cfg);
std::vector<ModelTarget> calc_cfar_result(const ComplexCube& maps, const ModelConfig& cfg);
std::vector<ModelAngle> calc_angle_result(const std::vector<ModelTarget>& targets, const ComplexCube& maps,
                                          const ModelConfig& cfg);

/// Per-cell CFAR statistics (Doppler bin 0 excluded).
struct CellStat {
  std::uint32_t range_bin = 0;
  std::uint32_t doppler_bin = 0;
  double magnitude = 0.0;
  double threshold = 0.0;
  bool has_window = false;  // false when the truncated window is empty
};
std::vector<CellStat> cfar_cell_statistics(const ComplexCube& maps, const ModelConfig& cfg);

struct ChainResult {
  RealCube mti;
  ComplexCube rfft;
  ComplexCube cfft;
  std::vector<ModelTarget> targets;
  std::vector<ModelAngle> angles;  // empty when R < 3
};
ChainResult run_chain(const RealCube& adc, const ModelConfig& cfg);

/// sum_n x[n] exp(-2 pi i k n / len) / len for all k.
std::vector<std::complex<double>> dft_scaled(std::span<const std::complex<double>> x);

std::vector<double> window_coefficients(Window w, std::uint32_t n);

// Conversions between datapath raws and model values.
RealCube to_model(const dsp::BurstSet& raw);
ComplexCube to_model(const dsp::Spectrum& raw);
dsp::BurstSet to_raw_bursts(const RealCube& values);
dsp::Spectrum to_raw_spectrum(const ComplexCube& values);

std::int32_t magnitude_raw(double magnitude);
std::int32_t phase_raw(double phase);

}  // namespace dspkat::ref
