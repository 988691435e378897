#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dspkat/chain_config.hpp"
#include "dspkat/cube.hpp"
#include "dspkat/fixed_point.hpp"

namespace dspkat::dsp {

/// ADC or MTI samples, Q12.4 raw: channel x burst x sample.
using BurstSet = Cube<std::int32_t>;
/// Complex Q0.23 data. Range spectra are channel x burst x range bin;
/// range-Doppler maps are channel x range bin x Doppler bin.
using Spectrum = Cube<ComplexRaw>;
/// Non-coherent magnitude sum, Q0.23 raw: 1 x range bin x Doppler bin.
using MagnitudeMap = Cube<std::int32_t>;

struct Target {
  std::uint32_t range_bin = 0;
  std::uint32_t doppler_bin = 0;
  std::int32_t magnitude_raw = 0;  // Q0.23
  friend bool operator==(const Target&, const Target&) = default;
};

struct AngleResult {
  std::uint32_t range_bin = 0;
  std::uint32_t doppler_bin = 0;
  std::int32_t az_phase_raw = 0;  // Q2.21 radians
  std::int32_t el_phase_raw = 0;
  Direction direction = Direction::kStatic;
  friend bool operator==(const AngleResult&, const AngleResult&) = default;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deliberate datapath defects, one per step, used to demonstrate that the
/// step known-answer tests localize bugs.
struct Faults {
  bool mti_reversed = false;       // out = in[m] - in[m+1]
  bool rfft_conj_twiddle = false;  // twiddle ROM sign error
  bool cfft_conj_twiddle = false;
  bool cfar_no_gain_comp = false;  // CORDIC magnitude not scaled by 1/K
  bool ae_conj_reference = false;  // multiplies by conj(X1) instead of conj(X0)

  bool any() const {
    return mti_reversed || rfft_conj_twiddle || cfft_conj_twiddle || cfar_no_gain_comp || ae_conj_reference;
  }
};

BurstSet mti(const BurstSet& in, const ChainConfig& cfg, const Faults& faults = {});

/// Range FFT of one burst: N real Q12.4 samples -> N/2 complex Q0.23 bins.
std::vector<ComplexRaw> rfft(std::span<const std::int32_t> burst, const ChainConfig& cfg, const Faults& faults = {});
/// Doppler FFT of one range bin across M-1 bursts.
std::vector<ComplexRaw> cfft(std::span<const ComplexRaw> series, const Faults& faults = {});

/// rfft over every burst of every channel.
Spectrum range_fft(const BurstSet& mti_out, const ChainConfig& cfg, const Faults& faults = {});
/// cfft over every range bin; returns the range-Doppler maps.
Spectrum doppler_fft(const Spectrum& range_spectra, const ChainConfig& cfg, const Faults& faults = {});

/// Per-cell non-coherent sum over channels of CORDIC magnitudes.
MagnitudeMap magnitude_map(const Spectrum& maps, const ChainConfig& cfg, const Faults& faults = {});
/// Cell-averaging detection on a magnitude map (sorted, truncated).
std::vector<Target> cfar_detect(const MagnitudeMap& mag, const ChainConfig& cfg);
std::vector<Target> cfar(const Spectrum& maps, const ChainConfig& cfg, const Faults& faults = {});

std::vector<AngleResult> angle_estimate(const std::vector<Target>& targets, const Spectrum& maps,
                                        const ChainConfig& cfg, const Faults& faults = {});

/// Deterministic cycle-cost model. AE and FULL depend on the target count.
std::uint64_t step_duration(Step step, const ChainConfig& cfg, std::size_t target_count = 0);

/// Sort order shared by device and model: descending magnitude, then lower
/// range bin, then lower Doppler bin.
void sort_targets(std::vector<Target>& targets);

/// Radix-2 DIT transform with 1/2 scaling per stage, in place. Stages run
/// with 8 guard bits; the Q0.23 result is rounded once.
void fft_scaled(std::span<ComplexRaw> data, bool conj_twiddle = false);

/// Window ROM on a 2^-30 grid (1.0 is exactly representable).
std::vector<std::int32_t> hann_coefficients(std::uint32_t n);

}  // namespace dspkat::dsp
