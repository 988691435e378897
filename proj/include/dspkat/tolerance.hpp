#pragma once

#include <cstdint>

#include "dspkat/chain_config.hpp"

namespace dspkat {

/// Per-step comparison tolerances in LSB of the step's format.
struct ToleranceTable {
  std::uint32_t mti_lsb = 0;
  std::uint32_t rfft_lsb = 4;
  std::uint32_t cfft_lsb = 8;
  std::uint32_t magnitude_lsb = 16;
  std::uint32_t phase_lsb = 16;

  /// Tolerance for a memory region step (MTI, RFFT, CFFT).
  std::uint32_t memory_lsb(Step s) const {
    switch (s) {
      case Step::kMti: return mti_lsb;
      case Step::kRfft: return rfft_lsb;
      case Step::kCfft: return cfft_lsb;
      default: return 0;
    }
  }

  friend bool operator==(const ToleranceTable&, const ToleranceTable&) = default;
};

}  // namespace dspkat
