#pragma once

#include <cstdint>

#include "dspkat/chain_config.hpp"
#include "dspkat/mem_image.hpp"

namespace dspkat {

// Fixed memory windows; each step region starts at its window base.
inline constexpr std::uint32_t kAdcBase = 0x0000;
inline constexpr std::uint32_t kMtiBase = 0x2000;
inline constexpr std::uint32_t kRfftBase = 0x4000;
inline constexpr std::uint32_t kCfftBase = 0x8000;
inline constexpr std::uint32_t kMemoryEnd = 0x10000;

struct MemoryWindow {
  Step step;
  std::uint32_t base;
  std::uint32_t limit;  // one past the last address
  QFormat fmt;
  bool complex;
  int word_bits() const { return fmt.width(); }
};

inline constexpr MemoryWindow kWindows[] = {
    {Step::kAdc, kAdcBase, kMtiBase, kQ12_4, false},
    {Step::kMti, kMtiBase, kRfftBase, kQ12_4, false},
    {Step::kRfft, kRfftBase, kCfftBase, kQ0_23, true},
    {Step::kCfft, kCfftBase, kMemoryEnd, kQ0_23, true},
};

/// Window holding `step`'s output; throws for CFAR/AE/FULL (register results).
const MemoryWindow& window_for(Step step);
/// Window whose address range contains `addr`, or nullptr.
const MemoryWindow* window_at(std::uint32_t addr);

/// Layout of a memory step region for `cfg`. Ordering is channel-major,
/// then burst (or range bin for CFFT), then sample (or bin); complex values
/// are stored real then imaginary.
RegionLayout region_for(Step step, const ChainConfig& cfg);

/// Address of sample n of burst m on channel r in the ADC or MTI region.
std::uint32_t sample_address(Step step, const ChainConfig& cfg, std::uint32_t r, std::uint32_t m, std::uint32_t n);

/// Slice of the ADC region that belongs to one RX channel.
RegionLayout adc_channel_layout(const ChainConfig& cfg, std::uint32_t channel);

}  // namespace dspkat
