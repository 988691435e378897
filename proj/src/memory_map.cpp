#include "dspkat/memory_map.hpp"

namespace dspkat {

const MemoryWindow& window_for(Step step) {
  for (const auto& w : kWindows)
    if (w.step == step) return w;
  throw ContractError("step " + std::string(to_string(step)) + " has no memory region");
}

const MemoryWindow* window_at(std::uint32_t addr) {
  for (const auto& w : kWindows)
    if (addr >= w.base && addr < w.limit) return &w;
  return nullptr;
}

RegionLayout region_for(Step step, const ChainConfig& cfg) {
  const MemoryWindow& w = window_for(step);
  const std::uint32_t r = cfg.channels;
  std::uint32_t extent = 0;
  switch (step) {
    case Step::kAdc: extent = r * cfg.bursts * cfg.samples; break;
    case Step::kMti: extent = r * cfg.doppler_bins() * cfg.samples; break;
    case Step::kRfft:
    case Step::kCfft: extent = r * cfg.doppler_bins() * cfg.range_bins() * 2; break;
    default: break;
  }
  return {w.base, extent, w.fmt, w.complex};
}

std::uint32_t sample_address(Step step, const ChainConfig& cfg, std::uint32_t r, std::uint32_t m, std::uint32_t n) {
  const std::uint32_t bursts = step == Step::kAdc ? cfg.bursts : cfg.doppler_bins();
  return window_for(step).base + (r * bursts + m) * cfg.samples + n;
}

RegionLayout adc_channel_layout(const ChainConfig& cfg, std::uint32_t channel) {
  const std::uint32_t per_channel = cfg.bursts * cfg.samples;
  return {kAdcBase + channel * per_channel, per_channel, kQ12_4, false};
}

}  // namespace dspkat
