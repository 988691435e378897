#pragma once

#include "dspkat/dsp_chain.hpp"
#include "dspkat/mem_image.hpp"
#include "dspkat/memory_map.hpp"

// Moves chain data between memory images and datapath arrays. The region
// index order equals the Cube linear order, so these are flat copies.
namespace dspkat::dsp {

MemoryImage bursts_to_image(const BurstSet& bursts, Step step, const ChainConfig& cfg);
BurstSet image_to_bursts(const MemoryImage& img, Step step, const ChainConfig& cfg);

MemoryImage spectrum_to_image(const Spectrum& spectrum, Step step, const ChainConfig& cfg);
Spectrum image_to_spectrum(const MemoryImage& img, Step step, const ChainConfig& cfg);

/// Splits the ADC image into one image per channel (the per-file layout).
std::vector<MemoryImage> split_adc_channels(const MemoryImage& adc, const ChainConfig& cfg);

}  // namespace dspkat::dsp
