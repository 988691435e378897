#include "dspkat/chain_io.hpp"

namespace dspkat::dsp {

namespace {

void check_real_step(Step step) {
  if (step != Step::kAdc && step != Step::kMti) throw ContractError("burst data lives in the ADC or MTI region");
}

void check_complex_step(Step step) {
  if (step != Step::kRfft && step != Step::kCfft) throw ContractError("spectra live in the RFFT or CFFT region");
}

std::size_t rows_for(Step step, const ChainConfig& cfg) {
  switch (step) {
    case Step::kAdc: return cfg.bursts;
    case Step::kMti:
    case Step::kRfft: return cfg.doppler_bins();
    default: return cfg.range_bins();
  }
}

std::size_t cols_for(Step step, const ChainConfig& cfg) {
  switch (step) {
    case Step::kAdc:
    case Step::kMti: return cfg.samples;
    case Step::kRfft: return cfg.range_bins();
    default: return cfg.doppler_bins();
  }
}

}  // namespace

MemoryImage bursts_to_image(const BurstSet& bursts, Step step, const ChainConfig& cfg) {
  check_real_step(step);
  const RegionLayout layout = region_for(step, cfg);
  if (bursts.size() != layout.extent) throw DimensionError("burst set does not match the region layout");
  MemoryImage img(layout.word_bits());
  write_region_raw(img, layout, bursts.data());
  return img;
}

BurstSet image_to_bursts(const MemoryImage& img, Step step, const ChainConfig& cfg) {
  check_real_step(step);
  const RegionLayout layout = region_for(step, cfg);
  BurstSet out(cfg.channels, rows_for(step, cfg), cols_for(step, cfg));
  out.data() = read_region_raw(img, layout);
  return out;
}

MemoryImage spectrum_to_image(const Spectrum& spectrum, Step step, const ChainConfig& cfg) {
  check_complex_step(step);
  const RegionLayout layout = region_for(step, cfg);
  if (spectrum.size() * 2 != layout.extent) throw DimensionError("spectrum does not match the region layout");
  std::vector<std::int32_t> raws;
  raws.reserve(layout.extent);
  for (const ComplexRaw& v : spectrum.data()) {
    raws.push_back(v.re);
    raws.push_back(v.im);
  }
  MemoryImage img(layout.word_bits());
  write_region_raw(img, layout, raws);
  return img;
}

Spectrum image_to_spectrum(const MemoryImage& img, Step step, const ChainConfig& cfg) {
  check_complex_step(step);
  const RegionLayout layout = region_for(step, cfg);
  const auto raws = read_region_raw(img, layout);
  Spectrum out(cfg.channels, rows_for(step, cfg), cols_for(step, cfg));
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = {raws[2 * i], raws[2 * i + 1]};
  return out;
}

std::vector<MemoryImage> split_adc_channels(const MemoryImage& adc, const ChainConfig& cfg) {
  std::vector<MemoryImage> out;
  for (std::uint32_t r = 0; r < cfg.channels; ++r) out.push_back(extract_region(adc, adc_channel_layout(cfg, r)));
  return out;
}

}  // namespace dspkat::dsp
