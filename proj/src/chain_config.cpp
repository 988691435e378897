#include "dspkat/chain_config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <utility>

#include "dspkat/memory_map.hpp"

namespace dspkat {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

constexpr std::array<std::pair<Step, std::string_view>, 7> kStepNames{{
    {Step::kAdc, "adc"},
    {Step::kMti, "mti"},
    {Step::kRfft, "rfft"},
    {Step::kCfft, "cfft"},
    {Step::kCfar, "cfar"},
    {Step::kAe, "ae"},
    {Step::kFull, "full"},
}};

}  // namespace

std::string_view to_string(Step s) {
  for (const auto& [step, name] : kStepNames)
    if (step == s) return name;
  return "?";
}

std::optional<Step> parse_step(std::string_view name) {
  for (const auto& [step, n] : kStepNames)
    if (iequals(n, name)) return step;
  return std::nullopt;
}

std::string_view to_string(Window w) { return w == Window::kHann ? "HANN" : "NONE"; }

std::optional<Window> parse_window(std::string_view name) {
  if (iequals(name, "HANN")) return Window::kHann;
  if (iequals(name, "NONE")) return Window::kNone;
  return std::nullopt;
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kApproaching: return "APPROACHING";
    case Direction::kReceding: return "RECEDING";
    case Direction::kStatic: break;
  }
  return "STATIC";
}

std::optional<Direction> parse_direction(std::string_view name) {
  if (iequals(name, "APPROACHING")) return Direction::kApproaching;
  if (iequals(name, "RECEDING")) return Direction::kReceding;
  if (iequals(name, "STATIC")) return Direction::kStatic;
  return std::nullopt;
}

bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::uint32_t log2_exact(std::uint32_t v) {
  std::uint32_t l = 0;
  while ((std::uint32_t{1} << l) < v) ++l;
  return l;
}

std::vector<std::string> config_violations(const ChainConfig& cfg) {
  std::vector<std::string> out;
  if (!is_power_of_two(cfg.samples) || cfg.samples < 16 || cfg.samples > 256)
    out.push_back("N must be a power of two in [16, 256]");
  if (cfg.bursts < 3 || !is_power_of_two(cfg.bursts - 1)) out.push_back("M-1 must be a power of two >= 2");
  if (cfg.channels < 1 || cfg.channels > 3) out.push_back("R must be in [1, 3]");
  if (cfg.cfar_window < 1) out.push_back("CFAR window W must be >= 1");
  if (cfg.max_targets < 1 || cfg.max_targets > kMaxTargetSlots)
    out.push_back("max_targets must be in [1, " + std::to_string(kMaxTargetSlots) + "]");
  if (cfg.cfar_alpha_raw == 0 || cfg.cfar_alpha_raw > 0x7FFF) out.push_back("cfar_alpha must be positive Q8.8");
  if (cfg.consec_hits < 1) out.push_back("consec_hits must be >= 1");
  if (cfg.window != Window::kNone && cfg.window != Window::kHann) out.push_back("unknown window selection");
  if (!out.empty()) return out;

  // Every step region must fit in its memory window.
  for (Step s : {Step::kAdc, Step::kMti, Step::kRfft, Step::kCfft}) {
    const RegionLayout l = region_for(s, cfg);
    const MemoryWindow& w = window_for(s);
    if (l.end() > w.limit) {
      std::ostringstream os;
      os << to_string(s) << " region (" << l.extent << " words) exceeds its memory window";
      out.push_back(os.str());
    }
  }
  return out;
}

void validate_config(const ChainConfig& cfg) {
  const auto v = config_violations(cfg);
  if (v.empty()) return;
  std::string msg = "invalid chain configuration:";
  for (const auto& s : v) msg += " " + s + ";";
  throw ConfigError(msg);
}

Direction direction_for(std::uint32_t doppler_bin, const ChainConfig& cfg) {
  const std::uint32_t half = cfg.doppler_bins() / 2;
  if (doppler_bin == half) return Direction::kStatic;
  return doppler_bin < half ? Direction::kApproaching : Direction::kReceding;
}

}  // namespace dspkat
