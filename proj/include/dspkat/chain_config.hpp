#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dspkat {

enum class Step { kAdc, kMti, kRfft, kCfft, kCfar, kAe, kFull };

std::string_view to_string(Step s);
std::optional<Step> parse_step(std::string_view name);

enum class Window : std::uint32_t { kNone = 0, kHann = 1 };
std::string_view to_string(Window w);
std::optional<Window> parse_window(std::string_view name);

enum class Direction : std::uint32_t { kStatic = 0, kApproaching = 1, kReceding = 2 };
std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view name);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Processing-chain configuration; mirrors the CONFIG register block.
struct ChainConfig {
  std::uint32_t samples = 64;        // N, samples per burst
  std::uint32_t bursts = 17;         // M, bursts per frame
  std::uint32_t channels = 3;        // R, RX channels
  bool mti_enabled = true;
  Window window = Window::kHann;
  std::uint16_t cfar_alpha_raw = 0x0400;  // Q8.8
  std::uint32_t cfar_guard = 1;      // G
  std::uint32_t cfar_window = 4;     // W
  std::uint32_t max_targets = 8;     // T
  std::uint32_t consec_hits = 2;

  std::uint32_t range_bins() const { return samples / 2; }
  std::uint32_t doppler_bins() const { return bursts - 1; }
  double cfar_alpha() const { return cfar_alpha_raw / 256.0; }

  friend bool operator==(const ChainConfig&, const ChainConfig&) = default;
};

/// Result register capacity; max_targets may not exceed it.
inline constexpr std::uint32_t kMaxTargetSlots = 16;

/// Empty on success, otherwise one message per violated rule.
std::vector<std::string> config_violations(const ChainConfig& cfg);
/// Throws ConfigError listing every violation.
void validate_config(const ChainConfig& cfg);

bool is_power_of_two(std::uint32_t v);
std::uint32_t log2_exact(std::uint32_t v);

/// Direction rule on the Doppler axis: bins below the middle approach,
/// bins above recede, the middle bin itself is static.
Direction direction_for(std::uint32_t doppler_bin, const ChainConfig& cfg);

}  // namespace dspkat
