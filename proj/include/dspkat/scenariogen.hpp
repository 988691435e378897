#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dspkat/chain_config.hpp"
#include "dspkat/dsp_chain.hpp"
#include "dspkat/ref_model.hpp"
#include "dspkat/scenario.hpp"

namespace dspkat {

/// One reflector. Bins may be fractional; amplitude is a fraction of ADC
/// full scale; phases (radians) are the channel 1 and channel 2 offsets.
struct SceneTarget {
  double range_bin = 0.0;
  double doppler_bin = 0.0;
  double amplitude = 0.0;
  double az_phase = 0.0;
  double el_phase = 0.0;
  friend bool operator==(const SceneTarget&, const SceneTarget&) = default;
};

struct SceneSpec {
  std::string name;
  std::string description;
  ChainConfig config;
  std::vector<SceneTarget> targets;
  double noise_rms = 0.0;  // fraction of full scale
  std::uint64_t seed = 1;
  double separation_margin_db = 6.0;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

nlohmann::json scene_to_json(const SceneSpec& spec);
/// Throws ScenarioError naming the offending field.
SceneSpec scene_from_json(const nlohmann::json& j, const std::string& file = "scene.json");
SceneSpec load_scene_file(const std::filesystem::path& path);

/// Domain rule violations of the scene spec itself (amplitude, noise, bins, config).
std::vector<std::string> spec_violations(const SceneSpec& spec);

/// R x M x N Q12.4 raws: sum of target tones plus seeded Gaussian noise.
dsp::BurstSet synthesize_adc(const SceneSpec& spec);

struct SeparationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Pairwise amplitude margins and target-to-threshold margins (computed by
/// running the reference model on the synthesized data under `cfg`). Also
/// rejects scenes whose quantized model detects cells that are not targets.
SeparationReport check_separation(const SceneSpec& spec, const ChainConfig& cfg);

class SeparationError : public std::runtime_error {
 public:
  explicit SeparationError(const SeparationReport& rep);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Expected target list (with angles when present) from a quantized model run.
std::vector<ExpectedTarget> expected_from_model(const ref::ChainResult& model, const ChainConfig& cfg);

/// Complete in-memory scenario: ADC, quantized model intermediates and
/// expected targets/angles.
Scenario build_scenario(const SceneSpec& spec);
/// Checks separation (unless forced), builds and writes the file set.
Scenario generate_scenario(const SceneSpec& spec, const std::filesystem::path& dir, bool force = false);

/// Smallest Q8.8 alpha at which the reference model no longer detects the
/// cell; nullopt when the cell has no averaging window.
std::optional<std::uint32_t> detection_alpha_limit(const Scenario& s, std::uint32_t range_bin,
                                                   std::uint32_t doppler_bin);

const std::vector<std::string>& builtin_scene_names();
/// Throws std::out_of_range for an unknown name.
SceneSpec builtin_scene(const std::string& name);

}  // namespace dspkat
