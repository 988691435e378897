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
#include "dspkat/mem_image.hpp"
#include "dspkat/tolerance.hpp"

namespace dspkat {

/// Load or save failure naming the offending file and, where it applies,
/// the manifest field.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string file, std::string field, const std::string& detail);
  const std::string& file() const { return file_; }
  const std::string& field() const { return field_; }

 private:
  std::string file_;
  std::string field_;
};

struct ExpectedTarget {
  std::uint32_t range_bin = 0;
  std::uint32_t doppler_bin = 0;
  std::int32_t magnitude_raw = 0;  // Q0.23
  std::int32_t az_phase_raw = 0;   // Q2.21, meaningful only when R = 3
  std::int32_t el_phase_raw = 0;
  Direction direction = Direction::kStatic;
  friend bool operator==(const ExpectedTarget&, const ExpectedTarget&) = default;
};

struct Scenario {
  std::string name;
  std::string description;
  ChainConfig config;
  std::vector<MemoryImage> adc;  // one image per RX channel, absolute addresses
  std::optional<MemoryImage> mti;
  std::optional<MemoryImage> rfft;
  std::optional<MemoryImage> cfft;
  std::vector<ExpectedTarget> expected_targets;
  ToleranceTable tolerances;
  double separation_margin_db = 6.0;
  /// Generator provenance (prng, seed, scene echo) and any other manifest
  /// keys; carried through load/save untouched.
  nlohmann::json extra = nlohmann::json::object();

  /// All ADC channels in one image.
  MemoryImage adc_image() const;
  /// Expected image of a memory step, or nullptr when the file set lacks it.
  const MemoryImage* expected_image(Step s) const;
  std::vector<dsp::Target> targets() const;
  std::vector<dsp::AngleResult> angles() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

nlohmann::json config_to_json(const ChainConfig& cfg);
/// Missing keys keep the reset defaults. Throws ScenarioError on bad values.
ChainConfig config_from_json(const nlohmann::json& j, const std::string& file = "manifest.json");

nlohmann::json expected_target_to_json(const ExpectedTarget& t);
/// `cfg` supplies the default direction when the field is absent.
ExpectedTarget expected_target_from_json(const nlohmann::json& j, const ChainConfig& cfg,
                                         const std::string& file = "manifest.json", const std::string& path = "");

std::string adc_file_name(std::uint32_t channel);

/// Reads `dir/manifest.json` and every file it references.
Scenario load_scenario(const std::filesystem::path& dir);
/// Writes the manifest and file set; creates `dir` if needed.
void save_scenario(const Scenario& s, const std::filesystem::path& dir);

/// Loads every subdirectory of `root` holding a manifest, sorted by name.
std::vector<Scenario> load_scenario_set(const std::filesystem::path& root);

/// Exact name match wins; otherwise a seeded uniform choice.
std::size_t select_scenario_index(const std::string& requested, const std::vector<std::string>& available,
                                  std::uint64_t seed);
const Scenario& select_scenario(const std::string& requested, const std::vector<Scenario>& available,
                                std::uint64_t seed);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Consistency of images with the config plus separation margins.
ValidationReport validate_scenario(const Scenario& s);
/// As above, but load failures are reported rather than thrown.
ValidationReport validate_scenario_dir(const std::filesystem::path& dir);

}  // namespace dspkat
