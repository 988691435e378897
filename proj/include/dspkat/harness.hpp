#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dspkat/chain_config.hpp"
#include "dspkat/device.hpp"
#include "dspkat/dsp_chain.hpp"
#include "dspkat/mem_image.hpp"
#include "dspkat/rng.hpp"
#include "dspkat/scenario.hpp"
#include "dspkat/tolerance.hpp"

namespace dspkat::harness {

enum class Access { kFrontdoor, kBackdoor };
std::string_view to_string(Access a);
std::optional<Access> parse_access(std::string_view s);

enum class Feature { kMotion, kAcquire, kAngle };
std::string_view to_string(Feature f);
std::optional<Feature> parse_feature(std::string_view s);

/// Named single-step datapath bug ("mti_reversed", ...).
std::optional<dsp::Faults> parse_fault(std::string_view name);
const std::vector<std::string>& fault_names();

struct Mismatch {
  std::string location;  // address, target cell or register
  std::string kind;      // value, unwritten, missing, unexpected, count, order, ...
  std::int64_t expected = 0;
  std::int64_t actual = 0;
  std::int64_t delta = 0;
  friend bool operator==(const Mismatch&, const Mismatch&) = default;
};

enum class Verdict { kPass, kFail, kSkip };
std::string_view to_string(Verdict v);

struct KatReport {
  std::string test;      // step_kat, full_kat, feature, use_case
  std::string scenario;
  std::string step;      // step name or feature name
  std::string access;
  Verdict verdict = Verdict::kPass;
  std::string skip_reason;
  std::vector<Mismatch> mismatches;
  std::vector<std::string> warnings;  // tie-ambiguous orderings and similar
  std::vector<std::string> notes;
  std::uint64_t cycles = 0;
  std::uint64_t expected_cycles = 0;
  std::uint32_t iterations = 0;  // feature tests
  double wall_time_s = 0.0;

  bool passed() const { return verdict == Verdict::kPass; }
  /// Sets verdict from the mismatch list (skip is preserved).
  void finalize();
};

/// Per expected address: mismatch when the signed difference exceeds
/// `tol_lsb` or the actual cell is unwritten. Extra actual cells are ignored.
std::vector<Mismatch> compare_mem(const MemoryImage& actual, const MemoryImage& expected, std::uint32_t tol_lsb);

struct TargetComparison {
  std::vector<Mismatch> mismatches;
  std::vector<std::string> warnings;
};

/// Matches targets by cell, checks magnitude, phases (wrapped) and
/// direction. Order swaps between near-equal expected magnitudes are
/// warnings; other order differences fail.
TargetComparison compare_targets(const std::vector<dsp::Target>& actual, const std::vector<dsp::AngleResult>& actual_angles,
                                 const std::vector<ExpectedTarget>& expected, bool check_angles,
                                 const ToleranceTable& tol);

/// Expected targets as the quantized reference model predicts them.
std::vector<ExpectedTarget> model_expectations(const MemoryImage& adc, const ChainConfig& cfg);

struct RunOptions {
  dsp::Faults faults;
};

KatReport run_step_kat(const Scenario& s, Step step, Access access, const RunOptions& opt = {});
KatReport run_full_kat(const Scenario& s, Access access, const RunOptions& opt = {});
KatReport run_feature_test(Feature f, const Scenario& s, std::uint64_t seed, std::uint32_t count,
                           const RunOptions& opt = {});

/// Hard-coded application use case: full chain under `cfg`, compared
/// against externally supplied targets. Angles are compared only when
/// `check_angles` is set and R = 3.
KatReport run_use_case(const std::string& name, const Scenario& s, const ChainConfig& cfg,
                       const std::vector<ExpectedTarget>& expected, const RunOptions& opt = {},
                       bool check_angles = true);

/// Draw of one feature-test configuration (exposed for determinism tests).
ChainConfig draw_feature_config(Feature f, const ChainConfig& base, Rng& rng);

// ---------- regression ----------

struct TestSpec {
  std::string type;  // step_kat | full_kat | feature | use_case
  std::vector<Step> steps;
  std::vector<Access> access;
  std::vector<Feature> features;
  std::uint32_t count = 100;
  std::vector<std::string> scenarios;  // empty: suite scenarios
  // use_case only
  std::string name;
  nlohmann::json config_overrides = nlohmann::json::object();
  std::vector<ExpectedTarget> expected_targets;
  bool check_angles = true;  // false when any expected target omits its phases
};

struct SuiteSpec {
  std::string name = "default";
  std::vector<std::string> scenarios;  // empty: every available scenario
  std::vector<TestSpec> tests;
};

/// Every step KAT in both access modes, full KATs, and 100 draws per
/// feature on "multi".
SuiteSpec default_suite();
SuiteSpec suite_from_json(const nlohmann::json& j);
SuiteSpec load_suite_file(const std::string& path);

struct RegressionOptions {
  std::uint64_t seed = 1;
  std::optional<std::string> scenario;  // select_scenario filter
  unsigned jobs = 0;                    // 0: hardware concurrency
  RunOptions run;
};

struct RegressionSummary {
  std::string suite;
  std::uint64_t seed = 0;
  std::string scenario_filter;
  std::vector<KatReport> reports;
  double wall_time_s = 0.0;

  std::size_t count(Verdict v) const;
  std::size_t warning_count() const;
  int exit_code() const { return count(Verdict::kFail) == 0 ? 0 : 1; }
};

RegressionSummary run_regression(const SuiteSpec& suite, const std::vector<Scenario>& available,
                                 const RegressionOptions& opt);

nlohmann::json report_to_json(const KatReport& r);
/// `timing` adds the wall-clock fields and generation timestamp.
nlohmann::json summary_to_json(const RegressionSummary& s, bool timing = true);

/// Built-in scenarios, generated in memory.
std::vector<Scenario> builtin_scenarios();

}  // namespace dspkat::harness
