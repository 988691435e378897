// dspkat: scenario generation, known-answer tests and regression runs
// against the DSP device model.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "dspkat/device.hpp"
#include "dspkat/harness.hpp"
#include "dspkat/mem_image.hpp"
#include "dspkat/scenario.hpp"
#include "dspkat/scenariogen.hpp"

namespace fs = std::filesystem;
using namespace dspkat;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

std::vector<Scenario> scenario_set(const std::string& dir) {
  if (dir.empty()) return harness::builtin_scenarios();
  auto set = load_scenario_set(dir);
  if (set.empty()) throw ScenarioError(dir, "", "no scenario directories found");
  return set;
}

void print_report(const harness::KatReport& r) {
  std::printf("%-4s %-9s %-8s %-8s %-9s", std::string(to_string(r.verdict)).c_str(), r.test.c_str(),
              r.scenario.c_str(), r.step.c_str(), r.access.c_str());
  if (r.verdict == harness::Verdict::kSkip) {
    std::printf(" (%s)\n", r.skip_reason.c_str());
    return;
  }
  std::printf(" mismatches=%zu warnings=%zu cycles=%llu\n", r.mismatches.size(), r.warnings.size(),
              static_cast<unsigned long long>(r.cycles));
  const std::size_t shown = std::min<std::size_t>(r.mismatches.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& m = r.mismatches[i];
    std::printf("    %s %s expected=%lld actual=%lld delta=%lld\n", m.location.c_str(), m.kind.c_str(),
                static_cast<long long>(m.expected), static_cast<long long>(m.actual), static_cast<long long>(m.delta));
  }
  if (r.mismatches.size() > shown) std::printf("    ... %zu more\n", r.mismatches.size() - shown);
  for (const auto& w : r.warnings) std::printf("    warning: %s\n", w.c_str());
}

dsp::Faults faults_from(const std::string& name) {
  const auto f = harness::parse_fault(name);
  if (!f) throw CLI::ValidationError("--inject", "unknown fault '" + name + "'");
  return *f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Known-answer test harness for the radar DSP device model"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a scenario file set from a scene spec");
  std::string spec_path, builtin, out_dir;
  bool force = false;
  auto* spec_opt = gen->add_option("--spec", spec_path, "Scene spec JSON")->check(CLI::ExistingFile);
  gen->add_option("--builtin", builtin, "Built-in scene name, or 'all'")->excludes(spec_opt);
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_flag("--force", force, "Write even when separation margins are violated");

  // run-kat
  auto* kat = app.add_subcommand("run-kat", "Run one step or full-chain known-answer test");
  std::string scenario_name, step_name = "full", access_name = "backdoor", scenarios_dir, inject = "none";
  std::uint64_t seed = 1;
  kat->add_option("--scenario", scenario_name, "Scenario name; empty or unknown picks one at random from the seed");
  kat->add_option("--step", step_name, "mti|rfft|cfft|cfar|ae|full")
      ->check(CLI::IsMember({"mti", "rfft", "cfft", "cfar", "ae", "full"}));
  kat->add_option("--access", access_name, "frontdoor|backdoor")->check(CLI::IsMember({"frontdoor", "backdoor"}));
  kat->add_option("--seed", seed, "Selection seed");
  kat->add_option("--scenarios", scenarios_dir, "Directory of scenario subdirectories (default: built-ins)");
  kat->add_option("--inject", inject, "Datapath fault to inject");

  // regress
  auto* reg = app.add_subcommand("regress", "Run a regression suite");
  std::string suite_path, report_path;
  unsigned jobs = 0;
  std::optional<std::string> reg_scenario;
  reg->add_option("--suite", suite_path, "Suite spec JSON (default: built-in suite)")->check(CLI::ExistingFile);
  reg->add_option("--scenario", reg_scenario, "Restrict to one scenario (select_scenario semantics)");
  reg->add_option("--seed", seed, "Seed for selection and feature tests");
  reg->add_option("--report", report_path, "Write the JSON report here");
  reg->add_option("--jobs", jobs, "Worker threads (0: all cores)");
  reg->add_option("--scenarios", scenarios_dir, "Directory of scenario subdirectories (default: built-ins)");
  reg->add_option("--inject", inject, "Datapath fault to inject");

  // diff-mem
  auto* diff = app.add_subcommand("diff-mem", "Compare two memh images");
  std::string file_a, file_b;
  int bits = 24;
  std::uint32_t tol = 0;
  diff->add_option("a", file_a, "Actual image")->required()->check(CLI::ExistingFile);
  diff->add_option("b", file_b, "Expected image")->required()->check(CLI::ExistingFile);
  diff->add_option("--bits", bits, "Word width")->check(CLI::IsMember({16, 24}));
  diff->add_option("--tol-lsb", tol, "Tolerance in LSB");

  // regmap / validate
  auto* regmap = app.add_subcommand("regmap", "Print the register and memory address map");
  std::string regmap_out;
  regmap->add_option("--out", regmap_out, "Write to a file instead of stdout");
  auto* validate = app.add_subcommand("validate", "Validate a scenario directory");
  std::string validate_dir;
  validate->add_option("dir", validate_dir, "Scenario directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      if (spec_path.empty() && builtin.empty()) {
        std::cerr << "gen: one of --spec or --builtin is required\n";
        return kExitUsage;
      }
      std::vector<std::pair<SceneSpec, fs::path>> work;
      if (!spec_path.empty()) {
        work.emplace_back(load_scene_file(spec_path), out_dir);
      } else if (builtin == "all") {
        for (const auto& n : builtin_scene_names()) work.emplace_back(builtin_scene(n), fs::path(out_dir) / n);
      } else {
        work.emplace_back(builtin_scene(builtin), out_dir);
      }
      for (const auto& [spec, dir] : work) {
        const Scenario s = generate_scenario(spec, dir, force);
        std::printf("%s: %zu expected targets -> %s\n", s.name.c_str(), s.expected_targets.size(), dir.c_str());
      }
      return kExitPass;
    }

    if (kat->parsed()) {
      const auto set = scenario_set(scenarios_dir);
      const Scenario& s = select_scenario(scenario_name, set, seed);
      std::printf("SCENARIO=%s\n", s.name.c_str());
      const harness::RunOptions opt{faults_from(inject)};
      const auto access = *harness::parse_access(access_name);
      const harness::KatReport r = step_name == "full"
                                       ? harness::run_full_kat(s, access, opt)
                                       : harness::run_step_kat(s, *parse_step(step_name), access, opt);
      print_report(r);
      return r.verdict == harness::Verdict::kFail ? kExitFail : kExitPass;
    }

    if (reg->parsed()) {
      const auto set = scenario_set(scenarios_dir);
      const harness::SuiteSpec suite = suite_path.empty() ? harness::default_suite() : harness::load_suite_file(suite_path);
      harness::RegressionOptions opt;
      opt.seed = seed;
      opt.scenario = reg_scenario;
      opt.jobs = jobs;
      opt.run.faults = faults_from(inject);
      const auto sum = harness::run_regression(suite, set, opt);
      for (const auto& r : sum.reports) print_report(r);
      std::printf("total=%zu passed=%zu failed=%zu skipped=%zu warnings=%zu\n", sum.reports.size(),
                  sum.count(harness::Verdict::kPass), sum.count(harness::Verdict::kFail),
                  sum.count(harness::Verdict::kSkip), sum.warning_count());
      if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw ScenarioError(report_path, "", "cannot write report");
        out << harness::summary_to_json(sum).dump(2) << '\n';
      }
      return sum.exit_code();
    }

    if (diff->parsed()) {
      const MemoryImage a = read_memh_file(file_a, bits);
      const MemoryImage b = read_memh_file(file_b, bits);
      const auto ms = harness::compare_mem(a, b, tol);
      for (const auto& m : ms)
        std::printf("%s %s expected=%lld actual=%lld delta=%lld\n", m.location.c_str(), m.kind.c_str(),
                    static_cast<long long>(m.expected), static_cast<long long>(m.actual),
                    static_cast<long long>(m.delta));
      std::printf("%zu mismatches\n", ms.size());
      return ms.empty() ? kExitPass : kExitFail;
    }

    if (regmap->parsed()) {
      const std::string doc = device::address_map_document();
      if (regmap_out.empty()) {
        std::cout << doc;
      } else {
        std::ofstream out(regmap_out);
        out << doc;
      }
      return kExitPass;
    }

    if (validate->parsed()) {
      const auto rep = validate_scenario_dir(validate_dir);
      for (const auto& v : rep.violations) std::printf("violation: %s\n", v.c_str());
      std::printf("%s\n", rep.ok() ? "ok" : "invalid");
      return rep.ok() ? kExitPass : kExitFail;
    }
  } catch (const SeparationError& e) {
    std::cerr << "error: " << e.what() << "\n(use --force to write anyway)\n";
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
