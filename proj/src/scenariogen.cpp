#include "dspkat/scenariogen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dspkat/chain_io.hpp"
#include "dspkat/fixed_point.hpp"
#include "dspkat/ref_model.hpp"
#include "dspkat/rng.hpp"

namespace dspkat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kAdcFullScale = 2048.0;

std::uint32_t nearest_bin(double bin, std::uint32_t count) {
  const auto b = static_cast<std::int64_t>(std::llround(bin));
  const auto c = static_cast<std::int64_t>(count);
  return static_cast<std::uint32_t>(((b % c) + c) % c);
}

double ratio_db(double a, double b) { return 20.0 * std::log10(a / b); }

std::string fmt_db(double db) {
  std::ostringstream os;
  os.precision(3);
  os << std::fixed << db;
  return os.str();
}

template <typename T>
T scene_field(const json& j, const char* key, T fallback, const std::string& file, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ScenarioError(file, path + key, e.what());
  }
}

}  // namespace

json scene_to_json(const SceneSpec& spec) {
  json targets = json::array();
  for (const auto& t : spec.targets)
    targets.push_back({{"range_bin", t.range_bin},
                       {"doppler_bin", t.doppler_bin},
                       {"amplitude", t.amplitude},
                       {"az_phase", t.az_phase},
                       {"el_phase", t.el_phase}});
  return json{{"name", spec.name},
              {"description", spec.description},
              {"config", config_to_json(spec.config)},
              {"targets", targets},
              {"noise_rms", spec.noise_rms},
              {"seed", spec.seed},
              {"separation_margin_db", spec.separation_margin_db}};
}

SceneSpec scene_from_json(const json& j, const std::string& file) {
  if (!j.is_object()) throw ScenarioError(file, "", "scene spec must be a JSON object");
  SceneSpec s;
  s.name = scene_field<std::string>(j, "name", "scene", file, "");
  s.description = scene_field<std::string>(j, "description", "", file, "");
  if (j.contains("config")) s.config = config_from_json(j.at("config"), file);
  s.noise_rms = scene_field<double>(j, "noise_rms", 0.0, file, "");
  s.seed = scene_field<std::uint64_t>(j, "seed", 1, file, "");
  s.separation_margin_db = scene_field<double>(j, "separation_margin_db", 6.0, file, "");
  if (j.contains("targets")) {
    const json& arr = j.at("targets");
    if (!arr.is_array()) throw ScenarioError(file, "targets", "must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "targets[" + std::to_string(i) + "].";
      if (!arr[i].contains("amplitude")) throw ScenarioError(file, path + "amplitude", "missing");
      SceneTarget t;
      t.range_bin = scene_field<double>(arr[i], "range_bin", 0.0, file, path);
      t.doppler_bin = scene_field<double>(arr[i], "doppler_bin", 0.0, file, path);
      t.amplitude = scene_field<double>(arr[i], "amplitude", 0.0, file, path);
      t.az_phase = scene_field<double>(arr[i], "az_phase", 0.0, file, path);
      t.el_phase = scene_field<double>(arr[i], "el_phase", 0.0, file, path);
      s.targets.push_back(t);
    }
  }
  return s;
}

SceneSpec load_scene_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), "", "cannot open scene spec");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ScenarioError(path.string(), "", e.what());
  }
  return scene_from_json(j, path.string());
}

std::vector<std::string> spec_violations(const SceneSpec& spec) {
  std::vector<std::string> out = config_violations(spec.config);
  if (!(spec.noise_rms >= 0.0)) out.push_back("noise_rms must be >= 0");
  for (std::size_t i = 0; i < spec.targets.size(); ++i) {
    const auto& t = spec.targets[i];
    const std::string id = "target " + std::to_string(i);
    if (!(t.amplitude > 0.0 && t.amplitude <= 1.0)) out.push_back(id + ": amplitude must be in (0, 1]");
    if (!(t.range_bin >= 0.0 && t.range_bin < spec.config.range_bins()))
      out.push_back(id + ": range_bin outside [0, N/2)");
    if (!(t.doppler_bin >= 0.0 && t.doppler_bin < spec.config.doppler_bins()))
      out.push_back(id + ": doppler_bin outside [0, M-1)");
  }
  return out;
}

dsp::BurstSet synthesize_adc(const SceneSpec& spec) {
  const ChainConfig& c = spec.config;
  validate_config(c);
  dsp::BurstSet out(c.channels, c.bursts, c.samples);
  Rng rng(spec.seed);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::uint32_t r = 0; r < c.channels; ++r)
    for (std::uint32_t m = 0; m < c.bursts; ++m)
      for (std::uint32_t n = 0; n < c.samples; ++n) {
        double v = 0.0;
        for (const SceneTarget& t : spec.targets) {
          const double phi = r == 0 ? 0.0 : (r == 1 ? t.az_phase : t.el_phase);
          v += t.amplitude *
               std::cos(two_pi * t.range_bin * n / c.samples + two_pi * t.doppler_bin * m / c.doppler_bins() + phi);
        }
        if (spec.noise_rms > 0.0) v += spec.noise_rms * rng.normal();
        out.at(r, m, n) = quantize(v * kAdcFullScale, kQ12_4).raw;
      }
  return out;
}

SeparationReport check_separation(const SceneSpec& spec, const ChainConfig& cfg) {
  SeparationReport rep;
  SceneSpec s = spec;
  s.config = cfg;
  rep.violations = spec_violations(s);
  if (!rep.ok()) return rep;
  const double margin = spec.separation_margin_db;

  for (std::size_t i = 0; i < s.targets.size(); ++i)
    for (std::size_t j = i + 1; j < s.targets.size(); ++j) {
      const double db = std::abs(ratio_db(s.targets[i].amplitude, s.targets[j].amplitude));
      if (db < margin)
        rep.violations.push_back("targets " + std::to_string(i) + " and " + std::to_string(j) + " amplitudes are " +
                                 fmt_db(db) + " dB apart");
    }

  // Doppler bin 0 reflectors are clutter: never CFAR candidates.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> cells;
  for (const auto& t : s.targets)
    cells.emplace_back(nearest_bin(t.range_bin, cfg.range_bins()), nearest_bin(t.doppler_bin, cfg.doppler_bins()));
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j)
      if (cells[i] == cells[j])
        rep.violations.push_back("targets " + std::to_string(i) + " and " + std::to_string(j) + " share a cell");

  const ref::ModelConfig mc{cfg, false};
  const auto model = ref::run_chain(ref::to_model(synthesize_adc(s)), mc);
  const auto stats = ref::cfar_cell_statistics(model.cfft, mc);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto [k, d] = cells[i];
    if (d == 0) continue;
    const auto& st = stats[(d - 1) * cfg.range_bins() + k];
    if (!st.has_window) {
      rep.violations.push_back("target " + std::to_string(i) + ": cell has no CFAR window");
      continue;
    }
    const double db = ratio_db(st.magnitude, st.threshold);
    if (std::abs(db) < margin)
      rep.violations.push_back("target " + std::to_string(i) + " is " + fmt_db(db) + " dB from its CFAR threshold");
  }

  // Detections the scene does not ask for, e.g. noise peaks or ADC rounding spurs.
  const auto generated = ref::run_chain(ref::to_model(synthesize_adc(s)), {cfg, true});
  std::size_t spurious = 0;
  std::string first;
  for (const auto& t : generated.targets) {
    if (std::find(cells.begin(), cells.end(), std::pair{t.range_bin, t.doppler_bin}) != cells.end()) continue;
    if (spurious++ == 0) first = "(" + std::to_string(t.range_bin) + ", " + std::to_string(t.doppler_bin) + ")";
  }
  if (spurious > 0)
    rep.violations.push_back(std::to_string(spurious) + " detection(s) at non-target cells, first at " + first);
  return rep;
}

SeparationError::SeparationError(const SeparationReport& rep)
    : std::runtime_error([&] {
        std::string msg = "scene violates separation margins:";
        for (const auto& v : rep.violations) msg += " " + v + ";";
        return msg;
      }()),
      violations_(rep.violations) {}

std::vector<ExpectedTarget> expected_from_model(const ref::ChainResult& model, const ChainConfig& cfg) {
  std::vector<ExpectedTarget> out;
  for (std::size_t i = 0; i < model.targets.size(); ++i) {
    const auto& t = model.targets[i];
    ExpectedTarget e;
    e.range_bin = t.range_bin;
    e.doppler_bin = t.doppler_bin;
    e.magnitude_raw = ref::magnitude_raw(t.magnitude);
    e.direction = direction_for(t.doppler_bin, cfg);
    if (i < model.angles.size()) {
      e.az_phase_raw = ref::phase_raw(model.angles[i].az_phase);
      e.el_phase_raw = ref::phase_raw(model.angles[i].el_phase);
    }
    out.push_back(e);
  }
  return out;
}

Scenario build_scenario(const SceneSpec& spec) {
  const auto problems = spec_violations(spec);
  if (!problems.empty()) throw ConfigError("invalid scene spec: " + problems.front());
  const ChainConfig& cfg = spec.config;
  const dsp::BurstSet adc = synthesize_adc(spec);
  const ref::ModelConfig mc{cfg, true};
  const auto model = ref::run_chain(ref::to_model(adc), mc);

  Scenario s;
  s.name = spec.name;
  s.description = spec.description;
  s.config = cfg;
  s.separation_margin_db = spec.separation_margin_db;
  s.adc = dsp::split_adc_channels(dsp::bursts_to_image(adc, Step::kAdc, cfg), cfg);
  s.mti = dsp::bursts_to_image(ref::to_raw_bursts(model.mti), Step::kMti, cfg);
  s.rfft = dsp::spectrum_to_image(ref::to_raw_spectrum(model.rfft), Step::kRfft, cfg);
  s.cfft = dsp::spectrum_to_image(ref::to_raw_spectrum(model.cfft), Step::kCfft, cfg);
  s.expected_targets = expected_from_model(model, cfg);

  s.extra["prng"] = Rng::kAlgorithm;
  s.extra["seed"] = spec.seed;
  s.extra["scene"] = scene_to_json(spec);
  json limits = json::array();
  for (const auto& e : s.expected_targets) {
    const auto lim = detection_alpha_limit(s, e.range_bin, e.doppler_bin);
    limits.push_back(lim ? json(*lim) : json(nullptr));
  }
  // Model-predicted: each expected target is detected only for alpha below this.
  s.extra["alpha_limit_raw"] = limits;
  return s;
}

Scenario generate_scenario(const SceneSpec& spec, const fs::path& dir, bool force) {
  if (!force) {
    const auto rep = check_separation(spec, spec.config);
    if (!rep.ok()) throw SeparationError(rep);
  }
  Scenario s = build_scenario(spec);
  save_scenario(s, dir);
  return s;
}

std::optional<std::uint32_t> detection_alpha_limit(const Scenario& s, std::uint32_t range_bin,
                                                   std::uint32_t doppler_bin) {
  if (!s.cfft || doppler_bin == 0) return std::nullopt;
  const auto maps = ref::to_model(dsp::image_to_spectrum(*s.cfft, Step::kCfft, s.config));
  ChainConfig probe = s.config;
  probe.cfar_alpha_raw = 256;  // threshold == window mean
  const auto stats = ref::cfar_cell_statistics(maps, {probe, true});
  const auto& st = stats[(doppler_bin - 1) * s.config.range_bins() + range_bin];
  if (!st.has_window || st.threshold <= 0.0) return std::nullopt;
  // Detected while alpha * mean < magnitude.
  auto a = static_cast<std::uint32_t>(std::ceil(256.0 * st.magnitude / st.threshold));
  while (a > 0 && (a - 1) / 256.0 * st.threshold >= st.magnitude) --a;
  while (a / 256.0 * st.threshold < st.magnitude) ++a;
  return a;
}

const std::vector<std::string>& builtin_scene_names() {
  static const std::vector<std::string> names = {"single", "multi", "noise"};
  return names;
}

SceneSpec builtin_scene(const std::string& name) {
  SceneSpec s;
  s.name = name;
  s.config.window = Window::kNone;
  if (name == "single") {
    s.description = "Strong single target: one approaching reflector well above a low noise floor.";
    s.targets = {{10.0, 4.0, 0.4, 0.5, -0.3}};
    s.noise_rms = 0.002;
    s.seed = 1;
  } else if (name == "multi") {
    s.description =
        "Multiple targets with different characteristics: static, receding and approaching reflectors at distinct "
        "ranges, amplitudes and arrival angles.";
    s.targets = {
        {5.0, 8.0, 0.064, 0.3, -0.2},
        {14.0, 12.0, 0.185, -0.9, 0.6},
        {24.0, 3.0, 0.48, 1.7, -2.4},
    };
    s.noise_rms = 0.002;
    s.seed = 2;
  } else if (name == "noise") {
    s.description =
        "High-noise environment: a weak receding target in strong receiver noise plus static clutter that MTI "
        "removes.";
    s.targets = {
        {7.0, 0.0, 0.3, 0.0, 0.0},
        {19.0, 10.0, 0.0145, 0.8, 1.1},
    };
    s.noise_rms = 0.03;
    s.seed = 3;
  } else {
    throw std::out_of_range("unknown built-in scene '" + name + "'");
  }
  return s;
}

}  // namespace dspkat
