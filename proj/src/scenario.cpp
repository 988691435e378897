#include "dspkat/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dspkat/chain_io.hpp"
#include "dspkat/memory_map.hpp"
#include "dspkat/rng.hpp"
#include "dspkat/scenariogen.hpp"

namespace dspkat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";

// Manifest keys with a dedicated Scenario member; everything else is extra.
constexpr const char* kKnownKeys[] = {"name",          "description", "config",    "files",
                                      "expected_targets", "tolerances", "separation_margin_db"};

template <typename T>
T get_field(const json& obj, const char* key, const std::string& file, const std::string& path) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ScenarioError(file, path + key, e.what());
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& file, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return get_field<T>(obj, key, file, path);
}

// Layout check shared by load (throwing) and validate (reporting).
std::vector<std::string> layout_problems(const MemoryImage& img, const RegionLayout& layout, const std::string& what) {
  std::vector<std::string> out;
  if (img.word_bits() != layout.word_bits()) {
    out.push_back(what + ": word width " + std::to_string(img.word_bits()) + " does not match " +
                  std::to_string(layout.word_bits()));
    return out;
  }
  const auto missing = missing_addresses(img, layout);
  if (!missing.empty()) {
    std::ostringstream os;
    os << what << ": " << missing.size() << " of " << layout.extent << " words missing for the configured dimensions";
    out.push_back(os.str());
  }
  std::size_t outside = 0;
  for (const auto& [addr, word] : img.cells())
    if (!layout.contains(addr)) ++outside;
  if (outside > 0)
    out.push_back(what + ": " + std::to_string(outside) + " words outside the region for the configured dimensions");
  return out;
}

std::vector<std::string> image_problems(const Scenario& s) {
  std::vector<std::string> out;
  auto add = [&](const std::vector<std::string>& v) { out.insert(out.end(), v.begin(), v.end()); };
  if (s.adc.size() != s.config.channels)
    out.push_back("manifest.json: expected " + std::to_string(s.config.channels) + " ADC files, found " + std::to_string(s.adc.size()));
  for (std::uint32_t r = 0; r < s.adc.size() && r < s.config.channels; ++r)
    add(layout_problems(s.adc[r], adc_channel_layout(s.config, r), adc_file_name(r)));
  if (s.mti) add(layout_problems(*s.mti, region_for(Step::kMti, s.config), "mti.memh"));
  if (s.rfft) add(layout_problems(*s.rfft, region_for(Step::kRfft, s.config), "rfft.memh"));
  if (s.cfft) add(layout_problems(*s.cfft, region_for(Step::kCfft, s.config), "cfft.memh"));
  for (std::size_t i = 0; i < s.expected_targets.size(); ++i) {
    const auto& t = s.expected_targets[i];
    if (t.range_bin >= s.config.range_bins() || t.doppler_bin >= s.config.doppler_bins())
      out.push_back("manifest.json: expected_targets[" + std::to_string(i) + "] bin outside the range-Doppler map");
  }
  if (s.expected_targets.size() > s.config.max_targets)
    out.push_back("manifest.json: more expected targets than max_targets");
  return out;
}

MemoryImage load_image(const fs::path& dir, const std::string& name, int bits) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) throw ScenarioError(p.string(), "files", "referenced file does not exist");
  try {
    return read_memh_file(p.string(), bits);
  } catch (const MemhParseError& e) {
    throw ScenarioError(p.string(), "", e.what());
  } catch (const std::runtime_error& e) {
    throw ScenarioError(p.string(), "", e.what());
  }
}

std::optional<std::string> optional_name(const json& files, const char* key, const std::string& file) {
  if (!files.contains(key) || files.at(key).is_null()) return std::nullopt;
  return get_field<std::string>(files, key, file, "files.");
}

}  // namespace

ScenarioError::ScenarioError(std::string file, std::string field, const std::string& detail)
    : std::runtime_error(file + (field.empty() ? "" : " [" + field + "]") + ": " + detail),
      file_(std::move(file)),
      field_(std::move(field)) {}

MemoryImage Scenario::adc_image() const {
  MemoryImage all(16);
  for (const auto& img : adc) all.merge(img);
  return all;
}

const MemoryImage* Scenario::expected_image(Step s) const {
  switch (s) {
    case Step::kAdc: return nullptr;
    case Step::kMti: return mti ? &*mti : nullptr;
    case Step::kRfft: return rfft ? &*rfft : nullptr;
    case Step::kCfft: return cfft ? &*cfft : nullptr;
    default: return nullptr;
  }
}

std::vector<dsp::Target> Scenario::targets() const {
  std::vector<dsp::Target> out;
  for (const auto& t : expected_targets) out.push_back({t.range_bin, t.doppler_bin, t.magnitude_raw});
  return out;
}

std::vector<dsp::AngleResult> Scenario::angles() const {
  std::vector<dsp::AngleResult> out;
  if (config.channels < 3) return out;
  for (const auto& t : expected_targets)
    out.push_back({t.range_bin, t.doppler_bin, t.az_phase_raw, t.el_phase_raw, t.direction});
  return out;
}

json config_to_json(const ChainConfig& c) {
  return json{{"N", c.samples},
              {"M", c.bursts},
              {"R", c.channels},
              {"mti_enabled", c.mti_enabled},
              {"window_sel", std::string(to_string(c.window))},
              {"cfar_alpha_raw", c.cfar_alpha_raw},
              {"cfar_guard", c.cfar_guard},
              {"cfar_window", c.cfar_window},
              {"max_targets", c.max_targets},
              {"consec_hits", c.consec_hits}};
}

ChainConfig config_from_json(const json& j, const std::string& file) {
  if (!j.is_object()) throw ScenarioError(file, "config", "must be an object");
  ChainConfig c;
  c.samples = get_or<std::uint32_t>(j, "N", c.samples, file, "config.");
  c.bursts = get_or<std::uint32_t>(j, "M", c.bursts, file, "config.");
  c.channels = get_or<std::uint32_t>(j, "R", c.channels, file, "config.");
  c.mti_enabled = get_or<bool>(j, "mti_enabled", c.mti_enabled, file, "config.");
  if (j.contains("window_sel")) {
    const auto name = get_field<std::string>(j, "window_sel", file, "config.");
    const auto w = parse_window(name);
    if (!w) throw ScenarioError(file, "config.window_sel", "unknown window '" + name + "'");
    c.window = *w;
  }
  const auto alpha = get_or<std::uint32_t>(j, "cfar_alpha_raw", c.cfar_alpha_raw, file, "config.");
  if (alpha > 0xFFFF) throw ScenarioError(file, "config.cfar_alpha_raw", "does not fit Q8.8");
  c.cfar_alpha_raw = static_cast<std::uint16_t>(alpha);
  c.cfar_guard = get_or<std::uint32_t>(j, "cfar_guard", c.cfar_guard, file, "config.");
  c.cfar_window = get_or<std::uint32_t>(j, "cfar_window", c.cfar_window, file, "config.");
  c.max_targets = get_or<std::uint32_t>(j, "max_targets", c.max_targets, file, "config.");
  c.consec_hits = get_or<std::uint32_t>(j, "consec_hits", c.consec_hits, file, "config.");
  const auto problems = config_violations(c);
  if (!problems.empty()) throw ScenarioError(file, "config", problems.front());
  return c;
}

json expected_target_to_json(const ExpectedTarget& t) {
  return json{{"range_bin", t.range_bin},
              {"doppler_bin", t.doppler_bin},
              {"magnitude_raw", t.magnitude_raw},
              {"az_phase_raw", t.az_phase_raw},
              {"el_phase_raw", t.el_phase_raw},
              {"direction", std::string(to_string(t.direction))}};
}

ExpectedTarget expected_target_from_json(const json& e, const ChainConfig& cfg, const std::string& file,
                                         const std::string& path) {
  if (!e.is_object()) throw ScenarioError(file, path, "target must be an object");
  ExpectedTarget t;
  t.range_bin = get_field<std::uint32_t>(e, "range_bin", file, path);
  t.doppler_bin = get_field<std::uint32_t>(e, "doppler_bin", file, path);
  t.magnitude_raw = get_field<std::int32_t>(e, "magnitude_raw", file, path);
  t.az_phase_raw = get_or<std::int32_t>(e, "az_phase_raw", 0, file, path);
  t.el_phase_raw = get_or<std::int32_t>(e, "el_phase_raw", 0, file, path);
  const auto dname =
      get_or<std::string>(e, "direction", std::string(to_string(direction_for(t.doppler_bin, cfg))), file, path);
  const auto d = parse_direction(dname);
  if (!d) throw ScenarioError(file, path + "direction", "unknown direction '" + dname + "'");
  t.direction = *d;
  return t;
}

std::string adc_file_name(std::uint32_t channel) { return "adc_rx" + std::to_string(channel) + ".memh"; }

Scenario load_scenario(const fs::path& dir) {
  const fs::path mpath = dir / kManifest;
  const std::string mfile = mpath.string();
  std::ifstream in(mpath);
  if (!in) throw ScenarioError(mfile, "", "cannot open manifest");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ScenarioError(mfile, "", e.what());
  }
  if (!m.is_object()) throw ScenarioError(mfile, "", "manifest must be a JSON object");

  Scenario s;
  s.name = get_field<std::string>(m, "name", mfile, "");
  s.description = get_or<std::string>(m, "description", "", mfile, "");
  if (!m.contains("config")) throw ScenarioError(mfile, "config", "missing");
  s.config = config_from_json(m.at("config"), mfile);
  s.separation_margin_db = get_or<double>(m, "separation_margin_db", 6.0, mfile, "");

  if (m.contains("tolerances")) {
    const json& t = m.at("tolerances");
    auto& tol = s.tolerances;
    tol.mti_lsb = get_or<std::uint32_t>(t, "mti_lsb", tol.mti_lsb, mfile, "tolerances.");
    tol.rfft_lsb = get_or<std::uint32_t>(t, "rfft_lsb", tol.rfft_lsb, mfile, "tolerances.");
    tol.cfft_lsb = get_or<std::uint32_t>(t, "cfft_lsb", tol.cfft_lsb, mfile, "tolerances.");
    tol.magnitude_lsb = get_or<std::uint32_t>(t, "magnitude_lsb", tol.magnitude_lsb, mfile, "tolerances.");
    tol.phase_lsb = get_or<std::uint32_t>(t, "phase_lsb", tol.phase_lsb, mfile, "tolerances.");
  }

  // Without a files block the standard names are required.
  json files = m.contains("files") ? m.at("files") : json::object();
  if (!m.contains("files")) {
    json adc = json::array();
    for (std::uint32_t r = 0; r < s.config.channels; ++r) adc.push_back(adc_file_name(r));
    files = {{"adc", adc}, {"mti", "mti.memh"}, {"rfft", "rfft.memh"}, {"cfft", "cfft.memh"}};
  }
  const auto adc_names = get_field<std::vector<std::string>>(files, "adc", mfile, "files.");
  for (const auto& name : adc_names) s.adc.push_back(load_image(dir, name, 16));
  if (auto n = optional_name(files, "mti", mfile)) s.mti = load_image(dir, *n, 16);
  if (auto n = optional_name(files, "rfft", mfile)) s.rfft = load_image(dir, *n, 24);
  if (auto n = optional_name(files, "cfft", mfile)) s.cfft = load_image(dir, *n, 24);

  if (m.contains("expected_targets")) {
    const json& arr = m.at("expected_targets");
    if (!arr.is_array()) throw ScenarioError(mfile, "expected_targets", "must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      s.expected_targets.push_back(
          expected_target_from_json(arr[i], s.config, mfile, "expected_targets[" + std::to_string(i) + "]."));
  }

  for (auto it = m.begin(); it != m.end(); ++it)
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), it.key()) == std::end(kKnownKeys))
      s.extra[it.key()] = it.value();

  // Dimension mismatches name the file in the message prefix.
  const auto problems = image_problems(s);
  if (!problems.empty()) {
    const std::string& p = problems.front();
    throw ScenarioError((dir / p.substr(0, p.find(':'))).string(), "", "dimension mismatch: " + p);
  }
  return s;
}

void save_scenario(const Scenario& s, const fs::path& dir) {
  fs::create_directories(dir);
  json files;
  json adc = json::array();
  for (std::uint32_t r = 0; r < s.adc.size(); ++r) {
    write_memh_file((dir / adc_file_name(r)).string(), s.adc[r]);
    adc.push_back(adc_file_name(r));
  }
  files["adc"] = adc;
  auto put = [&](const char* key, const std::optional<MemoryImage>& img) {
    if (!img) {
      files[key] = nullptr;
      return;
    }
    const std::string name = std::string(key) + ".memh";
    write_memh_file((dir / name).string(), *img);
    files[key] = name;
  };
  put("mti", s.mti);
  put("rfft", s.rfft);
  put("cfft", s.cfft);

  json m = s.extra;
  m["name"] = s.name;
  m["description"] = s.description;
  m["config"] = config_to_json(s.config);
  m["files"] = files;
  json targets = json::array();
  for (const auto& t : s.expected_targets) targets.push_back(expected_target_to_json(t));
  m["expected_targets"] = targets;
  const auto& tol = s.tolerances;
  m["tolerances"] = {{"mti_lsb", tol.mti_lsb},
                     {"rfft_lsb", tol.rfft_lsb},
                     {"cfft_lsb", tol.cfft_lsb},
                     {"magnitude_lsb", tol.magnitude_lsb},
                     {"phase_lsb", tol.phase_lsb}};
  m["separation_margin_db"] = s.separation_margin_db;

  std::ofstream out(dir / kManifest);
  if (!out) throw ScenarioError((dir / kManifest).string(), "", "cannot write manifest");
  out << m.dump(2) << '\n';
}

std::vector<Scenario> load_scenario_set(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / kManifest)) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<Scenario> out;
  for (const auto& d : dirs) out.push_back(load_scenario(d));
  return out;
}

std::size_t select_scenario_index(const std::string& requested, const std::vector<std::string>& available,
                                  std::uint64_t seed) {
  if (available.empty()) throw ContractError("select_scenario: no scenarios available");
  for (std::size_t i = 0; i < available.size(); ++i)
    if (available[i] == requested) return i;
  // Empty or unrecognized name: random choice, reproducible from the seed.
  Rng rng(seed);
  return static_cast<std::size_t>(rng.below(available.size()));
}

const Scenario& select_scenario(const std::string& requested, const std::vector<Scenario>& available,
                                std::uint64_t seed) {
  std::vector<std::string> names;
  for (const auto& s : available) names.push_back(s.name);
  return available[select_scenario_index(requested, names, seed)];
}

ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport rep;
  for (auto& v : config_violations(s.config)) rep.violations.push_back("config: " + v);
  if (!rep.ok()) return rep;
  for (auto& v : image_problems(s)) rep.violations.push_back(v);

  const double margin = s.separation_margin_db;
  for (std::size_t i = 0; i < s.expected_targets.size(); ++i)
    for (std::size_t j = i + 1; j < s.expected_targets.size(); ++j) {
      const double a = std::abs(static_cast<double>(s.expected_targets[i].magnitude_raw));
      const double b = std::abs(static_cast<double>(s.expected_targets[j].magnitude_raw));
      if (a == 0.0 || b == 0.0) continue;
      const double db = std::abs(20.0 * std::log10(a / b));
      if (db < margin) {
        std::ostringstream os;
        os << "separation: expected targets " << i << " and " << j << " are " << db << " dB apart (margin " << margin
           << " dB)";
        rep.violations.push_back(os.str());
      }
    }

  if (s.extra.contains("scene")) {
    try {
      const SceneSpec spec = scene_from_json(s.extra.at("scene"));
      for (auto& v : check_separation(spec, s.config).violations) rep.violations.push_back("separation: " + v);
    } catch (const std::exception& e) {
      rep.violations.push_back(std::string("scene: ") + e.what());
    }
  }
  return rep;
}

ValidationReport validate_scenario_dir(const fs::path& dir) {
  try {
    return validate_scenario(load_scenario(dir));
  } catch (const std::exception& e) {
    ValidationReport rep;
    rep.violations.push_back(std::string("format: ") + e.what());
    return rep;
  }
}

}  // namespace dspkat
