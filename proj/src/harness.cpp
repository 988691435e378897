#include "dspkat/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <thread>

#include "dspkat/chain_io.hpp"
#include "dspkat/cordic.hpp"
#include "dspkat/memory_map.hpp"
#include "dspkat/ref_model.hpp"
#include "dspkat/scenariogen.hpp"

namespace dspkat::harness {

using nlohmann::json;
namespace reg = device::reg;

namespace {

using Clock = std::chrono::steady_clock;

// Feature-test redraw guard: any CFAR cell this close to its threshold
// could flip between the datapath and the model.
constexpr double kThresholdGuardDb = 0.5;
constexpr int kMaxRedraws = 200;

std::string hex_addr(std::uint32_t addr) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%04X", addr);
  return buf;
}

std::string cell(std::uint32_t k, std::uint32_t d) {
  return "(" + std::to_string(k) + "," + std::to_string(d) + ")";
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Phase difference folded into (-pi, pi] on the raw Q2.21 grid.
std::int64_t phase_delta(std::int32_t actual, std::int32_t expected) {
  const std::int64_t period = 2 * static_cast<std::int64_t>(dsp::pi_q2_21());
  std::int64_t d = static_cast<std::int64_t>(actual) - expected;
  d = ((d % period) + period) % period;
  if (d > period / 2) d -= period;
  return d;
}

// ---- device I/O through either access path ----

bool load_memory(device::Device& dev, Step region, const MemoryImage& img, Access access) {
  if (access == Access::kBackdoor) {
    dev.backdoor_deposit(region, img);
    return true;
  }
  bool ok = true;
  for (const auto& [addr, word] : img.cells()) ok = dev.write(addr, word).ok() && ok;
  return ok;
}

MemoryImage read_memory(device::Device& dev, Step region, const RegionLayout& layout, Access access) {
  if (access == Access::kBackdoor) return extract_region(dev.backdoor_peek(region), layout);
  MemoryImage out(layout.word_bits());
  for (std::uint32_t a = layout.base; a < layout.end(); ++a) {
    const auto r = dev.read(a);
    if (r.ok()) out.set(a, r.data);
  }
  return out;
}

std::uint32_t read_reg(device::Device& dev, std::uint32_t addr, Access access) {
  if (access == Access::kBackdoor) return dev.backdoor_peek_reg(addr);
  return dev.read(addr).data;
}

struct Results {
  std::vector<dsp::Target> targets;
  std::vector<dsp::AngleResult> angles;
};

Results read_results(device::Device& dev, Access access) {
  Results out;
  const std::uint32_t n = std::min(read_reg(dev, reg::kResTargetCount, access), kMaxTargetSlots);
  const bool angles = read_reg(dev, reg::kResAngleValid, access) != 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto field = [&](std::uint32_t f) { return read_reg(dev, reg::target_field(i, f), access); };
    dsp::Target t{field(reg::kFieldRangeBin), field(reg::kFieldDopplerBin), sign_extend(field(reg::kFieldMagnitude), 24)};
    out.targets.push_back(t);
    if (angles)
      out.angles.push_back({t.range_bin, t.doppler_bin, sign_extend(field(reg::kFieldAzPhase), 24),
                            sign_extend(field(reg::kFieldElPhase), 24),
                            static_cast<Direction>(field(reg::kFieldDirection))});
  }
  return out;
}

bool preload_targets(device::Device& dev, const std::vector<ExpectedTarget>& targets, Access access) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> writes;
  writes.emplace_back(reg::kResTargetCount, static_cast<std::uint32_t>(targets.size()));
  for (std::uint32_t i = 0; i < targets.size(); ++i) {
    writes.emplace_back(reg::target_field(i, reg::kFieldRangeBin), targets[i].range_bin);
    writes.emplace_back(reg::target_field(i, reg::kFieldDopplerBin), targets[i].doppler_bin);
    writes.emplace_back(reg::target_field(i, reg::kFieldMagnitude),
                        static_cast<std::uint32_t>(targets[i].magnitude_raw) & 0xFFFFFFu);
  }
  bool ok = true;
  for (const auto& [addr, value] : writes) {
    if (access == Access::kBackdoor)
      dev.backdoor_poke_reg(addr, value);
    else
      ok = dev.write(addr, value).ok() && ok;
  }
  return ok;
}

void add_device_error(KatReport& rep, const std::string& what, std::uint32_t code) {
  rep.mismatches.push_back({"STATUS", what, 0, static_cast<std::int64_t>(code), static_cast<std::int64_t>(code)});
}

void append(KatReport& rep, const TargetComparison& c, const std::string& prefix = "") {
  for (Mismatch m : c.mismatches) {
    m.location = prefix + m.location;
    rep.mismatches.push_back(m);
  }
  for (const auto& w : c.warnings) rep.warnings.push_back(prefix + w);
}

void append(KatReport& rep, std::vector<Mismatch> ms, const std::string& prefix = "") {
  for (Mismatch& m : ms) {
    m.location = prefix + m.location;
    rep.mismatches.push_back(std::move(m));
  }
}

void check_cycles(KatReport& rep, const std::string& prefix = "") {
  if (rep.cycles != rep.expected_cycles)
    rep.mismatches.push_back({prefix + "STATUS.CYCLES", "duration", static_cast<std::int64_t>(rep.expected_cycles),
                              static_cast<std::int64_t>(rep.cycles),
                              static_cast<std::int64_t>(rep.cycles) - static_cast<std::int64_t>(rep.expected_cycles)});
}

std::string describe(const ChainConfig& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "alpha=0x%04X G=%u W=%u T=%u hits=%u window=%s", c.cfar_alpha_raw, c.cfar_guard,
                c.cfar_window, c.max_targets, c.consec_hits, std::string(to_string(c.window)).c_str());
  return buf;
}

// True when a model-vs-datapath disagreement could be legitimate: a cell
// sits near its threshold, or equal magnitudes straddle the T cutoff.
bool ambiguous_draw(const ref::RealCube& adc, const ChainConfig& cfg, const ToleranceTable& tol) {
  const ref::ModelConfig mc{cfg, true};
  const auto model = ref::run_chain(adc, mc);
  std::vector<double> detected;
  for (const auto& st : ref::cfar_cell_statistics(model.cfft, mc)) {
    if (!st.has_window) continue;
    if (st.threshold <= 0.0) {
      if (st.magnitude > 0.0 && st.magnitude < 1e-6) return true;
    } else if (st.magnitude > 0.0 && std::abs(20.0 * std::log10(st.magnitude / st.threshold)) < kThresholdGuardDb) {
      return true;
    }
    if (st.magnitude > st.threshold) detected.push_back(st.magnitude);
  }
  std::sort(detected.rbegin(), detected.rend());
  if (detected.size() > cfg.max_targets) {
    const double gap = detected[cfg.max_targets - 1] - detected[cfg.max_targets];
    if (gap <= tol.magnitude_lsb * 0x1.0p-23) return true;
  }
  return false;
}

std::vector<Step> all_steps() { return {Step::kMti, Step::kRfft, Step::kCfft, Step::kCfar, Step::kAe}; }

}  // namespace

std::string_view to_string(Access a) { return a == Access::kFrontdoor ? "frontdoor" : "backdoor"; }

std::optional<Access> parse_access(std::string_view s) {
  const std::string l = lower(s);
  if (l == "frontdoor") return Access::kFrontdoor;
  if (l == "backdoor") return Access::kBackdoor;
  return std::nullopt;
}

std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::kMotion: return "MOTION";
    case Feature::kAcquire: return "ACQUIRE";
    case Feature::kAngle: return "ANGLE";
  }
  return "?";
}

std::optional<Feature> parse_feature(std::string_view s) {
  const std::string l = lower(s);
  if (l == "motion") return Feature::kMotion;
  if (l == "acquire") return Feature::kAcquire;
  if (l == "angle") return Feature::kAngle;
  return std::nullopt;
}

const std::vector<std::string>& fault_names() {
  static const std::vector<std::string> names = {"mti_reversed", "rfft_conj_twiddle", "cfft_conj_twiddle",
                                                 "cfar_no_gain_comp", "ae_conj_reference"};
  return names;
}

std::optional<dsp::Faults> parse_fault(std::string_view name) {
  dsp::Faults f;
  if (name == "none" || name.empty()) return f;
  if (name == "mti_reversed") f.mti_reversed = true;
  else if (name == "rfft_conj_twiddle") f.rfft_conj_twiddle = true;
  else if (name == "cfft_conj_twiddle") f.cfft_conj_twiddle = true;
  else if (name == "cfar_no_gain_comp") f.cfar_no_gain_comp = true;
  else if (name == "ae_conj_reference") f.ae_conj_reference = true;
  else return std::nullopt;
  return f;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    case Verdict::kSkip: return "skip";
  }
  return "?";
}

void KatReport::finalize() {
  if (verdict == Verdict::kSkip) return;
  verdict = mismatches.empty() ? Verdict::kPass : Verdict::kFail;
}

std::vector<Mismatch> compare_mem(const MemoryImage& actual, const MemoryImage& expected, std::uint32_t tol_lsb) {
  if (actual.word_bits() != expected.word_bits()) throw ContractError("compare_mem: word widths differ");
  const int bits = expected.word_bits();
  std::vector<Mismatch> out;
  for (const auto& [addr, word] : expected.cells()) {
    const std::int64_t e = sign_extend(word, bits);
    const auto a = actual.get(addr);
    if (!a) {
      out.push_back({hex_addr(addr), "unwritten", e, 0, 0});
      continue;
    }
    const std::int64_t av = sign_extend(*a, bits);
    if (std::abs(av - e) > static_cast<std::int64_t>(tol_lsb)) out.push_back({hex_addr(addr), "value", e, av, av - e});
  }
  return out;
}

TargetComparison compare_targets(const std::vector<dsp::Target>& actual, const std::vector<dsp::AngleResult>& actual_angles,
                                 const std::vector<ExpectedTarget>& expected, bool check_angles,
                                 const ToleranceTable& tol) {
  TargetComparison out;
  if (actual.size() != expected.size())
    out.mismatches.push_back({"TARGET_COUNT", "count", static_cast<std::int64_t>(expected.size()),
                              static_cast<std::int64_t>(actual.size()),
                              static_cast<std::int64_t>(actual.size()) - static_cast<std::int64_t>(expected.size())});

  // Position of each expected target in the actual list, or -1.
  std::vector<int> pos(expected.size(), -1);
  std::vector<bool> used(actual.size(), false);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = expected[i];
    for (std::size_t j = 0; j < actual.size(); ++j)
      if (!used[j] && actual[j].range_bin == e.range_bin && actual[j].doppler_bin == e.doppler_bin) {
        pos[i] = static_cast<int>(j);
        used[j] = true;
        break;
      }
    const std::string loc = cell(e.range_bin, e.doppler_bin);
    if (pos[i] < 0) {
      out.mismatches.push_back({loc, "missing", e.magnitude_raw, 0, 0});
      continue;
    }
    const dsp::Target& a = actual[static_cast<std::size_t>(pos[i])];
    const std::int64_t dm = static_cast<std::int64_t>(a.magnitude_raw) - e.magnitude_raw;
    if (std::abs(dm) > static_cast<std::int64_t>(tol.magnitude_lsb))
      out.mismatches.push_back({loc, "magnitude", e.magnitude_raw, a.magnitude_raw, dm});
    if (!check_angles) continue;
    if (static_cast<std::size_t>(pos[i]) >= actual_angles.size()) {
      out.mismatches.push_back({loc, "angle_missing", 0, 0, 0});
      continue;
    }
    const dsp::AngleResult& aa = actual_angles[static_cast<std::size_t>(pos[i])];
    const std::int64_t daz = phase_delta(aa.az_phase_raw, e.az_phase_raw);
    const std::int64_t del = phase_delta(aa.el_phase_raw, e.el_phase_raw);
    if (std::abs(daz) > static_cast<std::int64_t>(tol.phase_lsb))
      out.mismatches.push_back({loc, "az_phase", e.az_phase_raw, aa.az_phase_raw, daz});
    if (std::abs(del) > static_cast<std::int64_t>(tol.phase_lsb))
      out.mismatches.push_back({loc, "el_phase", e.el_phase_raw, aa.el_phase_raw, del});
    if (aa.direction != e.direction)
      out.mismatches.push_back({loc, "direction", static_cast<std::int64_t>(e.direction),
                                static_cast<std::int64_t>(aa.direction), 0});
  }
  for (std::size_t j = 0; j < actual.size(); ++j)
    if (!used[j])
      out.mismatches.push_back({cell(actual[j].range_bin, actual[j].doppler_bin), "unexpected", 0,
                                actual[j].magnitude_raw, actual[j].magnitude_raw});

  // Order: every inverted pair of matched targets.
  for (std::size_t i = 0; i < expected.size(); ++i)
    for (std::size_t j = i + 1; j < expected.size(); ++j) {
      if (pos[i] < 0 || pos[j] < 0 || pos[i] < pos[j]) continue;
      const std::int64_t gap = std::abs(static_cast<std::int64_t>(expected[i].magnitude_raw) - expected[j].magnitude_raw);
      const std::string pair = cell(expected[i].range_bin, expected[i].doppler_bin) + "<->" +
                               cell(expected[j].range_bin, expected[j].doppler_bin);
      if (gap <= static_cast<std::int64_t>(tol.magnitude_lsb))
        out.warnings.push_back("tie-ambiguous order " + pair);
      else
        out.mismatches.push_back({pair, "order", static_cast<std::int64_t>(i), pos[i], gap});
    }
  return out;
}

std::vector<ExpectedTarget> model_expectations(const MemoryImage& adc, const ChainConfig& cfg) {
  const auto bursts = dsp::image_to_bursts(adc, Step::kAdc, cfg);
  return expected_from_model(ref::run_chain(ref::to_model(bursts), {cfg, true}), cfg);
}

KatReport run_step_kat(const Scenario& s, Step step, Access access, const RunOptions& opt) {
  const auto t0 = Clock::now();
  KatReport rep;
  rep.test = "step_kat";
  rep.scenario = s.name;
  rep.step = std::string(to_string(step));
  rep.access = std::string(to_string(access));

  const MemoryImage* input = nullptr;
  MemoryImage adc(16);
  Step in_region = Step::kAdc;
  switch (step) {
    case Step::kMti:
      if (!s.adc.empty()) {
        adc = s.adc_image();
        input = &adc;
      }
      rep.notes.push_back("ADC to MEM");
      break;
    case Step::kRfft:
      input = s.expected_image(Step::kMti);
      in_region = Step::kMti;
      rep.notes.push_back("MEM to MEM");
      break;
    case Step::kCfft:
      input = s.expected_image(Step::kRfft);
      in_region = Step::kRfft;
      rep.notes.push_back("MEM to MEM");
      break;
    case Step::kCfar:
    case Step::kAe:
      input = s.expected_image(Step::kCfft);
      in_region = Step::kCfft;
      rep.notes.push_back(step == Step::kCfar ? "MEM to REG" : "MEM + REG to REG");
      break;
    default: throw ContractError("run_step_kat: not a DFV step");
  }

  auto skip = [&](const std::string& why) {
    rep.verdict = Verdict::kSkip;
    rep.skip_reason = why;
    rep.wall_time_s = seconds_since(t0);
    return rep;
  };
  if (input == nullptr) return skip("scenario has no input data for " + rep.step);
  const bool mem_output = step == Step::kMti || step == Step::kRfft || step == Step::kCfft;
  if (mem_output && s.expected_image(step) == nullptr) return skip("scenario has no expected " + rep.step + " image");
  if (step == Step::kAe && s.config.channels < 3) return skip("AE requires R = 3");

  device::Device dev(opt.faults);
  if (!dev.program_config(s.config) || !dev.write(reg::kCtrlMode, 1).ok())
    add_device_error(rep, "config_rejected", 0);
  if (!load_memory(dev, in_region, *input, access)) add_device_error(rep, "preload_rejected", 0);
  if (step == Step::kAe && !preload_targets(dev, s.expected_targets, access))
    add_device_error(rep, "preload_rejected", 0);

  const device::StepReport sr = dev.trigger_step(step);
  if (sr.rejected || sr.error || sr.timed_out) {
    add_device_error(rep, sr.rejected ? "trigger_rejected" : (sr.timed_out ? "timeout" : "step_error"),
                     static_cast<std::uint32_t>(sr.error_code));
    rep.finalize();
    rep.wall_time_s = seconds_since(t0);
    return rep;
  }
  rep.cycles = sr.cycles;
  rep.expected_cycles = dsp::step_duration(step, s.config, step == Step::kAe ? s.expected_targets.size() : 0);
  check_cycles(rep);

  if (mem_output) {
    const RegionLayout layout = region_for(step, s.config);
    append(rep, compare_mem(read_memory(dev, step, layout, access), *s.expected_image(step), s.tolerances.memory_lsb(step)));
  } else {
    const Results res = read_results(dev, access);
    append(rep, compare_targets(res.targets, res.angles, s.expected_targets, step == Step::kAe, s.tolerances));
  }
  rep.finalize();
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

KatReport run_full_kat(const Scenario& s, Access access, const RunOptions& opt) {
  const auto t0 = Clock::now();
  KatReport rep;
  rep.test = "full_kat";
  rep.scenario = s.name;
  rep.step = "full";
  rep.access = std::string(to_string(access));
  if (s.adc.empty()) {
    rep.verdict = Verdict::kSkip;
    rep.skip_reason = "scenario has no ADC data";
    return rep;
  }

  device::Device dev(opt.faults);
  if (!dev.program_config(s.config)) add_device_error(rep, "config_rejected", 0);
  if (!load_memory(dev, Step::kAdc, s.adc_image(), access)) add_device_error(rep, "preload_rejected", 0);
  const device::FrameReport fr = dev.run_frame();
  if (fr.error || !fr.done) {
    add_device_error(rep, fr.error ? "frame_error" : "timeout", static_cast<std::uint32_t>(fr.error_code));
    rep.finalize();
    rep.wall_time_s = seconds_since(t0);
    return rep;
  }
  rep.cycles = fr.cycles;
  rep.expected_cycles = dsp::step_duration(Step::kFull, s.config, s.expected_targets.size());
  check_cycles(rep);

  for (Step region : {Step::kMti, Step::kRfft, Step::kCfft}) {
    const MemoryImage* expected = s.expected_image(region);
    if (expected == nullptr) {
      rep.notes.push_back("no expected " + std::string(to_string(region)) + " image; region not compared");
      continue;
    }
    const RegionLayout layout = region_for(region, s.config);
    append(rep, compare_mem(read_memory(dev, region, layout, access), *expected, s.tolerances.memory_lsb(region)),
           std::string(to_string(region)) + "@");
  }
  const Results res = read_results(dev, access);
  append(rep, compare_targets(res.targets, res.angles, s.expected_targets, s.config.channels >= 3, s.tolerances));
  rep.notes.push_back(std::to_string(res.targets.size()) + " targets");
  rep.finalize();
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

ChainConfig draw_feature_config(Feature f, const ChainConfig& base, Rng& rng) {
  ChainConfig c = base;
  switch (f) {
    case Feature::kMotion:
      c.consec_hits = static_cast<std::uint32_t>(rng.range(1, 4));
      c.cfar_alpha_raw = static_cast<std::uint16_t>(rng.range(0x0200, 0x0800));
      break;
    case Feature::kAcquire:
      c.cfar_alpha_raw = static_cast<std::uint16_t>(rng.range(0x0200, 0x0800));
      c.cfar_guard = static_cast<std::uint32_t>(rng.range(0, 3));
      c.cfar_window = static_cast<std::uint32_t>(rng.range(1, 8));
      c.max_targets = static_cast<std::uint32_t>(rng.range(1, kMaxTargetSlots));
      break;
    case Feature::kAngle:
      c.window = rng.below(2) == 0 ? Window::kNone : Window::kHann;
      c.cfar_alpha_raw = static_cast<std::uint16_t>(rng.range(0x0200, 0x0800));
      break;
  }
  return c;
}

KatReport run_feature_test(Feature f, const Scenario& s, std::uint64_t seed, std::uint32_t count,
                           const RunOptions& opt) {
  const auto t0 = Clock::now();
  KatReport rep;
  rep.test = "feature";
  rep.scenario = s.name;
  rep.step = std::string(to_string(f));
  rep.access = "backdoor";
  auto skip = [&](const std::string& why) {
    rep.verdict = Verdict::kSkip;
    rep.skip_reason = why;
    rep.wall_time_s = seconds_since(t0);
    return rep;
  };
  if (s.adc.empty()) return skip("scenario has no ADC data");
  if (f == Feature::kAngle && s.config.channels < 3) return skip("ANGLE requires R = 3");

  const MemoryImage adc_img = s.adc_image();
  const ref::RealCube adc = ref::to_model(dsp::image_to_bursts(adc_img, Step::kAdc, s.config));
  Rng rng(seed);
  std::uint32_t exhausted = 0;
  for (std::uint32_t it = 0; it < count; ++it) {
    const std::string prefix = "iter " + std::to_string(it) + " ";
    std::optional<ChainConfig> cfg;
    int redraws = 0;
    for (int attempt = 0; attempt < kMaxRedraws && !cfg; ++attempt) {
      ChainConfig c = draw_feature_config(f, s.config, rng);
      if (!config_violations(c).empty() || ambiguous_draw(adc, c, s.tolerances)) {
        ++redraws;
        continue;
      }
      cfg = c;
    }
    if (!cfg) {
      ++exhausted;
      rep.warnings.push_back(prefix + "no unambiguous configuration within the redraw budget");
      continue;
    }
    rep.notes.push_back(prefix + describe(*cfg) + (redraws ? " redraws=" + std::to_string(redraws) : ""));
    ++rep.iterations;

    const auto expected = model_expectations(adc_img, *cfg);
    device::Device dev(opt.faults);
    dev.program_config(*cfg);
    dev.backdoor_deposit(Step::kAdc, adc_img);
    const std::uint32_t frames = f == Feature::kMotion ? cfg->consec_hits + 1 : 1;
    for (std::uint32_t fr = 0; fr < frames; ++fr) {
      const device::FrameReport r = dev.run_frame();
      const std::string fp = prefix + "frame " + std::to_string(fr) + " ";
      if (r.error || !r.done) {
        add_device_error(rep, "frame_error", static_cast<std::uint32_t>(r.error_code));
        break;
      }
      const std::uint64_t want = dsp::step_duration(Step::kFull, *cfg, expected.size());
      if (r.cycles != want)
        rep.mismatches.push_back({fp + "STATUS.CYCLES", "duration", static_cast<std::int64_t>(want),
                                  static_cast<std::int64_t>(r.cycles),
                                  static_cast<std::int64_t>(r.cycles) - static_cast<std::int64_t>(want)});
      if (f != Feature::kMotion) continue;
      const std::uint32_t hits = expected.empty() ? 0 : fr + 1;
      const bool motion = hits >= cfg->consec_hits;
      if (r.hit_counter != hits)
        rep.mismatches.push_back({fp + "IRQ.HIT_COUNTER", "hit_counter", hits, r.hit_counter,
                                  static_cast<std::int64_t>(r.hit_counter) - hits});
      if (r.motion_detect != motion)
        rep.mismatches.push_back({fp + "IRQ.MOTION_DETECT", "motion_detect", motion, r.motion_detect, 0});
    }
    append(rep, compare_targets(dev.target_results(), dev.angle_results(), expected, s.config.channels >= 3, s.tolerances),
           prefix);
  }
  if (rep.iterations == 0) return skip("redraw budget exhausted on every iteration");
  if (exhausted > 0) rep.notes.push_back(std::to_string(exhausted) + " iterations skipped");
  rep.finalize();
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

KatReport run_use_case(const std::string& name, const Scenario& s, const ChainConfig& cfg,
                       const std::vector<ExpectedTarget>& expected, const RunOptions& opt, bool check_angles) {
  const auto t0 = Clock::now();
  KatReport rep;
  rep.test = "use_case";
  rep.scenario = s.name;
  rep.step = name;
  rep.access = "backdoor";
  if (s.adc.empty()) {
    rep.verdict = Verdict::kSkip;
    rep.skip_reason = "scenario has no ADC data";
    return rep;
  }
  device::Device dev(opt.faults);
  if (!dev.program_config(cfg)) add_device_error(rep, "config_rejected", 0);
  dev.backdoor_deposit(Step::kAdc, s.adc_image());
  const device::FrameReport fr = dev.run_frame();
  if (fr.error || !fr.done) {
    add_device_error(rep, "frame_error", static_cast<std::uint32_t>(fr.error_code));
  } else {
    rep.cycles = fr.cycles;
    rep.expected_cycles = dsp::step_duration(Step::kFull, cfg, expected.size());
    check_cycles(rep);
    append(rep, compare_targets(dev.target_results(), dev.angle_results(), expected,
                                check_angles && cfg.channels >= 3, s.tolerances));
  }
  rep.finalize();
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

// ---------- regression ----------

SuiteSpec default_suite() {
  SuiteSpec s;
  s.name = "default";
  s.scenarios = builtin_scene_names();
  TestSpec step;
  step.type = "step_kat";
  step.steps = all_steps();
  step.access = {Access::kBackdoor, Access::kFrontdoor};
  TestSpec full;
  full.type = "full_kat";
  full.access = {Access::kBackdoor, Access::kFrontdoor};
  TestSpec feat;
  feat.type = "feature";
  feat.features = {Feature::kMotion, Feature::kAcquire, Feature::kAngle};
  feat.count = 100;
  feat.scenarios = {"multi"};
  s.tests = {step, full, feat};
  return s;
}

SuiteSpec suite_from_json(const json& j) {
  SuiteSpec s;
  s.name = j.value("name", "suite");
  if (j.contains("scenarios")) s.scenarios = j.at("scenarios").get<std::vector<std::string>>();
  if (!j.contains("tests") || !j.at("tests").is_array()) throw ContractError("suite: 'tests' array required");
  for (const json& t : j.at("tests")) {
    TestSpec ts;
    ts.type = t.at("type").get<std::string>();
    if (ts.type != "step_kat" && ts.type != "full_kat" && ts.type != "feature" && ts.type != "use_case")
      throw ContractError("suite: unknown test type '" + ts.type + "'");
    if (t.contains("steps")) {
      for (const auto& name : t.at("steps").get<std::vector<std::string>>()) {
        const auto st = parse_step(lower(name));
        if (!st || *st == Step::kAdc || *st == Step::kFull) throw ContractError("suite: bad step '" + name + "'");
        ts.steps.push_back(*st);
      }
    } else {
      ts.steps = all_steps();
    }
    if (t.contains("access")) {
      for (const auto& name : t.at("access").get<std::vector<std::string>>()) {
        const auto a = parse_access(name);
        if (!a) throw ContractError("suite: bad access '" + name + "'");
        ts.access.push_back(*a);
      }
    } else {
      ts.access = {Access::kBackdoor};
    }
    if (t.contains("features")) {
      for (const auto& name : t.at("features").get<std::vector<std::string>>()) {
        const auto f = parse_feature(name);
        if (!f) throw ContractError("suite: bad feature '" + name + "'");
        ts.features.push_back(*f);
      }
    } else {
      ts.features = {Feature::kMotion, Feature::kAcquire, Feature::kAngle};
    }
    ts.count = t.value("count", 100u);
    if (t.contains("scenarios")) ts.scenarios = t.at("scenarios").get<std::vector<std::string>>();
    if (t.contains("scenario")) ts.scenarios = {t.at("scenario").get<std::string>()};
    ts.name = t.value("name", ts.type);
    if (t.contains("config")) ts.config_overrides = t.at("config");
    if (ts.type == "use_case") {
      if (!t.contains("expected_targets")) throw ContractError("suite: use_case needs expected_targets");
      ChainConfig defaults;
      for (const json& e : t.at("expected_targets")) {
        ts.expected_targets.push_back(expected_target_from_json(e, defaults, "suite"));
        if (!e.contains("az_phase_raw") || !e.contains("el_phase_raw")) ts.check_angles = false;
      }
    }
    s.tests.push_back(std::move(ts));
  }
  return s;
}

SuiteSpec load_suite_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path, "", "cannot open suite file");
  try {
    return suite_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ScenarioError(path, "", e.what());
  } catch (const ContractError& e) {
    throw ScenarioError(path, "", e.what());
  }
}

std::size_t RegressionSummary::count(Verdict v) const {
  return static_cast<std::size_t>(std::count_if(reports.begin(), reports.end(), [&](const KatReport& r) { return r.verdict == v; }));
}

std::size_t RegressionSummary::warning_count() const {
  std::size_t n = 0;
  for (const auto& r : reports) n += r.warnings.size();
  return n;
}

RegressionSummary run_regression(const SuiteSpec& suite, const std::vector<Scenario>& available,
                                 const RegressionOptions& opt) {
  const auto t0 = Clock::now();
  RegressionSummary sum;
  sum.suite = suite.name;
  sum.seed = opt.seed;

  std::vector<std::string> names;
  for (const auto& sc : available) names.push_back(sc.name);
  auto find = [&](const std::string& n) -> const Scenario* {
    for (const auto& sc : available)
      if (sc.name == n) return &sc;
    return nullptr;
  };
  std::vector<std::string> suite_scenarios = suite.scenarios.empty() ? names : suite.scenarios;
  if (opt.scenario) {
    const std::string chosen = names.at(select_scenario_index(*opt.scenario, names, opt.seed));
    sum.scenario_filter = chosen;
    suite_scenarios = {chosen};
  }
  auto selected = [&](const std::vector<std::string>& test_scenarios) {
    std::vector<std::string> out;
    for (const auto& n : test_scenarios.empty() ? suite_scenarios : test_scenarios)
      if (std::find(suite_scenarios.begin(), suite_scenarios.end(), n) != suite_scenarios.end()) out.push_back(n);
    return out;
  };

  // Jobs in suite order; results land at their job index.
  std::vector<std::function<KatReport()>> jobs;
  auto missing = [](const std::string& test, const std::string& n) {
    KatReport r;
    r.test = test;
    r.scenario = n;
    r.verdict = Verdict::kSkip;
    r.skip_reason = "scenario not available";
    return r;
  };
  for (const TestSpec& t : suite.tests)
    for (const std::string& n : selected(t.scenarios)) {
      const Scenario* sc = find(n);
      if (t.type == "step_kat") {
        for (Step st : t.steps)
          for (Access a : t.access)
            jobs.push_back([=, &opt] { return sc ? run_step_kat(*sc, st, a, opt.run) : missing(t.type, n); });
      } else if (t.type == "full_kat") {
        for (Access a : t.access)
          jobs.push_back([=, &opt] { return sc ? run_full_kat(*sc, a, opt.run) : missing(t.type, n); });
      } else if (t.type == "feature") {
        for (Feature f : t.features)
          jobs.push_back([=, &opt] {
            return sc ? run_feature_test(f, *sc, opt.seed, t.count, opt.run) : missing(t.type, n);
          });
      } else if (t.type == "use_case") {
        jobs.push_back([=, &opt] {
          if (!sc) return missing(t.type, n);
          json cj = config_to_json(sc->config);
          cj.update(t.config_overrides);
          return run_use_case(t.name, *sc, config_from_json(cj, "suite"), t.expected_targets, opt.run, t.check_angles);
        });
      }
    }

  sum.reports.resize(jobs.size());
  unsigned workers = opt.jobs ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, jobs.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        sum.reports[i] = jobs[i]();
      } catch (const std::exception& e) {
        KatReport r;
        r.test = "internal";
        r.verdict = Verdict::kFail;
        r.mismatches.push_back({"exception", e.what(), 0, 0, 0});
        sum.reports[i] = r;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  sum.wall_time_s = seconds_since(t0);
  return sum;
}

json report_to_json(const KatReport& r) {
  json mm = json::array();
  for (const auto& m : r.mismatches)
    mm.push_back({{"location", m.location}, {"kind", m.kind}, {"expected", m.expected}, {"actual", m.actual},
                  {"delta", m.delta}});
  json j = {{"test", r.test},
            {"scenario", r.scenario},
            {"step", r.step},
            {"access", r.access},
            {"verdict", std::string(to_string(r.verdict))},
            {"mismatches", mm},
            {"warnings", r.warnings},
            {"notes", r.notes},
            {"cycles", r.cycles},
            {"expected_cycles", r.expected_cycles}};
  if (r.verdict == Verdict::kSkip) j["skip_reason"] = r.skip_reason;
  if (r.test == "feature") j["iterations"] = r.iterations;
  return j;
}

json summary_to_json(const RegressionSummary& s, bool timing) {
  json results = json::array();
  for (const auto& r : s.reports) {
    json j = report_to_json(r);
    if (timing) j["wall_time_s"] = r.wall_time_s;
    results.push_back(j);
  }
  json out = {{"schema", "dspkat-regression-report/1"},
              {"suite", s.suite},
              {"seed", s.seed},
              {"scenario_filter", s.scenario_filter},
              {"summary",
               {{"total", s.reports.size()},
                {"passed", s.count(Verdict::kPass)},
                {"failed", s.count(Verdict::kFail)},
                {"skipped", s.count(Verdict::kSkip)},
                {"warnings", s.warning_count()}}},
              {"exit_code", s.exit_code()},
              {"results", results}};
  if (timing) {
    out["wall_time_s"] = s.wall_time_s;
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out["generated_at"] = buf;
  }
  return out;
}

std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> out;
  for (const auto& n : builtin_scene_names()) out.push_back(build_scenario(builtin_scene(n)));
  return out;
}

}  // namespace dspkat::harness
