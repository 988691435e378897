// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria. argv[1] is the path of the dspkat CLI.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "dspkat/cordic.hpp"
#include "dspkat/device.hpp"
#include "dspkat/dsp_chain.hpp"
#include "dspkat/harness.hpp"
#include "dspkat/mem_image.hpp"
#include "dspkat/rng.hpp"

using namespace dspkat;
using namespace dspkat::harness;
namespace fs = std::filesystem;

namespace {

constexpr double kLsb = 0x1.0p-23;

struct Outcome {
  bool pass = false;
  std::string detail;
};

const std::vector<Scenario>& scenarios() {
  static const std::vector<Scenario> s = builtin_scenarios();
  return s;
}

const Scenario& named(const std::string& n) { return select_scenario(n, scenarios(), 0); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1. memh fidelity ----

std::string noisy_memh(const MemoryImage& img, Rng& rng, const std::string& head) {
  static const char* gaps[] = {" ", "\n", "\t", "   ", " // c\n", " /* c */ ", "\r\n", "\n\n"};
  const int digits = img.word_bits() / 4;
  std::string out = head + "\n";
  std::uint64_t cursor = ~0ull;
  char buf[32];
  for (const auto& [addr, word] : img.cells()) {
    if (addr != cursor) {
      std::snprintf(buf, sizeof buf, rng.below(2) ? "@%X" : "@%x", addr);
      out += buf;
      out += gaps[rng.below(8)];
    }
    std::snprintf(buf, sizeof buf, rng.below(2) ? "%0*X" : "%0*x", static_cast<int>(rng.below(digits) + 1), word);
    out += buf;
    out += gaps[rng.below(8)];
    cursor = std::uint64_t{addr} + 1;
  }
  return out;
}

Outcome memh_fidelity() {
  const std::string line16 = "@123    E3B0 // example for Q12,4 format";
  const std::string line24 = "@EC50 FF8174";
  Rng rng(101);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const int bits = i % 2 ? 24 : 16;
    const std::uint32_t mask = bits == 16 ? 0xFFFFu : 0xFFFFFFu;
    MemoryImage img(bits);
    if (bits == 16) img.set(0x123, 0xE3B0);
    else img.set(0xEC50, 0xFF8174);
    const auto cells = rng.below(80);
    for (std::uint64_t c = 0; c < cells; ++c) {
      // Keep clear of the literal line's address so it survives unchanged.
      auto addr = static_cast<std::uint32_t>(rng.below(0x11000));
      if (addr == 0x123 || addr == 0xEC50) continue;
      img.set(addr, static_cast<std::uint32_t>(rng.next() & mask));
    }
    MemoryImage rest(bits);
    for (const auto& [a, w] : img.cells())
      if (a != (bits == 16 ? 0x123u : 0xEC50u)) rest.set(a, w);
    const std::string text = noisy_memh(rest, rng, bits == 16 ? line16 : line24);
    const MemoryImage parsed = parse_memh(text, bits);
    const std::string canon = emit_memh(parsed);
    const bool ok = parsed == img && parse_memh(canon, bits) == img && emit_memh(parse_memh(canon, bits)) == canon &&
                    canon == emit_memh(img);
    bad += !ok;
  }
  const bool lit = parse_memh(line16, 16).get(0x123) == 0xE3B0u && parse_memh(line24, 24).get(0xEC50) == 0xFF8174u;
  return {bad == 0 && lit, "1000 images, " + std::to_string(bad) + " round-trip differences"};
}

// ---- 2. FFT accuracy ----

std::vector<std::complex<double>> scaled_dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * double((k * i) % n) / double(n));
    out[k] = acc / double(n);
  }
  return out;
}

double bin_error(ComplexRaw got, std::complex<double> want) {
  return std::max(std::fabs(got.re * kLsb - want.real()), std::fabs(got.im * kLsb - want.imag()));
}

Outcome fft_accuracy() {
  Rng rng(202);
  const std::uint32_t rlens[] = {16, 32, 64, 128, 256};
  const std::uint32_t clens[] = {2, 4, 8, 16, 32, 64};
  double worst_ratio = 0;
  std::string worst_where;
  for (int i = 0; i < 1000; ++i) {
    ChainConfig cfg;
    cfg.samples = rlens[i % 5];
    cfg.window = i % 2 ? Window::kHann : Window::kNone;
    const std::uint32_t n = cfg.samples;
    std::vector<std::int32_t> x(n);
    for (auto& v : x) v = static_cast<std::int32_t>(rng.range(-32768, 32767));
    std::vector<std::complex<double>> ref(n);
    for (std::uint32_t k = 0; k < n; ++k) {
      const double w = cfg.window == Window::kHann ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / n) : 1.0;
      ref[k] = x[k] / 16.0 / 2048.0 * w;
    }
    const auto got = dsp::rfft(x, cfg);
    const auto want = scaled_dft(ref);
    const double bound = kLsb * (4 * std::log2(n) + 2);
    for (std::uint32_t k = 0; k < n / 2; ++k) {
      const double r = bin_error(got[k], want[k]) / bound;
      if (r > worst_ratio) {
        worst_ratio = r;
        worst_where = "rfft N=" + std::to_string(n);
      }
    }
  }
  for (int i = 0; i < 1000; ++i) {
    const std::uint32_t n = clens[i % 6];
    std::vector<ComplexRaw> v(n);
    std::vector<std::complex<double>> ref(n);
    for (std::uint32_t k = 0; k < n; ++k) {
      v[k] = {static_cast<std::int32_t>(rng.range(-(1 << 23), (1 << 23) - 1)),
              static_cast<std::int32_t>(rng.range(-(1 << 23), (1 << 23) - 1))};
      ref[k] = {v[k].re * kLsb, v[k].im * kLsb};
    }
    const auto got = dsp::cfft(v);
    const auto want = scaled_dft(ref);
    const double bound = kLsb * (4 * std::log2(n) + 2);
    for (std::uint32_t k = 0; k < n; ++k) {
      const double r = bin_error(got[k], want[k]) / bound;
      if (r > worst_ratio) {
        worst_ratio = r;
        worst_where = "cfft N=" + std::to_string(n);
      }
    }
  }
  return {worst_ratio <= 1.0, "worst error " + fmt("%.3f", worst_ratio) + " of bound (" + worst_where + ")"};
}

// ---- 3. CORDIC accuracy ----

Outcome cordic_accuracy() {
  Rng rng(303);
  double worst_mag = 0, worst_phase = 0;
  for (int i = 0; i < 100000; ++i) {
    const double r = std::exp(rng.uniform(std::log(0x1.0p-10), std::log(0.999)));
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const Fixed x = quantize(r * std::cos(a), kQ0_23), y = quantize(r * std::sin(a), kQ0_23);
    const double xr = to_real(x), yr = to_real(y);
    const double want = std::hypot(xr, yr);
    if (want < 0x1.0p-10) continue;
    const auto p = dsp::cordic_vectoring(x, y);
    worst_mag = std::max(worst_mag, std::fabs(to_real(p.magnitude) - want) / want);
    double dphi = std::fabs(to_real(p.phase) - std::atan2(yr, xr));
    dphi = std::min(dphi, 2 * std::numbers::pi - dphi);
    worst_phase = std::max(worst_phase, dphi);
  }
  const double lim = 0x1.0p-13;
  return {worst_mag <= lim && worst_phase <= lim,
          "max magnitude rel err 2^" + fmt("%.2f", std::log2(worst_mag)) + ", max phase err 2^" +
              fmt("%.2f", std::log2(worst_phase)) + " rad"};
}

// ---- 4. CFAR oracle ----

long long round_half_even_div(long long num, long long den) {
  long long q = num / den;
  const long long r = num % den;
  if (2 * r > den || (2 * r == den && q % 2 != 0)) ++q;
  return q;
}

// Sliding-window CA-CFAR written out cell by cell, ordered like the device list.
std::vector<dsp::Target> cfar_brute_force(const dsp::MagnitudeMap& mag, const ChainConfig& cfg) {
  std::vector<dsp::Target> hits;
  const int ranges = static_cast<int>(mag.rows());
  const int g = static_cast<int>(cfg.cfar_guard), w = static_cast<int>(cfg.cfar_window);
  for (std::uint32_t d = 1; d < mag.cols(); ++d)
    for (int k = 0; k < ranges; ++k) {
      long long sum = 0, count = 0;
      for (int j = k - g - w; j <= k + g + w; ++j) {
        if (j < 0 || j >= ranges || std::abs(j - k) <= g) continue;
        sum += mag.at(0, j, d);
        ++count;
      }
      if (count == 0) continue;
      const long long mean = round_half_even_div(sum, count);
      const long long thr = std::min<long long>(round_half_even_div(mean * cfg.cfar_alpha_raw, 256), (1 << 23) - 1);
      if (mag.at(0, k, d) > thr) hits.push_back({static_cast<std::uint32_t>(k), d, mag.at(0, k, d)});
    }
  std::sort(hits.begin(), hits.end(), [](const dsp::Target& a, const dsp::Target& b) {
    return std::tuple(-a.magnitude_raw, a.range_bin, a.doppler_bin) <
           std::tuple(-b.magnitude_raw, b.range_bin, b.doppler_bin);
  });
  if (hits.size() > cfg.max_targets) hits.resize(cfg.max_targets);
  return hits;
}

Outcome cfar_equivalence() {
  Rng rng(404);
  int bad = 0;
  std::size_t detections = 0;
  for (int i = 0; i < 500; ++i) {
    ChainConfig cfg;
    cfg.channels = 1;
    cfg.samples = 1u << rng.range(4, 6);         // 8..32 range bins
    cfg.bursts = (1u << rng.range(1, 4)) + 1;    // 2..16 Doppler bins
    cfg.cfar_alpha_raw = static_cast<std::uint16_t>(rng.range(0x080, 0x800));
    cfg.cfar_guard = static_cast<std::uint32_t>(rng.range(0, 3));
    cfg.cfar_window = static_cast<std::uint32_t>(rng.range(1, 8));
    cfg.max_targets = static_cast<std::uint32_t>(rng.range(1, 16));
    dsp::MagnitudeMap mag(1, cfg.range_bins(), cfg.doppler_bins());
    for (auto& v : mag.data()) {
      v = static_cast<std::int32_t>(rng.range(0, 30000));
      if (rng.below(8) == 0) v = static_cast<std::int32_t>(rng.range(30000, (1 << 23) - 1));
      if (rng.below(20) == 0) v = 5000;  // ties
    }
    const auto got = dsp::cfar_detect(mag, cfg);
    const auto want = cfar_brute_force(mag, cfg);
    detections += want.size();
    bad += !(got == want);
  }
  return {bad == 0, "500 maps, " + std::to_string(detections) + " oracle detections, " + std::to_string(bad) +
                        " differing lists"};
}

// ---- 5. DFV step composition ----

device::Device dfv_device(const ChainConfig& cfg) {
  device::Device d;
  if (!d.program_config(cfg) || !d.write(device::reg::kCtrlMode, 1).ok()) throw std::runtime_error("DFV setup failed");
  return d;
}

Outcome step_composition() {
  std::string failed;
  for (const auto& s : scenarios()) {
    device::Device frame;
    frame.program_config(s.config);
    frame.backdoor_deposit(Step::kAdc, s.adc_image());
    const auto fr = frame.run_frame();

    device::Snapshot composed;
    MemoryImage carry = s.adc_image();
    composed.memory[0] = carry;
    Step from = Step::kAdc;
    bool ok = fr.done;
    for (Step st : {Step::kMti, Step::kRfft, Step::kCfft}) {
      device::Device d = dfv_device(s.config);
      d.backdoor_deposit(from, carry);
      ok &= d.trigger_step(st).done;
      carry = d.backdoor_peek(st);
      composed.memory[static_cast<int>(st)] = carry;
      from = st;
    }
    device::Device last = dfv_device(s.config);
    last.backdoor_deposit(Step::kCfft, carry);
    ok &= last.trigger_step(Step::kCfar).done;
    if (s.config.channels >= 3) ok &= last.trigger_step(Step::kAe).done;
    composed.results = last.snapshot().results;
    ok &= frame.snapshot() == composed;
    if (!ok) failed += " " + s.name;
  }
  return {failed.empty(), failed.empty() ? "memory and result registers identical on single, multi, noise"
                                         : "differs on" + failed};
}

// ---- 6. frontdoor/backdoor ----

Outcome access_equivalence() {
  int kats = 0, differ = 0;
  for (const auto& s : scenarios())
    for (Step st : {Step::kMti, Step::kRfft, Step::kCfft, Step::kCfar, Step::kAe}) {
      const auto back = run_step_kat(s, st, Access::kBackdoor);
      const auto front = run_step_kat(s, st, Access::kFrontdoor);
      ++kats;
      differ += !(back.verdict == front.verdict && back.mismatches == front.mismatches);
    }
  return {differ == 0, std::to_string(kats) + " step KATs, " + std::to_string(differ) + " differ"};
}

// ---- 7. closed-loop suite ----

Outcome kat_suite() {
  int kats = 0;
  std::size_t mismatches = 0;
  std::string failed;
  for (const auto& s : scenarios()) {
    std::vector<KatReport> reps;
    for (Step st : {Step::kMti, Step::kRfft, Step::kCfft, Step::kCfar, Step::kAe})
      for (Access a : {Access::kFrontdoor, Access::kBackdoor}) reps.push_back(run_step_kat(s, st, a));
    for (Access a : {Access::kFrontdoor, Access::kBackdoor}) reps.push_back(run_full_kat(s, a));
    for (const auto& r : reps) {
      ++kats;
      mismatches += r.mismatches.size();
      if (!r.passed()) failed += " " + s.name + "/" + r.step + "/" + r.access;
    }
  }
  return {failed.empty() && mismatches == 0,
          std::to_string(kats) + " KATs, " + std::to_string(mismatches) + " mismatches" +
              (failed.empty() ? "" : ", not passing:" + failed)};
}

// ---- 8. feature regression ----

Outcome feature_regression() {
  const Scenario& multi = named("multi");
  std::string detail;
  bool ok = true;
  for (Feature f : {Feature::kMotion, Feature::kAcquire, Feature::kAngle}) {
    const auto r = run_feature_test(f, multi, 1, 100);
    ok &= r.passed() && r.iterations == 100;
    detail += std::string(to_string(f)) + " " + std::string(to_string(r.verdict)) + " (" +
              std::to_string(r.mismatches.size()) + " mismatches, " + std::to_string(r.warnings.size()) +
              " warnings) ";
  }
  detail.pop_back();
  return {ok, detail};
}

// ---- 9. fault localization ----

Outcome fault_localization() {
  const std::pair<const char*, Step> faults[] = {{"mti_reversed", Step::kMti},
                                                 {"rfft_conj_twiddle", Step::kRfft},
                                                 {"cfft_conj_twiddle", Step::kCfft},
                                                 {"cfar_no_gain_comp", Step::kCfar},
                                                 {"ae_conj_reference", Step::kAe}};
  const Step order[] = {Step::kMti, Step::kRfft, Step::kCfft, Step::kCfar, Step::kAe};
  std::string wrong;
  for (const auto& [name, bad] : faults) {
    RunOptions opt;
    opt.faults = *parse_fault(name);
    for (Step st : order) {
      // Isolated step KATs get reference inputs, so only the faulty step fails.
      const bool passed = run_step_kat(named("multi"), st, Access::kBackdoor, opt).passed();
      if (passed == (st == bad)) wrong += std::string(" ") + name + ":" + std::string(to_string(st));
    }
    // The full path runs downstream of the fault and must fail.
    if (run_full_kat(named("multi"), Access::kBackdoor, opt).passed()) wrong += std::string(" ") + name + ":full";
  }
  return {wrong.empty(), wrong.empty() ? "5 faults, each fails its own step KAT and the full KAT only"
                                       : "unexpected outcome at" + wrong};
}

// ---- 10. determinism ----

void strip_timing(nlohmann::json& j) {
  if (j.is_object()) {
    j.erase("wall_time_s");
    j.erase("generated_at");
    for (auto& [k, v] : j.items()) strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timing(v);
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli) {
  const fs::path dir = fs::temp_directory_path() / "dspkat_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> texts;
  for (int run = 0; run < 2; ++run) {
    const fs::path report = dir / ("report" + std::to_string(run) + ".json");
    const std::string cmd = "\"" + cli + "\" regress --seed 7 --report \"" + report.string() + "\" > \"" +
                            (dir / "stdout.txt").string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc != 0 || !fs::exists(report)) return {false, "regress run " + std::to_string(run) + " failed"};
    auto j = nlohmann::json::parse(read_file(report));
    strip_timing(j);
    texts.push_back(j.dump(2));
  }
  fs::remove_all(dir);
  return {texts[0] == texts[1], texts[0] == texts[1] ? std::to_string(texts[0].size()) + " report bytes identical"
                                                     : "reports differ"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: dspkat_acceptance <path to dspkat CLI>\n");
    return 2;
  }
  const std::string cli = argv[1];
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"memh fidelity", memh_fidelity},
      {"FFT accuracy", fft_accuracy},
      {"CORDIC accuracy", cordic_accuracy},
      {"CFAR oracle equivalence", cfar_equivalence},
      {"DFV step composition", step_composition},
      {"frontdoor/backdoor equivalence", access_equivalence},
      {"closed-loop KAT suite", kat_suite},
      {"feature-test regression", feature_regression},
      {"fault localization", fault_localization},
      {"determinism", [&] { return determinism(cli); }},
  };
  int failures = 0;
  int i = 0;
  for (const auto& [name, run] : criteria) {
    ++i;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures;
}
