#include "dspkat/device.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "dspkat/chain_io.hpp"

namespace dspkat::device {

namespace {

std::vector<RegisterInfo> build_register_map() {
  std::vector<RegisterInfo> m = {
      {reg::kCfgSamples, "CONFIG.N", "u32, power of two", Access::kReadWrite},
      {reg::kCfgBursts, "CONFIG.M", "u32, M-1 power of two", Access::kReadWrite},
      {reg::kCfgChannels, "CONFIG.R", "u32, 1..3", Access::kReadWrite},
      {reg::kCfgMtiEnable, "CONFIG.MTI_EN", "bool", Access::kReadWrite},
      {reg::kCfgWindowSel, "CONFIG.WINDOW_SEL", "0 NONE, 1 HANN", Access::kReadWrite},
      {reg::kCfgAlpha, "CONFIG.CFAR_ALPHA", "Q8.8 unsigned", Access::kReadWrite},
      {reg::kCfgGuard, "CONFIG.CFAR_GUARD", "u32", Access::kReadWrite},
      {reg::kCfgWindow, "CONFIG.CFAR_WINDOW", "u32", Access::kReadWrite},
      {reg::kCfgMaxTargets, "CONFIG.MAX_TARGETS", "u32, 1..16", Access::kReadWrite},
      {reg::kCfgConsecHits, "CONFIG.CONSEC_HITS", "u32", Access::kReadWrite},
      {reg::kCtrlStepSelect, "CTRL.STEP_SELECT", "1 MTI, 2 RFFT, 3 CFFT, 4 CFAR, 5 AE", Access::kReadWrite},
      {reg::kCtrlTrigger, "CTRL.TRIGGER", "write 1 to start, self-clearing", Access::kWriteOnly},
      {reg::kCtrlMode, "CTRL.MODE", "0 NORMAL, 1 DFV", Access::kReadWrite},
      {reg::kStatusBusy, "STATUS.BUSY", "bool", Access::kReadOnly},
      {reg::kStatusStepDone, "STATUS.STEP_DONE", "bool", Access::kReadOnly},
      {reg::kStatusError, "STATUS.ERROR", "bool", Access::kReadOnly},
      {reg::kStatusErrorCode, "STATUS.ERROR_CODE",
       "0 none, 1 input incomplete, 2 bad config, 3 AE unsupported, 4 bad target list, 5 bad step", Access::kReadOnly},
      {reg::kStatusCycles, "STATUS.CYCLES", "u32, cycles of the last step or frame", Access::kReadOnly},
      {reg::kStatusFrameDone, "STATUS.FRAME_DONE", "bool", Access::kReadOnly},
      {reg::kStatusState, "STATUS.STATE", "0 idle, 1 step-armed, 2 step-done", Access::kReadOnly},
      {reg::kIrqMotionDetect, "IRQ.MOTION_DETECT", "bool", Access::kReadOnly},
      {reg::kIrqHitCounter, "IRQ.HIT_COUNTER", "u32, consecutive frames with a detection", Access::kReadOnly},
      {reg::kResTargetCount, "RESULT.TARGET_COUNT", "u32", Access::kDfvWritable},
      {reg::kResAngleValid, "RESULT.ANGLE_VALID", "bool", Access::kReadOnly},
  };
  static constexpr const char* kFieldNames[] = {"RANGE_BIN", "DOPPLER_BIN", "MAGNITUDE",
                                                "AZ_PHASE",  "EL_PHASE",    "DIRECTION"};
  static constexpr const char* kFieldFormats[] = {"u32", "u32", "Q0.23 in 24 bits", "Q2.21 in 24 bits",
                                                  "Q2.21 in 24 bits", "0 STATIC, 1 APPROACHING, 2 RECEDING"};
  for (std::uint32_t slot = 0; slot < kMaxTargetSlots; ++slot)
    for (std::uint32_t f = 0; f < reg::kFieldsPerTarget; ++f) {
      // Range, Doppler and magnitude can be preloaded in DFV mode for AE.
      const Access a = f <= reg::kFieldMagnitude ? Access::kDfvWritable : Access::kReadOnly;
      m.push_back({reg::target_field(slot, f), "RESULT.TARGET" + std::to_string(slot) + "." + kFieldNames[f],
                   kFieldFormats[f], a});
    }
  return m;
}

const std::unordered_map<std::uint32_t, Access>& access_table() {
  static const auto table = [] {
    std::unordered_map<std::uint32_t, Access> t;
    for (const auto& r : register_map()) t[r.addr] = r.access;
    return t;
  }();
  return table;
}

std::string_view access_name(Access a) {
  switch (a) {
    case Access::kReadWrite: return "RW";
    case Access::kReadOnly: return "RO";
    case Access::kWriteOnly: return "WO";
    case Access::kDfvWritable: return "RO (RW in DFV)";
  }
  return "?";
}

std::size_t window_index(Step region) {
  switch (region) {
    case Step::kAdc: return 0;
    case Step::kMti: return 1;
    case Step::kRfft: return 2;
    case Step::kCfft: return 3;
    default: throw ContractError("no memory region for step " + std::string(to_string(region)));
  }
}

// 24-bit two's complement word of a Q2.21 / Q0.23 raw.
std::uint32_t word24(std::int32_t raw) { return static_cast<std::uint32_t>(raw) & 0xFFFFFFu; }

}  // namespace

std::uint32_t step_code(Step s) {
  switch (s) {
    case Step::kMti: return 1;
    case Step::kRfft: return 2;
    case Step::kCfft: return 3;
    case Step::kCfar: return 4;
    case Step::kAe: return 5;
    default: throw ContractError("step has no STEP_SELECT code");
  }
}

std::optional<Step> step_from_code(std::uint32_t code) {
  switch (code) {
    case 1: return Step::kMti;
    case 2: return Step::kRfft;
    case 3: return Step::kCfft;
    case 4: return Step::kCfar;
    case 5: return Step::kAe;
    default: return std::nullopt;
  }
}

const std::vector<RegisterInfo>& register_map() {
  static const auto map = build_register_map();
  return map;
}

std::string address_map_document() {
  std::string out;
  char line[160];
  out += "# dspkat address map\n";
  out += "# Word addressed. Memory words are 16-bit (Q12.4) or 24-bit (Q0.23, re then im).\n";
  out += "# Registers are 32-bit, one field per word.\n\n";
  out += "## Memory windows\n";
  for (const MemoryWindow& w : kWindows) {
    std::snprintf(line, sizeof line, "0x%05X-0x%05X  %-5s  %s%s\n", w.base, w.limit - 1,
                  std::string(to_string(w.step)).c_str(), to_string(w.fmt).c_str(), w.complex ? " complex" : "");
    out += line;
  }
  out += "\n## Registers\n";
  for (const RegisterInfo& r : register_map()) {
    std::snprintf(line, sizeof line, "0x%05X  %-28s  %-15s  %s\n", r.addr, r.name.c_str(),
                  std::string(access_name(r.access)).c_str(), r.format.c_str());
    out += line;
  }
  return out;
}

std::string_view to_string(BusStatus s) {
  switch (s) {
    case BusStatus::kOkay: return "OKAY";
    case BusStatus::kDecodeError: return "DECODE_ERROR";
    case BusStatus::kAccessError: return "ACCESS_ERROR";
    case BusStatus::kUninitialized: return "UNINITIALIZED";
  }
  return "?";
}

Device::Device(dsp::Faults faults) : faults_(faults) { reset(); }

void Device::reset() {
  regs_.clear();
  for (const auto& r : register_map()) regs_[r.addr] = 0;
  const ChainConfig d;
  regs_[reg::kCfgSamples] = d.samples;
  regs_[reg::kCfgBursts] = d.bursts;
  regs_[reg::kCfgChannels] = d.channels;
  regs_[reg::kCfgMtiEnable] = d.mti_enabled ? 1 : 0;
  regs_[reg::kCfgWindowSel] = static_cast<std::uint32_t>(d.window);
  regs_[reg::kCfgAlpha] = d.cfar_alpha_raw;
  regs_[reg::kCfgGuard] = d.cfar_guard;
  regs_[reg::kCfgWindow] = d.cfar_window;
  regs_[reg::kCfgMaxTargets] = d.max_targets;
  regs_[reg::kCfgConsecHits] = d.consec_hits;
  for (std::size_t i = 0; i < mem_.size(); ++i) mem_[i] = MemoryImage(kWindows[i].word_bits());
  job_.reset();
  bus_transactions_ = 0;
}

std::uint32_t Device::reg(std::uint32_t addr) const {
  auto it = regs_.find(addr);
  return it == regs_.end() ? 0 : it->second;
}

MemoryImage& Device::mem(Step region) { return mem_[window_index(region)]; }
const MemoryImage& Device::mem(Step region) const { return mem_[window_index(region)]; }

Mode Device::mode() const { return reg(reg::kCtrlMode) == 1 ? Mode::kDfv : Mode::kNormal; }

ChainConfig Device::config() const {
  ChainConfig c;
  c.samples = reg(reg::kCfgSamples);
  c.bursts = reg(reg::kCfgBursts);
  c.channels = reg(reg::kCfgChannels);
  c.mti_enabled = reg(reg::kCfgMtiEnable) != 0;
  c.window = static_cast<Window>(reg(reg::kCfgWindowSel));
  c.cfar_alpha_raw = static_cast<std::uint16_t>(reg(reg::kCfgAlpha));
  c.cfar_guard = reg(reg::kCfgGuard);
  c.cfar_window = reg(reg::kCfgWindow);
  c.max_targets = reg(reg::kCfgMaxTargets);
  c.consec_hits = reg(reg::kCfgConsecHits);
  return c;
}

bool Device::program_config(const ChainConfig& c) {
  const std::pair<std::uint32_t, std::uint32_t> writes[] = {
      {reg::kCfgSamples, c.samples},
      {reg::kCfgBursts, c.bursts},
      {reg::kCfgChannels, c.channels},
      {reg::kCfgMtiEnable, c.mti_enabled ? 1u : 0u},
      {reg::kCfgWindowSel, static_cast<std::uint32_t>(c.window)},
      {reg::kCfgAlpha, c.cfar_alpha_raw},
      {reg::kCfgGuard, c.cfar_guard},
      {reg::kCfgWindow, c.cfar_window},
      {reg::kCfgMaxTargets, c.max_targets},
      {reg::kCfgConsecHits, c.consec_hits},
  };
  bool ok = true;
  for (const auto& [addr, value] : writes) ok = write(addr, value).ok() && ok;
  return ok;
}

BusResponse Device::bus_access(BusOp op, std::uint32_t addr, std::uint32_t data) {
  ++bus_transactions_;
  if (addr < kMemoryEnd) {
    const MemoryWindow* w = window_at(addr);
    if (w == nullptr) return {BusStatus::kDecodeError, 0};
    MemoryImage& img = mem(w->step);
    if (op == BusOp::kRead) {
      const auto v = img.get(addr);
      if (!v) return {BusStatus::kUninitialized, 0};
      return {BusStatus::kOkay, *v};
    }
    if (busy() || (data & ~img.word_mask()) != 0) return {BusStatus::kAccessError, 0};
    img.set(addr, data);
    return {};
  }

  const auto& table = access_table();
  auto it = table.find(addr);
  if (it == table.end()) return {BusStatus::kDecodeError, 0};
  const Access access = it->second;
  if (op == BusOp::kRead) return {BusStatus::kOkay, access == Access::kWriteOnly ? 0 : reg(addr)};

  if (access == Access::kReadOnly) return {BusStatus::kAccessError, 0};
  if (access == Access::kDfvWritable && mode() != Mode::kDfv) return {BusStatus::kAccessError, 0};
  if (busy()) return {BusStatus::kAccessError, 0};
  if (addr == reg::kCtrlTrigger) {
    if (data & 1u) on_trigger();
    return {};
  }
  if (addr == reg::kCfgAlpha && data > 0xFFFF) return {BusStatus::kAccessError, 0};
  if (addr >= reg::kResTargetBase && (addr - reg::kResTargetBase) % reg::kResTargetStride == reg::kFieldMagnitude &&
      data > 0xFFFFFF)
    return {BusStatus::kAccessError, 0};
  set_reg(addr, data);
  return {};
}

void Device::backdoor_deposit(Step region, const MemoryImage& img) {
  const MemoryWindow& w = window_for(region);
  if (img.word_bits() != w.word_bits()) throw ContractError("image word width does not match the region");
  for (const auto& [addr, word] : img.cells())
    if (addr < w.base || addr >= w.limit) throw ContractError("image address outside the region window");
  mem(region).merge(img);
}

MemoryImage Device::backdoor_peek(Step region) const { return mem(region); }

std::uint32_t Device::backdoor_peek_reg(std::uint32_t addr) const {
  if (!access_table().count(addr)) throw ContractError("no register at this address");
  return reg(addr);
}

void Device::backdoor_poke_reg(std::uint32_t addr, std::uint32_t value) {
  if (!access_table().count(addr)) throw ContractError("no register at this address");
  set_reg(addr, value);
}

void Device::fail(ErrorCode code) {
  set_reg(reg::kStatusError, 1);
  set_reg(reg::kStatusErrorCode, static_cast<std::uint32_t>(code));
  set_reg(reg::kStatusBusy, 0);
  set_reg(reg::kStatusState, static_cast<std::uint32_t>(StepState::kIdle));
}

std::vector<dsp::Target> Device::preloaded_targets() const {
  std::vector<dsp::Target> out;
  const std::uint32_t n = std::min(reg(reg::kResTargetCount), kMaxTargetSlots);
  for (std::uint32_t i = 0; i < n; ++i)
    out.push_back({reg(reg::target_field(i, reg::kFieldRangeBin)), reg(reg::target_field(i, reg::kFieldDopplerBin)),
                   sign_extend(reg(reg::target_field(i, reg::kFieldMagnitude)), 24)});
  return out;
}

bool Device::input_ready(Step step, const ChainConfig& cfg, ErrorCode& code) const {
  Step input = Step::kAdc;
  switch (step) {
    case Step::kMti: input = Step::kAdc; break;
    case Step::kRfft: input = Step::kMti; break;
    case Step::kCfft: input = Step::kRfft; break;
    case Step::kCfar:
    case Step::kAe:
      input = Step::kCfft;
      break;
    default: break;
  }
  if (!missing_addresses(mem(input), region_for(input, cfg)).empty()) {
    code = ErrorCode::kInputIncomplete;
    return false;
  }
  if (step == Step::kAe) {
    if (reg(reg::kResTargetCount) > kMaxTargetSlots) {
      code = ErrorCode::kNoTargetList;
      return false;
    }
    for (const dsp::Target& t : preloaded_targets())
      if (t.range_bin >= cfg.range_bins() || t.doppler_bin >= cfg.doppler_bins()) {
        code = ErrorCode::kNoTargetList;
        return false;
      }
  }
  return true;
}

std::uint64_t Device::duration_of(Step step, const ChainConfig& cfg) const {
  return dsp::step_duration(step, cfg, step == Step::kAe ? std::min(reg(reg::kResTargetCount), kMaxTargetSlots) : 0);
}

void Device::on_trigger() {
  set_reg(reg::kStatusStepDone, 0);
  set_reg(reg::kStatusFrameDone, 0);
  set_reg(reg::kStatusError, 0);
  set_reg(reg::kStatusErrorCode, 0);
  set_reg(reg::kStatusCycles, 0);

  const ChainConfig cfg = config();
  if (reg(reg::kCfgWindowSel) > 1 || !config_violations(cfg).empty()) return fail(ErrorCode::kInvalidConfig);

  Job job;
  if (mode() == Mode::kDfv) {
    const auto step = step_from_code(reg(reg::kCtrlStepSelect));
    if (!step) return fail(ErrorCode::kBadStepSelect);
    if (*step == Step::kAe && cfg.channels < 3) return fail(ErrorCode::kAeUnsupported);
    ErrorCode code = ErrorCode::kNone;
    if (!input_ready(*step, cfg, code)) return fail(code);
    job.steps = {*step};
  } else {
    ErrorCode code = ErrorCode::kNone;
    if (!input_ready(Step::kMti, cfg, code)) return fail(code);
    job.steps = {Step::kMti, Step::kRfft, Step::kCfft, Step::kCfar};
    if (cfg.channels >= 3) job.steps.push_back(Step::kAe);
    job.frame = true;
  }
  job_cfg_ = cfg;
  job_ = job;
  begin_step(job_->steps.front(), cfg);
  set_reg(reg::kStatusBusy, 1);
  set_reg(reg::kStatusState, static_cast<std::uint32_t>(StepState::kArmed));
}

void Device::begin_step(Step step, const ChainConfig& cfg) {
  job_->remaining = duration_of(step, cfg);
  job_->total += job_->remaining;
}

void Device::write_targets(const std::vector<dsp::Target>& targets) {
  for (std::uint32_t slot = 0; slot < kMaxTargetSlots; ++slot)
    for (std::uint32_t f = 0; f < reg::kFieldsPerTarget; ++f) set_reg(reg::target_field(slot, f), 0);
  set_reg(reg::kResTargetCount, static_cast<std::uint32_t>(targets.size()));
  set_reg(reg::kResAngleValid, 0);
  for (std::uint32_t i = 0; i < targets.size(); ++i) {
    set_reg(reg::target_field(i, reg::kFieldRangeBin), targets[i].range_bin);
    set_reg(reg::target_field(i, reg::kFieldDopplerBin), targets[i].doppler_bin);
    set_reg(reg::target_field(i, reg::kFieldMagnitude), word24(targets[i].magnitude_raw));
  }
}

void Device::write_angles(const std::vector<dsp::AngleResult>& angles) {
  for (std::uint32_t i = 0; i < angles.size(); ++i) {
    set_reg(reg::target_field(i, reg::kFieldAzPhase), word24(angles[i].az_phase_raw));
    set_reg(reg::target_field(i, reg::kFieldElPhase), word24(angles[i].el_phase_raw));
    set_reg(reg::target_field(i, reg::kFieldDirection), static_cast<std::uint32_t>(angles[i].direction));
  }
  set_reg(reg::kResAngleValid, 1);
}

void Device::execute(Step step, const ChainConfig& cfg) {
  switch (step) {
    case Step::kMti: {
      const auto in = dsp::image_to_bursts(mem(Step::kAdc), Step::kAdc, cfg);
      mem(Step::kMti).merge(dsp::bursts_to_image(dsp::mti(in, cfg, faults_), Step::kMti, cfg));
      break;
    }
    case Step::kRfft: {
      const auto in = dsp::image_to_bursts(mem(Step::kMti), Step::kMti, cfg);
      mem(Step::kRfft).merge(dsp::spectrum_to_image(dsp::range_fft(in, cfg, faults_), Step::kRfft, cfg));
      break;
    }
    case Step::kCfft: {
      const auto in = dsp::image_to_spectrum(mem(Step::kRfft), Step::kRfft, cfg);
      mem(Step::kCfft).merge(dsp::spectrum_to_image(dsp::doppler_fft(in, cfg, faults_), Step::kCfft, cfg));
      break;
    }
    case Step::kCfar: {
      const auto maps = dsp::image_to_spectrum(mem(Step::kCfft), Step::kCfft, cfg);
      write_targets(dsp::cfar(maps, cfg, faults_));
      break;
    }
    case Step::kAe: {
      const auto maps = dsp::image_to_spectrum(mem(Step::kCfft), Step::kCfft, cfg);
      write_angles(dsp::angle_estimate(preloaded_targets(), maps, cfg, faults_));
      break;
    }
    default: break;
  }
}

void Device::finish_job() {
  const bool frame = job_->frame;
  set_reg(reg::kStatusCycles, static_cast<std::uint32_t>(job_->total));
  set_reg(reg::kStatusBusy, 0);
  set_reg(reg::kStatusState, static_cast<std::uint32_t>(StepState::kDone));
  job_.reset();
  if (!frame) {
    set_reg(reg::kStatusStepDone, 1);
    return;
  }
  set_reg(reg::kStatusFrameDone, 1);
  std::uint32_t hits = reg(reg::kIrqHitCounter);
  hits = reg(reg::kResTargetCount) > 0 ? (hits == UINT32_MAX ? hits : hits + 1) : 0;
  set_reg(reg::kIrqHitCounter, hits);
  set_reg(reg::kIrqMotionDetect, hits >= job_cfg_.consec_hits ? 1 : 0);
}

void Device::clock(std::uint64_t cycles) {
  while (job_) {
    if (job_->remaining > cycles) {
      job_->remaining -= cycles;
      return;
    }
    cycles -= job_->remaining;
    const Step done = job_->steps.front();
    execute(done, job_cfg_);
    job_->steps.erase(job_->steps.begin());
    if (job_->steps.empty()) {
      finish_job();
      return;
    }
    begin_step(job_->steps.front(), job_cfg_);
  }
}

std::uint64_t Device::run_until_idle(std::uint64_t timeout) {
  std::uint64_t spent = 0;
  while (job_) {
    const std::uint64_t step = std::min(job_->remaining, timeout - spent);
    clock(step);
    spent += step;
    if (spent >= timeout && job_ && job_->remaining > 0) break;
  }
  return spent;
}

StepReport Device::trigger_step(Step step) {
  if (mode() != Mode::kDfv) throw ContractError("trigger_step requires DFV mode");
  StepReport rep;
  rep.step = step;
  if (!write(reg::kCtrlStepSelect, step_code(step)).ok() || !write(reg::kCtrlTrigger, 1).ok()) {
    rep.rejected = true;
    return rep;
  }
  if (error()) {
    rep.error = true;
    rep.error_code = static_cast<ErrorCode>(reg(reg::kStatusErrorCode));
    return rep;
  }
  const std::uint64_t budget = 2 * job_->total + 16;
  run_until_idle(budget);
  rep.timed_out = busy();
  rep.done = step_done();
  rep.cycles = reg(reg::kStatusCycles);
  return rep;
}

FrameReport Device::run_frame() {
  if (mode() != Mode::kNormal) throw ContractError("run_frame requires NORMAL mode");
  FrameReport rep;
  if (!write(reg::kCtrlTrigger, 1).ok()) {
    rep.error = true;
    return rep;
  }
  if (error()) {
    rep.error = true;
    rep.error_code = static_cast<ErrorCode>(reg(reg::kStatusErrorCode));
    return rep;
  }
  // AE length is only known once CFAR has run, so budget for a full list.
  const std::uint64_t budget = 2 * dsp::step_duration(Step::kFull, job_cfg_, kMaxTargetSlots) + 16;
  run_until_idle(budget);
  rep.done = reg(reg::kStatusFrameDone) != 0;
  rep.cycles = reg(reg::kStatusCycles);
  rep.target_count = reg(reg::kResTargetCount);
  rep.motion_detect = motion_detect();
  rep.hit_counter = hit_counter();
  return rep;
}

FrameReport Device::run_frame(const dsp::BurstSet& adc) {
  backdoor_deposit(Step::kAdc, dsp::bursts_to_image(adc, Step::kAdc, config()));
  return run_frame();
}

std::vector<dsp::Target> Device::target_results() const { return preloaded_targets(); }

std::vector<dsp::AngleResult> Device::angle_results() const {
  std::vector<dsp::AngleResult> out;
  if (!reg(reg::kResAngleValid)) return out;
  for (const dsp::Target& t : preloaded_targets()) {
    const auto i = static_cast<std::uint32_t>(out.size());
    dsp::AngleResult a;
    a.range_bin = t.range_bin;
    a.doppler_bin = t.doppler_bin;
    a.az_phase_raw = sign_extend(reg(reg::target_field(i, reg::kFieldAzPhase)), 24);
    a.el_phase_raw = sign_extend(reg(reg::target_field(i, reg::kFieldElPhase)), 24);
    a.direction = static_cast<Direction>(reg(reg::target_field(i, reg::kFieldDirection)));
    out.push_back(a);
  }
  return out;
}

Snapshot Device::snapshot() const {
  Snapshot s;
  s.memory = mem_;
  for (auto it = regs_.lower_bound(reg::kResTargetCount); it != regs_.end(); ++it) s.results.insert(*it);
  return s;
}

}  // namespace dspkat::device
