#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dspkat/chain_config.hpp"
#include "dspkat/dsp_chain.hpp"
#include "dspkat/mem_image.hpp"
#include "dspkat/memory_map.hpp"

namespace dspkat::device {

// Register block: one 32-bit field per word address above the memory map.
namespace reg {
inline constexpr std::uint32_t kBase = 0x10000;

inline constexpr std::uint32_t kCfgSamples = kBase + 0x00;
inline constexpr std::uint32_t kCfgBursts = kBase + 0x01;
inline constexpr std::uint32_t kCfgChannels = kBase + 0x02;
inline constexpr std::uint32_t kCfgMtiEnable = kBase + 0x03;
inline constexpr std::uint32_t kCfgWindowSel = kBase + 0x04;
inline constexpr std::uint32_t kCfgAlpha = kBase + 0x05;
inline constexpr std::uint32_t kCfgGuard = kBase + 0x06;
inline constexpr std::uint32_t kCfgWindow = kBase + 0x07;
inline constexpr std::uint32_t kCfgMaxTargets = kBase + 0x08;
inline constexpr std::uint32_t kCfgConsecHits = kBase + 0x09;

inline constexpr std::uint32_t kCtrlStepSelect = kBase + 0x10;
inline constexpr std::uint32_t kCtrlTrigger = kBase + 0x11;
inline constexpr std::uint32_t kCtrlMode = kBase + 0x12;

inline constexpr std::uint32_t kStatusBusy = kBase + 0x20;
inline constexpr std::uint32_t kStatusStepDone = kBase + 0x21;
inline constexpr std::uint32_t kStatusError = kBase + 0x22;
inline constexpr std::uint32_t kStatusErrorCode = kBase + 0x23;
inline constexpr std::uint32_t kStatusCycles = kBase + 0x24;
inline constexpr std::uint32_t kStatusFrameDone = kBase + 0x25;
inline constexpr std::uint32_t kStatusState = kBase + 0x26;

inline constexpr std::uint32_t kIrqMotionDetect = kBase + 0x30;
inline constexpr std::uint32_t kIrqHitCounter = kBase + 0x31;

inline constexpr std::uint32_t kResTargetCount = kBase + 0x100;
inline constexpr std::uint32_t kResAngleValid = kBase + 0x101;
inline constexpr std::uint32_t kResTargetBase = kBase + 0x110;
inline constexpr std::uint32_t kResTargetStride = 8;
// Field offsets inside one target slot.
inline constexpr std::uint32_t kFieldRangeBin = 0;
inline constexpr std::uint32_t kFieldDopplerBin = 1;
inline constexpr std::uint32_t kFieldMagnitude = 2;
inline constexpr std::uint32_t kFieldAzPhase = 3;
inline constexpr std::uint32_t kFieldElPhase = 4;
inline constexpr std::uint32_t kFieldDirection = 5;
inline constexpr std::uint32_t kFieldsPerTarget = 6;

constexpr std::uint32_t target_field(std::uint32_t slot, std::uint32_t field) {
  return kResTargetBase + slot * kResTargetStride + field;
}
}  // namespace reg

enum class Mode : std::uint32_t { kNormal = 0, kDfv = 1 };

/// STEP_SELECT encoding.
std::uint32_t step_code(Step s);
std::optional<Step> step_from_code(std::uint32_t code);

enum class ErrorCode : std::uint32_t {
  kNone = 0,
  kInputIncomplete = 1,
  kInvalidConfig = 2,
  kAeUnsupported = 3,
  kNoTargetList = 4,
  kBadStepSelect = 5,
};

enum class StepState : std::uint32_t { kIdle = 0, kArmed = 1, kDone = 2 };

enum class Access { kReadWrite, kReadOnly, kWriteOnly, kDfvWritable };

struct RegisterInfo {
  std::uint32_t addr;
  std::string name;
  std::string format;
  Access access;
};

/// Registers in address order (target slots expanded).
const std::vector<RegisterInfo>& register_map();
/// Text document describing the memory windows and every register.
std::string address_map_document();

enum class BusOp { kRead, kWrite };
enum class BusStatus {
  kOkay,
  kDecodeError,    // unmapped address
  kAccessError,    // read-only target, busy device, or word too wide
  kUninitialized,  // read of a memory cell that was never written
};
std::string_view to_string(BusStatus s);

struct BusResponse {
  BusStatus status = BusStatus::kOkay;
  std::uint32_t data = 0;
  bool ok() const { return status == BusStatus::kOkay; }
};

struct StepReport {
  Step step = Step::kMti;
  bool done = false;
  bool error = false;
  ErrorCode error_code = ErrorCode::kNone;
  bool timed_out = false;
  bool rejected = false;  // bus refused the trigger (device busy)
  std::uint64_t cycles = 0;
};

struct FrameReport {
  bool done = false;
  bool error = false;
  ErrorCode error_code = ErrorCode::kNone;
  std::uint64_t cycles = 0;
  std::size_t target_count = 0;
  bool motion_detect = false;
  std::uint32_t hit_counter = 0;
};

/// Memory plus the result registers: the state compared by the
/// step-composition and path-equivalence checks.
struct Snapshot {
  std::array<MemoryImage, 4> memory{MemoryImage(16), MemoryImage(16), MemoryImage(24), MemoryImage(24)};
  std::map<std::uint32_t, std::uint32_t> results;
  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

/// Behavioural model of the DSP block. Steps take `step_duration` cycles of
/// simulated time; outputs appear when the step completes. In DFV mode the
/// controller stops after the selected step.
class Device {
 public:
  explicit Device(dsp::Faults faults = {});

  void reset();

  // Frontdoor: one word per transaction through address decode.
  BusResponse bus_access(BusOp op, std::uint32_t addr, std::uint32_t data = 0);
  BusResponse read(std::uint32_t addr) { return bus_access(BusOp::kRead, addr); }
  BusResponse write(std::uint32_t addr, std::uint32_t data) { return bus_access(BusOp::kWrite, addr, data); }
  std::uint64_t bus_transactions() const { return bus_transactions_; }

  // Backdoor: direct cell access, no bus traffic, no side effects.
  void backdoor_deposit(Step region, const MemoryImage& img);
  MemoryImage backdoor_peek(Step region) const;
  std::uint32_t backdoor_peek_reg(std::uint32_t addr) const;
  void backdoor_poke_reg(std::uint32_t addr, std::uint32_t value);

  /// Advance simulated time.
  void clock(std::uint64_t cycles);
  /// Clock until not busy or `timeout` cycles elapsed; returns cycles spent.
  std::uint64_t run_until_idle(std::uint64_t timeout);

  /// Program STEP_SELECT and TRIGGER over the bus and wait for completion.
  StepReport trigger_step(Step step);
  /// Trigger the full chain (NORMAL mode) on the preloaded ADC region.
  FrameReport run_frame();
  /// Deposit `adc` by backdoor, then run_frame().
  FrameReport run_frame(const dsp::BurstSet& adc);

  /// Configuration decoded from the CONFIG registers.
  ChainConfig config() const;
  /// Program all CONFIG registers over the bus.
  bool program_config(const ChainConfig& cfg);

  Mode mode() const;
  bool busy() const { return reg(reg::kStatusBusy) != 0; }
  bool step_done() const { return reg(reg::kStatusStepDone) != 0; }
  bool error() const { return reg(reg::kStatusError) != 0; }
  StepState step_state() const { return static_cast<StepState>(reg(reg::kStatusState)); }
  std::uint32_t hit_counter() const { return reg(reg::kIrqHitCounter); }
  bool motion_detect() const { return reg(reg::kIrqMotionDetect) != 0; }

  std::vector<dsp::Target> target_results() const;
  std::vector<dsp::AngleResult> angle_results() const;

  Snapshot snapshot() const;

 private:
  struct Job {
    std::vector<Step> steps;  // remaining steps, front runs next
    std::uint64_t remaining = 0;
    std::uint64_t total = 0;
    bool frame = false;
  };

  std::uint32_t reg(std::uint32_t addr) const;
  void set_reg(std::uint32_t addr, std::uint32_t value) { regs_[addr] = value; }
  MemoryImage& mem(Step region);
  const MemoryImage& mem(Step region) const;

  void on_trigger();
  void fail(ErrorCode code);
  bool input_ready(Step step, const ChainConfig& cfg, ErrorCode& code) const;
  std::uint64_t duration_of(Step step, const ChainConfig& cfg) const;
  void begin_step(Step step, const ChainConfig& cfg);
  void execute(Step step, const ChainConfig& cfg);
  void finish_job();
  void write_targets(const std::vector<dsp::Target>& targets);
  void write_angles(const std::vector<dsp::AngleResult>& angles);
  std::vector<dsp::Target> preloaded_targets() const;

  dsp::Faults faults_;
  std::map<std::uint32_t, std::uint32_t> regs_;
  std::array<MemoryImage, 4> mem_{MemoryImage(16), MemoryImage(16), MemoryImage(24), MemoryImage(24)};
  std::optional<Job> job_;
  ChainConfig job_cfg_;
  bool targets_valid_ = false;
  std::uint64_t bus_transactions_ = 0;
};

}  // namespace dspkat::device
