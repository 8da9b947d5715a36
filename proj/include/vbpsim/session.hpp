// Copyright 2026 The vbpsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vbpsim/image.hpp"
#include "vbpsim/kernel.hpp"
#include "vbpsim/legacy.hpp"
#include "vbpsim/machine.hpp"
#include "vbpsim/mmu.hpp"
#include "vbpsim/perf.hpp"
#include "vbpsim/phys_mem.hpp"
#include "vbpsim/shadow.hpp"

namespace vbp {

enum class TrapMode { Vbp, Int3, SplitView, SingleStep, DebugRegs };

std::string_view mode_name(TrapMode mode);
std::optional<TrapMode> parse_mode(std::string_view name);

struct SessionConfig {
  uint32_t physical_bytes = kDefaultPhysicalBytes;
  MmuConfig mmu;
  KernelConfig kernel;
  TrapMode mode = TrapMode::Vbp;
  bool taint = false;
  // Synthetic cost of one debugger exit, charged to the guest-visible
  // timestamp counter.
  uint64_t exit_penalty = 1000;
  // Keep a (pc, registers, zf) record per retired instruction.
  bool record_trace = false;
};

enum class RunState { Stopped, Halted };

/// Machine, MMU, kernel and guest address space built from an image,
/// plus the debugger's view of where the run stands.
struct Environment {
  Environment(const GuestImage& image, const SessionConfig& config, BuddyObserver* observer);
  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  PhysicalMemory memory;
  PerfCounters counters;
  Mmu mmu;
  Kernel kernel;
  MachineState state;
  AsId as = 0;
  std::map<VAddr, uint32_t> hooks;

  RunState run_state = RunState::Stopped;
  std::optional<DebugEvent> last_stop;
  // Stop to continue past on the next step.
  std::optional<DebugEvent> pending;
};

struct OracleReport {
  bool equivalent = true;
  std::string detail;  // first divergence, empty when equivalent
  size_t events_compared = 0;
  uint64_t steps = 0;
};

using HookHandler = std::function<void(const DebugEvent&)>;

/// A debugging session over one guest. All breakpoint mutations that
/// affect architectural behaviour are recorded with the step index at
/// which they happened so a run can be replayed against the oracle.
class Session {
 public:
  explicit Session(GuestImage image, SessionConfig config = {});
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const GuestImage& image() const { return image_; }
  const SessionConfig& config() const { return config_; }
  MachineState& state() { return env_->state; }
  const MachineState& state() const { return env_->state; }
  const PerfCounters& counters() const { return env_->counters; }
  Kernel& kernel() { return env_->kernel; }
  const Kernel& kernel() const { return env_->kernel; }
  Mmu& mmu() { return env_->mmu; }
  PhysicalMemory& memory() { return env_->memory; }
  AsId address_space() const { return env_->as; }
  const ShadowOracle& shadow() const { return shadow_; }

  TrapMode mode() const { return mode_; }
  RunState run_state() const { return env_->run_state; }
  const std::optional<DebugEvent>& last_stop() const { return env_->last_stop; }
  const std::vector<DebugEvent>& log() const { return log_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }

  struct RunResult {
    std::optional<DebugEvent> event;
    bool timeout = false;
    uint64_t retired = 0;
  };

  /// Runs until a stopping event or until `max_cycles` instructions have
  /// retired. Execution continues past the previous stop automatically
  /// (one-shot suppression, int3 step-over).
  RunResult run_until_event(uint64_t max_cycles);
  RunResult step() { return run_until_event(1); }
  /// Runs until Halt, an unhandled fault, or the budget.
  RunResult run_to_end(uint64_t max_cycles);

  // Virtual breakpoint API.
  void set_vbp(VAddr vaddr, BreakpointByte flags);
  void clear_vbp(VAddr vaddr);
  BreakpointByte read_vbp(VAddr vaddr) const;
  void set_vbp_page(VAddr page, BreakpointByte flags);

  /// Mode-generic breakpoint: flags are mapped onto the active mechanism.
  /// Int3 and SplitView support X/FETCH only; DebugRegs maps X and FETCH to
  /// an Exec slot, W to Write and R to ReadWrite.
  void set_breakpoint(VAddr vaddr, BreakpointByte flags);
  void clear_breakpoint(VAddr vaddr);

  Int3Manager& int3() { return *int3_; }
  DebugRegisters& debug_registers() { return drs_; }
  SplitView& split_view() { return *split_; }

  void register_hook(VAddr vaddr, uint32_t hook_id);
  void unregister_hook(VAddr vaddr);
  void set_hook_handler(HookHandler handler) { hook_handler_ = std::move(handler); }

  /// Writes `bytes` at `vaddr` and sets TAINT on every destination byte.
  void inject_external(VAddr vaddr, std::span<const uint8_t> bytes);

  /// Switches trap mechanism. Int3 bytes are restored, debug registers
  /// cleared and split-view frames released; buddy flags stay in place
  /// but are only honoured in Vbp mode.
  void set_mode(TrapMode mode);

  AsId cow_fork(VAddr vaddr, CowPolicy policy);
  void switch_address_space(AsId as);
  void set_pc(VAddr pc);

  uint8_t read_mem(VAddr vaddr) const;

  /// Replays the recorded run from the image twice, once with the TLB
  /// disabled and once on the shadow-map interpreter, and compares event
  /// streams and final state with this session. Only Vbp-mode runs can be
  /// replayed.
  OracleReport verify_against_oracle() const;
  bool verifiable() const { return verifiable_ && mode_ == TrapMode::Vbp; }

 private:
  using Op = std::function<void(Environment&)>;

  void record(Op op);
  StepOutcome advance();

  GuestImage image_;
  SessionConfig config_;
  ShadowOracle shadow_;
  std::unique_ptr<Environment> env_;
  TrapMode mode_;
  std::unique_ptr<Int3Manager> int3_;
  DebugRegisters drs_;
  std::unique_ptr<SplitView> split_;
  HookHandler hook_handler_;

  std::vector<DebugEvent> log_;
  std::vector<TraceRecord> trace_;
  std::vector<std::pair<uint64_t, Op>> ops_;
  uint64_t steps_ = 0;
  bool verifiable_ = true;
};

}  // namespace vbp
