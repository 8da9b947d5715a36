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

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "vbpsim/common.hpp"
#include "vbpsim/isa.hpp"
#include "vbpsim/mmu.hpp"

namespace vbp {

enum class EventKind {
  VbpHit,
  Int3,
  SingleStep,
  DrHit,
  HookPoint,
  PageFault,
  InvalidOpcode,
  Halt,
  Eviction,
};

std::string_view event_name(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view name);

struct DebugEvent {
  EventKind kind = EventKind::Halt;
  VAddr vaddr = 0;
  std::optional<AccessKind> access;
  BreakpointByte flags;
  uint64_t cycle = 0;
  std::optional<uint32_t> hook_id;
  std::optional<FaultReason> fault;

  bool operator==(const DebugEvent&) const = default;
};

struct MachineState {
  std::array<uint64_t, isa::kNumRegs> regs{};
  VAddr pc = 0;
  bool zf = false;
  bool tf = false;
  bool halted = false;
  // Retired instruction count.
  uint64_t cycle = 0;
  // Cycles charged by debugger exits; RDTSC reads cycle + stall_cycles.
  uint64_t stall_cycles = 0;
  // Suppressions for the instruction at pc. Each entry skips the matching
  // (address, kind) check; all are dropped when the instruction retires.
  std::vector<ResumeToken> resume_tokens;
  uint8_t reg_taint = 0;
  std::vector<uint8_t> out;

  uint64_t tsc() const { return cycle + stall_cycles; }
  bool operator==(const MachineState&) const = default;
};

enum class DrKind : uint8_t { Exec, Write, ReadWrite };

struct DrSlot {
  VAddr vaddr = 0;
  DrKind kind = DrKind::Exec;
  bool enabled = false;
};

using DebugRegisterFile = std::array<DrSlot, isa::kNumDebugSlots>;

/// Invoked before a guest write to a watched page is performed
/// (split-view code-modification handler).
class CodeWriteHandler {
 public:
  virtual ~CodeWriteHandler() = default;
  virtual bool watches(VAddr vaddr) const = 0;
  virtual void on_guest_write(VAddr vaddr, uint64_t cycle, std::vector<DebugEvent>& notes) = 0;
};

struct TrapConfig {
  bool taint = false;
  const DebugRegisterFile* debug_regs = nullptr;
  CodeWriteHandler* code_writes = nullptr;
};

struct StepOutcome {
  bool retired = false;
  std::optional<DebugEvent> stop;
  // Non-stopping events raised during the step (hook points, evictions).
  std::vector<DebugEvent> notes;
};

/// Executes one instruction.
///
/// All instruction bytes are fetched and checked, then the instruction is
/// decoded, then every byte of its data operand is checked. A trap or
/// fault in any of those phases aborts the instruction with no
/// architectural effect (PC, registers, flags, memory, output and resume
/// tokens unchanged). After retirement a set TF raises SingleStep.
StepOutcome step(MachineState& state, Mmu& mmu, const TrapConfig& config = {});

/// Arms a suppression for the next check of (vaddr, kind).
void resume(MachineState& state, ResumeToken token);

/// Register/memory taint transfer for a retiring instruction. `data` is
/// the checked data access of a load or store (null otherwise).
void propagate_taint(const isa::Instruction& instr, MachineState& state, Mmu& mmu,
                     const CheckResult* data);

/// Register file snapshot used for trace comparison.
struct TraceRecord {
  VAddr pc = 0;
  std::array<uint64_t, isa::kNumRegs> regs{};
  bool zf = false;
  bool operator==(const TraceRecord&) const = default;
};

}  // namespace vbp
