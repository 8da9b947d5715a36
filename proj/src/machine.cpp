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

#include "vbpsim/machine.hpp"

#include <algorithm>

namespace vbp {

std::string_view event_name(EventKind kind) {
  switch (kind) {
    case EventKind::VbpHit: return "VbpHit";
    case EventKind::Int3: return "Int3";
    case EventKind::SingleStep: return "SingleStep";
    case EventKind::DrHit: return "DrHit";
    case EventKind::HookPoint: return "HookPoint";
    case EventKind::PageFault: return "PageFault";
    case EventKind::InvalidOpcode: return "InvalidOpcode";
    case EventKind::Halt: return "Halt";
    case EventKind::Eviction: return "Eviction";
  }
  return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(EventKind::Eviction); ++i) {
    auto k = static_cast<EventKind>(i);
    if (event_name(k) == name) return k;
  }
  return std::nullopt;
}

void resume(MachineState& state, ResumeToken token) {
  if (std::find(state.resume_tokens.begin(), state.resume_tokens.end(), token) ==
      state.resume_tokens.end()) {
    state.resume_tokens.push_back(token);
  }
}

namespace {

using isa::Opcode;

DebugEvent make_event(EventKind kind, VAddr vaddr, uint64_t cycle) {
  DebugEvent e;
  e.kind = kind;
  e.vaddr = vaddr;
  e.cycle = cycle;
  return e;
}

DebugEvent trap_event(const FlagMatch& m, uint64_t cycle) {
  DebugEvent e = make_event(EventKind::VbpHit, m.vaddr, cycle);
  e.access = m.kind;
  e.flags = m.flags;
  return e;
}

DebugEvent fault_event(const PageFault& pf, uint64_t cycle) {
  DebugEvent e = make_event(EventKind::PageFault, pf.vaddr, cycle);
  e.fault = pf.reason;
  return e;
}

void add_hooks(const CheckResult& r, uint64_t cycle, std::vector<DebugEvent>& notes) {
  for (const auto& h : r.hooks) {
    DebugEvent e = make_event(EventKind::HookPoint, h.vaddr, cycle);
    e.access = h.kind;
    e.flags = h.flags;
    notes.push_back(e);
  }
}

bool token_present(const MachineState& s, VAddr vaddr, AccessKind kind) {
  return std::find(s.resume_tokens.begin(), s.resume_tokens.end(), ResumeToken{vaddr, kind}) !=
         s.resume_tokens.end();
}

// Returns the first debug-register slot matching the data access.
std::optional<DebugEvent> check_data_drs(const MachineState& s, const TrapConfig& cfg, VAddr addr,
                                         uint32_t width, AccessKind kind) {
  if (!cfg.debug_regs) return std::nullopt;
  for (uint32_t i = 0; i < width; ++i) {
    const VAddr va = addr + i;
    if (token_present(s, va, kind)) continue;
    for (const auto& slot : *cfg.debug_regs) {
      if (!slot.enabled || slot.vaddr != va) continue;
      const bool hit = (slot.kind == DrKind::ReadWrite) ||
                       (slot.kind == DrKind::Write && kind == AccessKind::Write);
      if (hit) {
        DebugEvent e = make_event(EventKind::DrHit, va, s.cycle);
        e.access = kind;
        return e;
      }
    }
  }
  return std::nullopt;
}

bool sets_flags(Opcode op) {
  return op == Opcode::Add || op == Opcode::Sub || op == Opcode::Xor || op == Opcode::Cmp;
}

}  // namespace

void propagate_taint(const isa::Instruction& in, MachineState& s, Mmu& mmu, const CheckResult* data) {
  auto bit = [](uint8_t r) { return static_cast<uint8_t>(1u << r); };
  auto tainted = [&](uint8_t r) { return (s.reg_taint & bit(r)) != 0; };
  auto set = [&](uint8_t r, bool t) {
    s.reg_taint = t ? (s.reg_taint | bit(r)) : (s.reg_taint & ~bit(r));
  };

  switch (in.op) {
    case Opcode::Load8:
    case Opcode::Load64: {
      bool t = false;
      for (uint8_t i = 0; data && i < data->count; ++i) t |= (data->flags[i] & bpflag::Taint) != 0;
      set(in.rd, t);
      break;
    }
    case Opcode::Store8:
    case Opcode::Store64: {
      const bool t = tainted(in.rs);
      for (uint8_t i = 0; data && i < data->count; ++i) {
        if (!(data->buddy_mask & (1u << i))) {
          if (t) ++mmu.counters().taint_dropped;
          continue;
        }
        const PAddr p = data->paddr[i];
        const PAddr b = mmu.buddy_addr(page_base(p)) + page_offset(p);
        uint8_t flags = mmu.memory().read8(b);
        flags = t ? (flags | bpflag::Taint) : (flags & ~bpflag::Taint);
        mmu.memory().write8(b, flags);
      }
      break;
    }
    case Opcode::Movr:
      set(in.rd, tainted(in.rs));
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Xor:
      set(in.rd, tainted(in.rd) || tainted(in.rs));
      break;
    case Opcode::Movi:
    case Opcode::Rdtsc:
    case Opcode::Rddr:
      set(in.rd, false);
      break;
    default:
      break;
  }
}

StepOutcome step(MachineState& s, Mmu& mmu, const TrapConfig& cfg) {
  StepOutcome out;
  if (s.halted) {
    out.stop = make_event(EventKind::Halt, s.pc, s.cycle);
    return out;
  }
  const VAddr pc = s.pc;
  PhysicalMemory& mem = mmu.memory();

  // Instruction-boundary debug registers.
  if (cfg.debug_regs && !token_present(s, pc, AccessKind::Execute)) {
    for (const auto& slot : *cfg.debug_regs) {
      if (slot.enabled && slot.kind == DrKind::Exec && slot.vaddr == pc) {
        DebugEvent e = make_event(EventKind::DrHit, pc, s.cycle);
        e.access = AccessKind::Execute;
        out.stop = e;
        return out;
      }
    }
  }

  // (1) fetch
  AccessGroup fetch_group;
  std::array<uint8_t, isa::kMaxInstructionLength> bytes{};
  CheckResult head = mmu.checked_access(pc, AccessKind::Execute, 1, s.resume_tokens, fetch_group);
  add_hooks(head, s.cycle, out.notes);
  if (head.status == CheckResult::Status::Fault) {
    out.stop = fault_event(head.fault, s.cycle);
    return out;
  }
  if (head.status == CheckResult::Status::Trap) {
    out.stop = trap_event(head.trap, s.cycle);
    return out;
  }
  bytes[0] = mem.read8(head.paddr[0]);
  const uint8_t length = isa::instruction_length(bytes[0]).value_or(1);
  if (length > 1) {
    CheckResult tail =
        mmu.checked_access(pc + 1, AccessKind::Fetch, length - 1u, s.resume_tokens, fetch_group);
    add_hooks(tail, s.cycle, out.notes);
    if (tail.status == CheckResult::Status::Fault) {
      out.stop = fault_event(tail.fault, s.cycle);
      return out;
    }
    if (tail.status == CheckResult::Status::Trap) {
      out.stop = trap_event(tail.trap, s.cycle);
      return out;
    }
    for (uint8_t i = 1; i < length; ++i) bytes[i] = mem.read8(tail.paddr[i - 1]);
  }

  // (2) decode
  const isa::DecodeResult decoded = isa::decode(std::span<const uint8_t>(bytes.data(), length));
  if (std::holds_alternative<isa::InvalidOpcode>(decoded)) {
    out.stop = make_event(EventKind::InvalidOpcode, pc, s.cycle);
    return out;
  }
  const isa::Instruction in = std::get<isa::Instruction>(decoded);
  if (in.op == Opcode::Int3) {
    out.stop = make_event(EventKind::Int3, pc, s.cycle);
    return out;
  }

  // (3) data operand
  CheckResult data;
  bool has_data = false;
  if (isa::form_of(in.op) == isa::Form::Load || isa::form_of(in.op) == isa::Form::Store) {
    const bool store = isa::form_of(in.op) == isa::Form::Store;
    const uint8_t base = store ? in.rd : in.rs;
    const VAddr addr = static_cast<VAddr>(s.regs[base] + static_cast<int64_t>(in.rel));
    const uint32_t width = (in.op == Opcode::Load8 || in.op == Opcode::Store8) ? 1 : 8;
    const AccessKind kind = store ? AccessKind::Write : AccessKind::Read;
    AccessGroup data_group;
    data = mmu.checked_access(addr, kind, width, s.resume_tokens, data_group);
    add_hooks(data, s.cycle, out.notes);
    if (data.status == CheckResult::Status::Fault) {
      out.stop = fault_event(data.fault, s.cycle);
      return out;
    }
    if (data.status == CheckResult::Status::Trap) {
      out.stop = trap_event(data.trap, s.cycle);
      return out;
    }
    if (auto dr = check_data_drs(s, cfg, addr, width, kind)) {
      out.stop = *dr;
      return out;
    }
    if (store && cfg.code_writes) {
      for (uint32_t i = 0; i < width; ++i) {
        if (cfg.code_writes->watches(addr + i)) cfg.code_writes->on_guest_write(addr + i, s.cycle, out.notes);
      }
    }
    has_data = true;
  }

  // (4) execute and retire
  VAddr next = pc + in.length;
  auto& r = s.regs;
  switch (in.op) {
    case Opcode::Halt:
      // PC stays on the HALT so later Halt events report the same address.
      s.halted = true;
      next = pc;
      break;
    case Opcode::Nop:
      break;
    case Opcode::Movi:
      r[in.rd] = in.imm;
      break;
    case Opcode::Movr:
      r[in.rd] = r[in.rs];
      break;
    case Opcode::Load8:
      r[in.rd] = mem.read8(data.paddr[0]);
      break;
    case Opcode::Load64: {
      uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= uint64_t{mem.read8(data.paddr[i])} << (8 * i);
      r[in.rd] = v;
      break;
    }
    case Opcode::Store8:
      mem.write8(data.paddr[0], static_cast<uint8_t>(r[in.rs]));
      break;
    case Opcode::Store64:
      for (int i = 0; i < 8; ++i) mem.write8(data.paddr[i], static_cast<uint8_t>(r[in.rs] >> (8 * i)));
      break;
    case Opcode::Add:
      r[in.rd] += r[in.rs];
      break;
    case Opcode::Sub:
      r[in.rd] -= r[in.rs];
      break;
    case Opcode::Xor:
      r[in.rd] ^= r[in.rs];
      break;
    case Opcode::Cmp:
      break;
    case Opcode::Jz:
      if (s.zf) next = isa::branch_target(in, pc);
      break;
    case Opcode::Jnz:
      if (!s.zf) next = isa::branch_target(in, pc);
      break;
    case Opcode::Jmp:
      next = isa::branch_target(in, pc);
      break;
    case Opcode::Rddr: {
      const DrSlot* slot = cfg.debug_regs ? &(*cfg.debug_regs)[in.rs] : nullptr;
      r[in.rd] = (slot && slot->enabled) ? slot->vaddr : 0;
      break;
    }
    case Opcode::Out:
      s.out.push_back(static_cast<uint8_t>(r[in.rs]));
      break;
    case Opcode::Rdtsc:
      r[in.rd] = s.tsc();
      break;
    case Opcode::Int3:
      break;
  }
  if (sets_flags(in.op)) {
    s.zf = in.op == Opcode::Cmp ? r[in.rd] == r[in.rs] : r[in.rd] == 0;
  }
  if (cfg.taint) propagate_taint(in, s, mmu, has_data ? &data : nullptr);

  s.pc = next;
  ++s.cycle;
  ++mmu.counters().instructions_retired;
  s.resume_tokens.clear();
  out.retired = true;

  if (s.tf) {
    out.stop = make_event(EventKind::SingleStep, pc, s.cycle);
  } else if (s.halted) {
    out.stop = make_event(EventKind::Halt, pc, s.cycle);
  }
  return out;
}

}  // namespace vbp
