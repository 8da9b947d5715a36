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

#include "vbpsim/oracle.hpp"

#include <algorithm>

namespace vbp {
namespace {

using isa::Opcode;

struct ByteResult {
  std::optional<DebugEvent> stop;
  PAddr paddr = 0;
  bool buddy_page = false;
};

class Attempt {
 public:
  Attempt(Environment& env, ShadowOracle& shadow, StepOutcome& out)
      : env_(env), shadow_(shadow), out_(out) {}

  // One byte: walk, permission check, flag test.
  ByteResult check(VAddr va, AccessKind kind) {
    ByteResult r;
    const MachineState& s = env_.state;
    const PhysicalMemory& mem = env_.memory;
    const FrameNumber root = env_.kernel.directory_frame(env_.as);
    const uint32_t pde = mem.read32(root * kPageSize + (va >> 22) * 4);
    uint32_t pte = 0;
    if (pde & 1) pte = mem.read32((pde & 0xFFFFF000u) + ((va >> 12) & 0x3FF) * 4);
    if (!(pte & 1)) return fault(r, va, FaultReason::NotPresent);
    if (kind == AccessKind::Write && !(pte & 2)) return fault(r, va, FaultReason::WriteProtected);
    if ((kind == AccessKind::Execute || kind == AccessKind::Fetch) && !(pte & 4)) {
      return fault(r, va, FaultReason::NoExec);
    }
    r.paddr = (pte & 0xFFFFF000u) | (va & 0xFFF);
    r.buddy_page = (pte & 8) != 0;

    const uint8_t flags = shadow_.get(r.paddr);
    std::vector<AccessKind> kinds{kind};
    if (kind == AccessKind::Execute) kinds.push_back(AccessKind::Fetch);
    for (AccessKind k : kinds) {
      if (std::count(s.resume_tokens.begin(), s.resume_tokens.end(), ResumeToken{va, k})) continue;
      if ((flags & bpflag::Hook) && k != AccessKind::Fetch) {
        DebugEvent h = event(EventKind::HookPoint, va);
        h.access = k;
        h.flags = BreakpointByte{flags};
        out_.notes.push_back(h);
      }
      const uint8_t want = k == AccessKind::Read      ? bpflag::R
                           : k == AccessKind::Write   ? bpflag::W
                           : k == AccessKind::Execute ? bpflag::X
                                                      : bpflag::Fetch;
      if (flags & want) {
        DebugEvent e = event(EventKind::VbpHit, va);
        e.access = k;
        e.flags = BreakpointByte{flags};
        r.stop = e;
        return r;
      }
    }
    return r;
  }

  DebugEvent event(EventKind kind, VAddr va) const {
    DebugEvent e;
    e.kind = kind;
    e.vaddr = va;
    e.cycle = env_.state.cycle;
    return e;
  }

 private:
  ByteResult& fault(ByteResult& r, VAddr va, FaultReason why) {
    DebugEvent e = event(EventKind::PageFault, va);
    e.fault = why;
    r.stop = e;
    return r;
  }

  Environment& env_;
  ShadowOracle& shadow_;
  StepOutcome& out_;
};

}  // namespace

StepOutcome OracleInterpreter::step(Environment& env) {
  StepOutcome out;
  MachineState& s = env.state;
  PhysicalMemory& mem = env.memory;
  Attempt a(env, shadow_, out);
  if (s.halted) {
    out.stop = a.event(EventKind::Halt, s.pc);
    return out;
  }

  const VAddr pc = s.pc;
  uint8_t bytes[isa::kMaxInstructionLength] = {};
  ByteResult first = a.check(pc, AccessKind::Execute);
  if (first.stop) {
    out.stop = first.stop;
    return out;
  }
  bytes[0] = mem.read8(first.paddr);
  const uint8_t length = isa::instruction_length(bytes[0]).value_or(1);
  for (uint8_t i = 1; i < length; ++i) {
    ByteResult b = a.check(pc + i, AccessKind::Fetch);
    if (b.stop) {
      out.stop = b.stop;
      return out;
    }
    bytes[i] = mem.read8(b.paddr);
  }

  const auto decoded = isa::decode(std::span<const uint8_t>(bytes, length));
  if (!std::holds_alternative<isa::Instruction>(decoded)) {
    out.stop = a.event(EventKind::InvalidOpcode, pc);
    return out;
  }
  const isa::Instruction in = std::get<isa::Instruction>(decoded);
  if (in.op == Opcode::Int3) {
    out.stop = a.event(EventKind::Int3, pc);
    return out;
  }

  const bool load = in.op == Opcode::Load8 || in.op == Opcode::Load64;
  const bool store = in.op == Opcode::Store8 || in.op == Opcode::Store64;
  std::vector<ByteResult> data;
  if (load || store) {
    const VAddr addr = static_cast<VAddr>(s.regs[store ? in.rd : in.rs] + static_cast<int64_t>(in.rel));
    const uint32_t width = (in.op == Opcode::Load8 || in.op == Opcode::Store8) ? 1 : 8;
    for (uint32_t i = 0; i < width; ++i) {
      ByteResult b = a.check(addr + i, store ? AccessKind::Write : AccessKind::Read);
      if (b.stop) {
        out.stop = b.stop;
        return out;
      }
      data.push_back(b);
    }
  }

  // Taint sources are read before any register or memory changes.
  const auto reg_tainted = [&](uint8_t r) { return ((s.reg_taint >> r) & 1) != 0; };
  bool load_taint = false;
  for (const auto& b : data) load_taint |= (shadow_.get(b.paddr) & bpflag::Taint) != 0;
  const bool rs_taint = reg_tainted(in.rs);
  const bool rd_taint = reg_tainted(in.rd);

  uint64_t* R = s.regs.data();
  VAddr next = pc + in.length;
  switch (in.op) {
    case Opcode::Halt: s.halted = true; next = pc; break;
    case Opcode::Nop: break;
    case Opcode::Movi: R[in.rd] = in.imm; break;
    case Opcode::Movr: R[in.rd] = R[in.rs]; break;
    case Opcode::Load8: R[in.rd] = mem.read8(data[0].paddr); break;
    case Opcode::Load64: {
      uint64_t v = 0;
      for (int i = 7; i >= 0; --i) v = (v << 8) | mem.read8(data[i].paddr);
      R[in.rd] = v;
      break;
    }
    case Opcode::Store8:
    case Opcode::Store64: {
      uint64_t v = R[in.rs];
      for (const auto& b : data) {
        mem.write8(b.paddr, static_cast<uint8_t>(v & 0xFF));
        v >>= 8;
      }
      break;
    }
    case Opcode::Add: R[in.rd] = R[in.rd] + R[in.rs]; s.zf = R[in.rd] == 0; break;
    case Opcode::Sub: R[in.rd] = R[in.rd] - R[in.rs]; s.zf = R[in.rd] == 0; break;
    case Opcode::Xor: R[in.rd] = R[in.rd] ^ R[in.rs]; s.zf = R[in.rd] == 0; break;
    case Opcode::Cmp: s.zf = R[in.rd] == R[in.rs]; break;
    case Opcode::Jz: if (s.zf) next = pc + in.length + static_cast<uint32_t>(in.rel); break;
    case Opcode::Jnz: if (!s.zf) next = pc + in.length + static_cast<uint32_t>(in.rel); break;
    case Opcode::Jmp: next = pc + in.length + static_cast<uint32_t>(in.rel); break;
    case Opcode::Rddr: R[in.rd] = 0; break;  // no debug registers in use
    case Opcode::Out: s.out.push_back(static_cast<uint8_t>(R[in.rs])); break;
    case Opcode::Rdtsc: R[in.rd] = s.cycle + s.stall_cycles; break;
    case Opcode::Int3: break;
  }

  if (taint_) {
    auto set_reg = [&](uint8_t r, bool t) {
      s.reg_taint = static_cast<uint8_t>(t ? (s.reg_taint | (1u << r)) : (s.reg_taint & ~(1u << r)));
    };
    switch (in.op) {
      case Opcode::Load8:
      case Opcode::Load64: set_reg(in.rd, load_taint); break;
      case Opcode::Store8:
      case Opcode::Store64:
        for (const auto& b : data) {
          if (!b.buddy_page) {
            if (rs_taint) ++env.counters.taint_dropped;
            continue;
          }
          const uint8_t f = shadow_.get(b.paddr);
          shadow_.set(b.paddr, rs_taint ? (f | bpflag::Taint) : (f & ~bpflag::Taint));
        }
        break;
      case Opcode::Movr: set_reg(in.rd, rs_taint); break;
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Xor: set_reg(in.rd, rd_taint || rs_taint); break;
      case Opcode::Movi:
      case Opcode::Rdtsc:
      case Opcode::Rddr: set_reg(in.rd, false); break;
      default: break;
    }
  }

  s.pc = next;
  s.cycle += 1;
  s.resume_tokens.clear();
  ++env.counters.instructions_retired;
  out.retired = true;
  if (s.tf) {
    out.stop = a.event(EventKind::SingleStep, pc);
  } else if (s.halted) {
    out.stop = a.event(EventKind::Halt, pc);
  }
  return out;
}

}  // namespace vbp
