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


#include "doctest.h"
#include "support.hpp"
#include "vbpsim/oracle.hpp"

using namespace vbp;
using vbptest::session_from;

namespace {

uint64_t peek64(Session& s, VAddr va) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | s.read_mem(va + i);
  return v;
}

std::vector<EventKind> kinds(const std::vector<DebugEvent>& log) {
  std::vector<EventKind> out;
  for (const auto& e : log) out.push_back(e.kind);
  return out;
}

}  // namespace

TEST_CASE("arithmetic, flags and moves") {
  Session s = session_from(R"(
org 0x1000 rx
_start:
        MOVI R1, 0xFFFFFFFFFFFFFFFF
        MOVI R2, 2
        ADD R1, R2          ; wraps to 1
        MOVR R3, R1
        SUB R3, R1          ; zero, sets ZF
        MOVI R4, 0xF0
        MOVI R5, 0x0F
        XOR R4, R5
        CMP R4, R4          ; ZF without writing
        HALT
)");
  s.run_to_end(100);
  const auto& r = s.state().regs;
  CHECK(r[1] == 1);
  CHECK(r[3] == 0);
  CHECK(r[4] == 0xFF);
  CHECK(s.state().zf);
  CHECK(s.state().halted);
  CHECK(s.state().cycle == 10);  // HALT retires
  CHECK(s.state().pc == s.image().symbols.at("_start") + 10 * 4 + 2 * 5);  // HALT keeps PC
}

TEST_CASE("loads and stores are little-endian") {
  Session s = session_from(R"(
org 0x1000 rx
_start:
        MOVI R7, 0x3000
        MOVI R1, 0x0102030405060708
        STORE64 [R7+3], R1
        LOAD8 R2, [R7+3]
        LOAD8 R3, [R7+10]
        STORE8 [R7+0], R1
        LOAD64 R4, [R7]
        HALT
org 0x3000 rw
        zero 16
)");
  s.run_to_end(100);
  CHECK(peek64(s, 0x3003) == 0x0102030405060708ull);
  CHECK(s.state().regs[2] == 0x08);
  CHECK(s.state().regs[3] == 0x01);
  // Oracle value: bytes 08 00 00 08 07 06 05 04 read back little-endian.
  CHECK(s.state().regs[4] == 0x0405060708000008ull);
}

TEST_CASE("branches, OUT and RDTSC") {
  Session s = session_from(R"(
org 0x1000 rx
_start:
        MOVI R1, 3
        MOVI R2, 1
loop:
        OUT R1
        SUB R1, R2
        JNZ loop
        CMP R1, R2
        JZ never
        RDTSC R6
        HALT
never:
        OUT R2
        HALT
)");
  s.run_to_end(100);
  CHECK(s.state().out == std::vector<uint8_t>{3, 2, 1});
  // Retired before RDTSC: 2 MOVI, 3 x (OUT, SUB, JNZ), CMP, JZ.
  CHECK(s.state().regs[6] == 2 + 9 + 2);
}

TEST_CASE("RDTSC includes debugger stall cycles") {
  SessionConfig cfg;
  cfg.exit_penalty = 50;
  Session s = session_from(R"(
org 0x1000 rx
_start:
        NOP
        RDTSC R1
        HALT
)", cfg);
  s.set_vbp(0x1000, BreakpointByte{bpflag::X});
  s.run_to_end(100);
  CHECK(s.state().regs[1] == 1 + 50);
  CHECK(s.counters().debug_exits == 1);
}

TEST_CASE("a trapped instruction has no architectural effect") {
  Session s = session_from(R"(
org 0x1000 rx
_start:
        MOVI R7, 0x3000
        MOVI R1, 0x1111111111111111
        STORE64 [R7], R1
        HALT
org 0x3000 rw
        zero 8
)");
  s.set_vbp(0x3004, BreakpointByte{bpflag::W});
  auto r = s.run_until_event(100);
  REQUIRE(r.event);
  CHECK(r.event->kind == EventKind::VbpHit);
  CHECK(r.event->vaddr == 0x3004);
  CHECK(r.event->access == AccessKind::Write);
  CHECK(peek64(s, 0x3000) == 0);  // the first four bytes were not written either
  CHECK(s.state().pc == 0x1000 + 20);
  CHECK(s.state().cycle == 2);

  r = s.run_until_event(100);
  REQUIRE(r.event);
  CHECK(r.event->kind == EventKind::Halt);
  CHECK(peek64(s, 0x3000) == 0x1111111111111111ull);
  CHECK(s.counters().instructions_retired == 4);
}

TEST_CASE("instruction bytes are checked before data operands") {
  Session s = session_from(R"(
org 0x1000 rx
_start:
        MOVI R7, 0x3000
        LOAD8 R1, [R7]
        HALT
org 0x3000 rw
        db 5
)");
  s.set_vbp(0x100C, BreakpointByte{bpflag::Fetch});  // third byte of the LOAD8
  s.set_vbp(0x3000, BreakpointByte{bpflag::R});
  auto r = s.run_until_event(100);
  CHECK(r.event->vaddr == 0x100C);
  CHECK(r.event->access == AccessKind::Fetch);
  r = s.run_until_event(100);
  CHECK(r.event->vaddr == 0x3000);
  CHECK(r.event->access == AccessKind::Read);
  r = s.run_until_event(100);
  CHECK(r.event->kind == EventKind::Halt);
  CHECK(s.state().regs[1] == 5);
}

TEST_CASE("suppression survives a second trap in the same instruction") {
  Session s = session_from(R"(
org 0x1000 rx
_start:
        MOVI R7, 0x3000
        LOAD8 R1, [R7]
        HALT
org 0x3000 rw
        db 9
)");
  s.set_vbp(0x100A, BreakpointByte{bpflag::X});
  s.set_vbp(0x3000, BreakpointByte{bpflag::R});
  s.run_to_end(100);
  const auto summary = kinds(s.log());
  CHECK(summary == std::vector<EventKind>{EventKind::VbpHit, EventKind::VbpHit, EventKind::Halt});
  CHECK(s.log()[0].access == AccessKind::Execute);
  CHECK(s.log()[1].access == AccessKind::Read);
  CHECK(s.state().resume_tokens.empty());
  CHECK(s.counters().instructions_retired == 3);
}

TEST_CASE("breakpoints rearm after the instruction retires") {
  Session s = session_from(R"(
org 0x1000 rx
_start:
        MOVI R1, 3
        MOVI R2, 1
loop:
        SUB R1, R2
        JNZ loop
        HALT
)");
  s.set_vbp(s.image().symbol("loop"), BreakpointByte{bpflag::X});
  s.run_to_end(100);
  CHECK(kinds(s.log()) == std::vector<EventKind>{EventKind::VbpHit, EventKind::VbpHit, EventKind::VbpHit,
                                                 EventKind::Halt});
}

TEST_CASE("guest 0xCC, invalid opcodes and faults") {
  Session a = session_from("org 0x1000 rx\n_start:\n db 0xCC\n HALT\n");
  auto r = a.run_to_end(10);
  CHECK(a.log().front().kind == EventKind::Int3);
  CHECK(r.event->kind == EventKind::Halt);
  CHECK(a.state().pc == 0x1001);

  Session b = session_from("org 0x1000 rx\n_start:\n NOP\n db 0x02\n");
  r = b.run_to_end(10);
  CHECK(r.event->kind == EventKind::InvalidOpcode);
  CHECK(r.event->vaddr == 0x1001);

  Session c = session_from("org 0x1000 rx\n_start:\n MOVI R1, 0x9000\n LOAD8 R2, [R1]\n");
  r = c.run_to_end(10);
  CHECK(r.event->kind == EventKind::PageFault);
  CHECK(r.event->vaddr == 0x9000);
  CHECK(r.event->fault == FaultReason::NotPresent);

  Session d = session_from("org 0x1000 rx\n_start:\n MOVI R1, 0x1000\n STORE8 [R1], R1\n");
  r = d.run_to_end(10);
  CHECK(r.event->fault == FaultReason::WriteProtected);
}

TEST_CASE("taint propagation rules") {
  SessionConfig cfg;
  cfg.taint = true;
  Session s = session_from(R"(
org 0x1000 rx
_start:
        MOVI R7, 0x3000
        LOAD8 R1, [R7]        ; tainted source
        MOVR R2, R1           ; copies taint
        MOVI R3, 7
        ADD R3, R2            ; union
        STORE8 [R7+1], R3     ; buddy page: TAINT set
        MOVI R4, 0x5000
        STORE8 [R4], R3       ; no buddy: dropped
        LOAD8 R5, [R7+2]      ; clean source
        STORE8 [R7+3], R5     ; clears
        MOVI R2, 0            ; overwrite clears
        HALT
org 0x3000 rw
        zero 4
        buddy 0x3000
org 0x5000 rw
        zero 1
)", cfg);
  s.set_vbp(0x3003, BreakpointByte{bpflag::Taint});
  const uint8_t byte = 0x42;
  s.inject_external(0x3000, std::span<const uint8_t>(&byte, 1));
  s.run_to_end(100);
  const uint8_t t = s.state().reg_taint;
  CHECK((t >> 1 & 1) == 1);
  CHECK((t >> 2 & 1) == 0);
  CHECK((t >> 3 & 1) == 1);
  CHECK((t >> 5 & 1) == 0);
  CHECK(s.read_vbp(0x3001).has(bpflag::Taint));
  CHECK(!s.read_vbp(0x3003).has(bpflag::Taint));
  CHECK(s.counters().taint_dropped == 1);
  CHECK(s.verify_against_oracle().equivalent);
}

TEST_CASE("machine step and the oracle interpreter agree on random guests") {
  auto r = vbptest::rng(4);
  for (int i = 0; i < 50; ++i) {
    const GuestImage img = assemble_image(vbptest::random_guest(r));
    SessionConfig cfg;
    ShadowOracle sa, sb;
    Environment a(img, cfg, &sa);
    Environment b(img, cfg, &sb);
    OracleInterpreter oracle(sb, false);
    for (int n = 0; n < 2000 && !a.state.halted; ++n) {
      StepOutcome x = step(a.state, a.mmu);
      StepOutcome y = oracle.step(b);
      REQUIRE(x.retired == y.retired);
      REQUIRE(x.stop == y.stop);
      REQUIRE(a.state.pc == b.state.pc);
      REQUIRE(a.state.regs == b.state.regs);
      if (x.stop && x.stop->kind != EventKind::Halt) break;
    }
    CHECK(a.state.out == b.state.out);
  }
}
