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

// VB-ISA: a small variable-length instruction set with x86-flavoured
// encodings. The properties that matter are the single-byte 0xCC trap,
// the 0xE9 rel32 jump and the mix of 1/2/5/6/10 byte instructions.
//
//   00 HALT            01 NOP             CC INT3
//   10 MOVI r, imm64   11 MOVR rd, rs
//   20 LOAD8  rd, [rs+off32]    21 LOAD64 rd, [rs+off32]
//   28 STORE8 [rd+off32], rs    29 STORE64 [rd+off32], rs
//   30 ADD  31 SUB  32 XOR  33 CMP       (rd, rs)
//   74 JZ  75 JNZ  E9 JMP                (rel32, from end of instruction)
//   D0 RDDR rd, n   F1 OUT rs   F2 RDTSC rd
//
// Register bytes pack dest in the high nibble and source in the low
// nibble; single-register forms use the low nibble only. Multi-byte
// fields are little-endian.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vbpsim/common.hpp"

namespace vbp::isa {

inline constexpr int kNumRegs = 8;
inline constexpr int kNumDebugSlots = 4;
inline constexpr size_t kMaxInstructionLength = 10;

enum class Opcode : uint8_t {
  Halt = 0x00,
  Nop = 0x01,
  Movi = 0x10,
  Movr = 0x11,
  Load8 = 0x20,
  Load64 = 0x21,
  Store8 = 0x28,
  Store64 = 0x29,
  Add = 0x30,
  Sub = 0x31,
  Xor = 0x32,
  Cmp = 0x33,
  Jz = 0x74,
  Jnz = 0x75,
  Jmp = 0xE9,
  Int3 = 0xCC,
  Rddr = 0xD0,
  Out = 0xF1,
  Rdtsc = 0xF2,
};

enum class Form : uint8_t {
  None,      // op
  RegImm64,  // op r imm64
  RegReg,    // op (rd<<4|rs)
  Load,      // op (rd<<4|rs) off32   rd <- [rs+off]
  Store,     // op (rd<<4|rs) off32   [rd+off] <- rs
  Rel32,     // op rel32
  RegSlot,   // op (rd<<4|n)
  Reg,       // op r
};

/// Fields unused by a form are zero. MOVI, RDTSC and RDDR write `rd`;
/// OUT reads `rs`; loads use `rs` as base, stores use `rd` as base.
struct Instruction {
  Opcode op = Opcode::Halt;
  uint8_t rd = 0;
  uint8_t rs = 0;
  uint64_t imm = 0;
  int32_t rel = 0;
  uint8_t length = 1;

  bool operator==(const Instruction&) const = default;
};

/// Reserved encodings: an unknown opcode byte, or a register/slot nibble
/// out of range. Always length 1.
struct InvalidOpcode {
  uint8_t byte = 0;
  bool operator==(const InvalidOpcode&) const = default;
};

using DecodeResult = std::variant<Instruction, InvalidOpcode>;

/// Length of the instruction introduced by `opcode`, or nullopt if the
/// byte is not a valid opcode.
std::optional<uint8_t> instruction_length(uint8_t opcode);
Form form_of(Opcode op);
const char* mnemonic(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(std::string_view name);

/// Decodes one instruction from `bytes`. Reads only the bytes the opcode's
/// length covers. Throws Error(TruncatedInstruction) when `bytes` ends
/// before the instruction does.
DecodeResult decode(std::span<const uint8_t> bytes);

/// Throws Error(OperandOutOfRange) for register or slot indices out of range.
std::vector<uint8_t> encode(const Instruction& instr);

/// Builds an instruction with its length filled in from the opcode table.
Instruction make(Opcode op, uint8_t rd = 0, uint8_t rs = 0, uint64_t imm = 0,
                 int32_t rel = 0);

bool is_branch(Opcode op);
/// Branch target of a relative branch at `at`: end of instruction + rel32.
uint32_t branch_target(const Instruction& instr, uint32_t at);

/// Assembler-compatible text. Branches print their absolute target.
std::string disassemble(const Instruction& instr, uint32_t at);

}  // namespace vbp::isa
