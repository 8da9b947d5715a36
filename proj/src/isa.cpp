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

#include "vbpsim/isa.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>

namespace vbp::isa {
namespace {

struct OpInfo {
  Opcode op;
  const char* name;
  Form form;
  uint8_t length;
};

constexpr OpInfo kOps[] = {
    {Opcode::Halt, "HALT", Form::None, 1},
    {Opcode::Nop, "NOP", Form::None, 1},
    {Opcode::Movi, "MOVI", Form::RegImm64, 10},
    {Opcode::Movr, "MOVR", Form::RegReg, 2},
    {Opcode::Load8, "LOAD8", Form::Load, 6},
    {Opcode::Load64, "LOAD64", Form::Load, 6},
    {Opcode::Store8, "STORE8", Form::Store, 6},
    {Opcode::Store64, "STORE64", Form::Store, 6},
    {Opcode::Add, "ADD", Form::RegReg, 2},
    {Opcode::Sub, "SUB", Form::RegReg, 2},
    {Opcode::Xor, "XOR", Form::RegReg, 2},
    {Opcode::Cmp, "CMP", Form::RegReg, 2},
    {Opcode::Jz, "JZ", Form::Rel32, 5},
    {Opcode::Jnz, "JNZ", Form::Rel32, 5},
    {Opcode::Jmp, "JMP", Form::Rel32, 5},
    {Opcode::Int3, "INT3", Form::None, 1},
    {Opcode::Rddr, "RDDR", Form::RegSlot, 2},
    {Opcode::Out, "OUT", Form::Reg, 2},
    {Opcode::Rdtsc, "RDTSC", Form::Reg, 2},
};

constexpr std::array<int8_t, 256> build_index() {
  std::array<int8_t, 256> idx{};
  for (auto& v : idx) v = -1;
  for (size_t i = 0; i < std::size(kOps); ++i) {
    idx[static_cast<uint8_t>(kOps[i].op)] = static_cast<int8_t>(i);
  }
  return idx;
}

constexpr auto kIndex = build_index();

const OpInfo& info(Opcode op) {
  return kOps[kIndex[static_cast<uint8_t>(op)]];
}

uint32_t read_u32(std::span<const uint8_t> b, size_t at) {
  return uint32_t{b[at]} | uint32_t{b[at + 1]} << 8 | uint32_t{b[at + 2]} << 16 |
         uint32_t{b[at + 3]} << 24;
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

}  // namespace

std::optional<uint8_t> instruction_length(uint8_t opcode) {
  int8_t i = kIndex[opcode];
  if (i < 0) return std::nullopt;
  return kOps[i].length;
}

Form form_of(Opcode op) { return info(op).form; }

const char* mnemonic(Opcode op) { return info(op).name; }

std::optional<Opcode> opcode_from_mnemonic(std::string_view name) {
  for (const auto& o : kOps) {
    if (name.size() != std::strlen(o.name)) continue;
    bool same = true;
    for (size_t i = 0; i < name.size(); ++i) {
      if (std::toupper(static_cast<unsigned char>(name[i])) != o.name[i]) {
        same = false;
        break;
      }
    }
    if (same) return o.op;
  }
  return std::nullopt;
}

DecodeResult decode(std::span<const uint8_t> bytes) {
  if (bytes.empty()) fail(ErrorCode::TruncatedInstruction, "decode: empty buffer");
  const uint8_t first = bytes[0];
  const auto len = instruction_length(first);
  if (!len) return InvalidOpcode{first};
  if (bytes.size() < *len) {
    fail(ErrorCode::TruncatedInstruction,
         "decode: opcode " + hex(first, 2) + " needs " + std::to_string(*len) +
             " bytes, have " + std::to_string(bytes.size()));
  }

  Instruction in;
  in.op = static_cast<Opcode>(first);
  in.length = *len;
  const uint8_t hi = *len > 1 ? bytes[1] >> 4 : 0;
  const uint8_t lo = *len > 1 ? bytes[1] & 0x0F : 0;

  switch (form_of(in.op)) {
    case Form::None:
      break;
    case Form::RegImm64:
    case Form::Reg:
      if (hi != 0 || lo >= kNumRegs) return InvalidOpcode{first};
      if (in.op == Opcode::Out) {
        in.rs = lo;
      } else {
        in.rd = lo;
      }
      if (in.op == Opcode::Movi) {
        for (int i = 0; i < 8; ++i) in.imm |= uint64_t{bytes[2 + i]} << (8 * i);
      }
      break;
    case Form::RegReg:
    case Form::Load:
    case Form::Store:
      if (hi >= kNumRegs || lo >= kNumRegs) return InvalidOpcode{first};
      in.rd = hi;
      in.rs = lo;
      if (in.length == 6) in.rel = static_cast<int32_t>(read_u32(bytes, 2));
      break;
    case Form::RegSlot:
      if (hi >= kNumRegs || lo >= kNumDebugSlots) return InvalidOpcode{first};
      in.rd = hi;
      in.rs = lo;
      break;
    case Form::Rel32:
      in.rel = static_cast<int32_t>(read_u32(bytes, 1));
      break;
  }
  return in;
}

std::vector<uint8_t> encode(const Instruction& instr) {
  if (kIndex[static_cast<uint8_t>(instr.op)] < 0) {
    fail(ErrorCode::OperandOutOfRange, "encode: unknown opcode");
  }
  const Form form = form_of(instr.op);
  auto check_reg = [](uint8_t r) {
    if (r >= kNumRegs) {
      fail(ErrorCode::OperandOutOfRange, "register index " + std::to_string(r) + " out of range");
    }
  };

  std::vector<uint8_t> out;
  out.reserve(info(instr.op).length);
  out.push_back(static_cast<uint8_t>(instr.op));
  switch (form) {
    case Form::None:
      break;
    case Form::RegImm64:
      check_reg(instr.rd);
      out.push_back(instr.rd);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(instr.imm >> (8 * i)));
      break;
    case Form::Reg: {
      const uint8_t r = instr.op == Opcode::Out ? instr.rs : instr.rd;
      check_reg(r);
      out.push_back(r);
      break;
    }
    case Form::RegReg:
    case Form::Load:
    case Form::Store:
      check_reg(instr.rd);
      check_reg(instr.rs);
      out.push_back(static_cast<uint8_t>(instr.rd << 4 | instr.rs));
      if (form != Form::RegReg) put_u32(out, static_cast<uint32_t>(instr.rel));
      break;
    case Form::RegSlot:
      check_reg(instr.rd);
      if (instr.rs >= kNumDebugSlots) {
        fail(ErrorCode::OperandOutOfRange, "debug register slot " + std::to_string(instr.rs));
      }
      out.push_back(static_cast<uint8_t>(instr.rd << 4 | instr.rs));
      break;
    case Form::Rel32:
      put_u32(out, static_cast<uint32_t>(instr.rel));
      break;
  }
  return out;
}

Instruction make(Opcode op, uint8_t rd, uint8_t rs, uint64_t imm, int32_t rel) {
  Instruction in;
  in.op = op;
  in.rd = rd;
  in.rs = rs;
  in.imm = imm;
  in.rel = rel;
  in.length = info(op).length;
  return in;
}

bool is_branch(Opcode op) { return form_of(op) == Form::Rel32; }

uint32_t branch_target(const Instruction& instr, uint32_t at) {
  return at + instr.length + static_cast<uint32_t>(instr.rel);
}

std::string disassemble(const Instruction& in, uint32_t at) {
  char buf[96];
  const char* m = mnemonic(in.op);
  auto disp = [](int32_t rel) {
    char d[24];
    if (rel < 0) {
      std::snprintf(d, sizeof d, "-0x%x", static_cast<unsigned>(-static_cast<int64_t>(rel)));
    } else {
      std::snprintf(d, sizeof d, "+0x%x", static_cast<unsigned>(rel));
    }
    return std::string(d);
  };
  switch (form_of(in.op)) {
    case Form::None:
      return m;
    case Form::RegImm64:
      std::snprintf(buf, sizeof buf, "%s R%u, 0x%llx", m, in.rd,
                    static_cast<unsigned long long>(in.imm));
      break;
    case Form::RegReg:
      std::snprintf(buf, sizeof buf, "%s R%u, R%u", m, in.rd, in.rs);
      break;
    case Form::Load:
      std::snprintf(buf, sizeof buf, "%s R%u, [R%u%s]", m, in.rd, in.rs, disp(in.rel).c_str());
      break;
    case Form::Store:
      std::snprintf(buf, sizeof buf, "%s [R%u%s], R%u", m, in.rd, disp(in.rel).c_str(), in.rs);
      break;
    case Form::Rel32:
      std::snprintf(buf, sizeof buf, "%s 0x%x", m, branch_target(in, at));
      break;
    case Form::RegSlot:
      std::snprintf(buf, sizeof buf, "%s R%u, %u", m, in.rd, in.rs);
      break;
    case Form::Reg:
      std::snprintf(buf, sizeof buf, "%s R%u", m, in.op == Opcode::Out ? in.rs : in.rd);
      break;
  }
  return buf;
}

}  // namespace vbp::isa
