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
#include "vbpsim/assembler.hpp"
#include "vbpsim/isa.hpp"

using namespace vbp;

namespace {

ErrorCode code_of(std::string_view src) {
  try {
    assembler::assemble(src);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("assembled without error");
  return ErrorCode::InvariantViolation;
}

std::string message_of(std::string_view src) {
  try {
    assembler::assemble(src);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("labels, forward references and branch offsets") {
  const auto img = assembler::assemble(R"(
org 0x1000 rx
_start:
        JMP target
        NOP
target:
        HALT
)");
  REQUIRE(img.segments.size() == 1);
  const auto& b = img.segments[0].bytes;
  // JMP is 5 bytes ending at 0x1005; the NOP puts target at 0x1006.
  CHECK(b == std::vector<uint8_t>{0xE9, 0x01, 0, 0, 0, 0x01, 0x00});
  CHECK(img.symbols.at("target") == 0x1006);
  CHECK(img.entry == 0x1000u);
  CHECK(img.segments[0].perms == "rx");
}

TEST_CASE("data directives, equ and expressions") {
  const auto img = assembler::assemble(R"(
N equ 3
org 0x2000
table:
        db 1, 0xFF, -1
        dq 0x1122334455667788
        zero N + 1
after:
        MOVI R1, after - table
        MOVI R2, $
)");
  const auto& b = img.segments[0].bytes;
  CHECK(img.symbols.at("N") == 3);
  CHECK(img.symbols.at("after") == 0x2000 + 3 + 8 + 4);
  CHECK(std::vector<uint8_t>(b.begin(), b.begin() + 11) ==
        std::vector<uint8_t>{1, 0xFF, 0xFF, 0x88, 0x77, 0x66, 0x55, 0x44, 0x33, 0x22, 0x11});
  const auto movi = isa::decode(std::span<const uint8_t>(b.data() + 15, 10));
  CHECK(std::get<isa::Instruction>(movi).imm == 15);
  const auto here = isa::decode(std::span<const uint8_t>(b.data() + 25, 10));
  CHECK(std::get<isa::Instruction>(here).imm == 0x2000 + 25);
}

TEST_CASE("memory operands and buddy/entry directives") {
  const auto img = assembler::assemble(R"(
org 0x1000
        LOAD8 R1, [R2]
        STORE64 [R7+16], R3
        LOAD64 R4, [R5-8]
main:
        HALT
        entry main
        buddy 0x3004
)");
  const auto& b = img.segments[0].bytes;
  CHECK(std::vector<uint8_t>(b.begin(), b.begin() + 6) == std::vector<uint8_t>{0x20, 0x12, 0, 0, 0, 0});
  CHECK(std::vector<uint8_t>(b.begin() + 6, b.begin() + 12) == std::vector<uint8_t>{0x29, 0x73, 16, 0, 0, 0});
  CHECK(std::get<isa::Instruction>(isa::decode(std::span<const uint8_t>(b.data() + 12, 6))).rel == -8);
  CHECK(img.entry == img.symbols.at("main"));
  REQUIRE(img.buddy_pages.size() == 1);
  CHECK(page_base(img.buddy_pages[0]) == 0x3000);
}

TEST_CASE("diagnostics carry line numbers") {
  CHECK(code_of("org 0x1000\n  JMP nowhere\n") == ErrorCode::UnresolvedLabel);
  CHECK(message_of("org 0x1000\n  JMP nowhere\n").find("line 2") != std::string::npos);
  CHECK(message_of("org 0x1000\n  JMP nowhere\n").find("nowhere") != std::string::npos);
  CHECK(code_of("org 0x1000\na:\na:\n") == ErrorCode::DuplicateLabel);
  CHECK(code_of("org 0x1000\n  FROB R1\n") == ErrorCode::SyntaxError);
  CHECK(code_of("org 0x1000\n  ADD R1, R9\n") == ErrorCode::SyntaxError);
  CHECK(code_of("org 0x1000\n  LOAD8 R1, R2\n") == ErrorCode::SyntaxError);
  CHECK(code_of("org 0x1000\n  db 300\n") == ErrorCode::SyntaxError);
  CHECK(code_of("org 0x1000\n zero 8\norg 0x1004\n  NOP\n") == ErrorCode::SyntaxError);
}

TEST_CASE("empty source assembles to nothing") {
  const auto img = assembler::assemble("; only a comment\n\n");
  CHECK(img.segments.empty());
  CHECK(!img.entry);
}

TEST_CASE("disassembly reassembles to the same bytes") {
  auto r = vbptest::rng(2);
  for (int round = 0; round < 30; ++round) {
    const auto src = vbptest::random_guest(r, 30);
    const auto img = assembler::assemble(src);
    const auto& code = img.segments.at(0).bytes;
    std::string listing = "org 0x1000 rwx\n";
    for (size_t at = 0; at < code.size();) {
      const auto d = isa::decode(std::span<const uint8_t>(code.data() + at, code.size() - at));
      const auto& in = std::get<isa::Instruction>(d);
      listing += "        " + isa::disassemble(in, 0x1000 + static_cast<uint32_t>(at)) + "\n";
      at += in.length;
    }
    const auto again = assembler::assemble(listing);
    CHECK(again.segments.at(0).bytes == code);
  }
}
