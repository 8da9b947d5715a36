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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vbp::assembler {

/// One contiguous run of bytes starting at an `org`.
struct Segment {
  uint32_t origin = 0;
  std::string perms = "rwx";
  std::vector<uint8_t> bytes;
};

struct AsmImage {
  std::vector<Segment> segments;
  std::map<std::string, uint32_t> symbols;
  std::optional<uint32_t> entry;
  std::vector<uint32_t> buddy_pages;
};

/// Two-pass assembler.
///
/// Source format, one statement per line, `;` starts a comment:
///
///     org 0x1000 rx        ; new segment, optional perms (default rwx)
///     start:               ; label
///     MOVI R1, buf+8       ; operands may be label/number sums, `$` = here
///     LOAD8 R2, [R1-1]
///     JNZ start            ; branch operands are absolute targets
///     db 0xCC, 1, 2        ; raw bytes
///     dq 0x1122, start     ; 64-bit little-endian words
///     zero 16              ; N zero bytes (expression over labels above)
///     COUNT equ 100        ; constant, usable like a label
///     buddy buf            ; page needs a buddy frame at load time
///     entry start          ; entry point (defaults: `_start`, else first org)
///
/// Errors throw vbp::Error with SyntaxError, UnresolvedLabel or
/// DuplicateLabel and a "line N:" prefix.
AsmImage assemble(std::string_view source);

}  // namespace vbp::assembler
