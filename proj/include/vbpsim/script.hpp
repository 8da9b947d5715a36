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

// Breakpoint scripts: one command per line, `;` comments.
//
//     bp     <loc> [flags]      breakpoint through the active trap mode (default x)
//     vbp    <loc> <flags>      raw buddy-byte write (Vbp mode)
//     page   <loc> <flags>      every byte of the page holding <loc>
//     hook   <loc> <id>         hook point
//     inject <loc> <hex bytes>  external data, tainted
//     dr     <slot> <loc> <x|w|rw>
//
// <loc> is a number, a label, or `label+offset`.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vbpsim/common.hpp"
#include "vbpsim/image.hpp"

namespace vbp {

class Session;

struct ScriptCommand {
  enum class Kind { Bp, Vbp, Page, Hook, Inject, Dr };
  Kind kind = Kind::Bp;
  VAddr vaddr = 0;
  BreakpointByte flags{bpflag::X};
  uint32_t value = 0;          // hook id, DR slot
  std::string dr_kind;         // x, w, rw
  std::vector<uint8_t> bytes;  // inject payload
  int line = 0;
};

/// Throws Error(SyntaxError) naming the line on malformed input and
/// Error(UnresolvedLabel) for unknown locations.
std::vector<ScriptCommand> parse_script(std::string_view text, const GuestImage& image);

/// Applies commands in order. Failures are rethrown with the line number.
void apply_script(Session& session, const std::vector<ScriptCommand>& commands);

}  // namespace vbp
