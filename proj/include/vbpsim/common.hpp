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
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vbp {

using VAddr = uint32_t;
using PAddr = uint32_t;
using FrameNumber = uint32_t;

inline constexpr uint32_t kPageSize = 4096;
inline constexpr uint32_t kPageShift = 12;
inline constexpr uint32_t kPageMask = kPageSize - 1;

constexpr uint32_t page_of(uint32_t addr) { return addr >> kPageShift; }
constexpr uint32_t page_base(uint32_t addr) { return addr & ~kPageMask; }
constexpr uint32_t page_offset(uint32_t addr) { return addr & kPageMask; }

/// Kind of memory reference being checked. Execute is the first byte of an
/// executed instruction; Fetch is any byte of it (the first byte included).
enum class AccessKind : uint8_t { Read, Write, Execute, Fetch };

std::string_view access_name(AccessKind kind);
std::optional<AccessKind> parse_access(std::string_view name);

/// Per-byte breakpoint flags held in a buddy frame.
namespace bpflag {
inline constexpr uint8_t R = 1u << 0;
inline constexpr uint8_t W = 1u << 1;
inline constexpr uint8_t X = 1u << 2;
inline constexpr uint8_t Fetch = 1u << 3;
inline constexpr uint8_t Hook = 1u << 4;
inline constexpr uint8_t Taint = 1u << 5;
inline constexpr uint8_t Reserved = 0xC0;
inline constexpr uint8_t Blocking = R | W | X | Fetch;
}  // namespace bpflag

struct BreakpointByte {
  uint8_t bits = 0;

  constexpr bool has(uint8_t flag) const { return (bits & flag) != 0; }
  constexpr bool operator==(const BreakpointByte&) const = default;
};

/// Parses a flag letter string such as "rwx", "f", "h", "t" (case-insensitive).
/// Returns nullopt on an unknown letter. An empty string or "0" is no flags.
std::optional<BreakpointByte> parse_flags(std::string_view letters);
std::string format_flags(BreakpointByte flags);

enum class ErrorCode {
  TruncatedInstruction,
  OperandOutOfRange,
  UnresolvedLabel,
  DuplicateLabel,
  SyntaxError,
  PhysicalOutOfBounds,
  OutOfMemory,
  OutOfContiguousMemory,
  NotMapped,
  PageFault,
  NoBuddyFrame,
  ReservedBitsSet,
  BuddyPinned,
  NoAdjacentPairOnSwapIn,
  NotSwapped,
  AlreadySet,
  NotSet,
  SlotOutOfRange,
  DrExhausted,
  InvalidArgument,
  InvalidMode,
  UnknownScenario,
  BadImage,
  InvariantViolation,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

/// Parses a C-style integer literal (0x.., decimal, optional leading '-').
std::optional<int64_t> parse_int(std::string_view text);
std::string hex(uint64_t value, int width = 0);

}  // namespace vbp
