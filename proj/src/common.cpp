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

#include "vbpsim/common.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace vbp {

std::string_view access_name(AccessKind kind) {
  switch (kind) {
    case AccessKind::Read: return "Read";
    case AccessKind::Write: return "Write";
    case AccessKind::Execute: return "Execute";
    case AccessKind::Fetch: return "Fetch";
  }
  return "?";
}

std::optional<AccessKind> parse_access(std::string_view name) {
  for (auto k : {AccessKind::Read, AccessKind::Write, AccessKind::Execute,
                 AccessKind::Fetch}) {
    if (access_name(k) == name) return k;
  }
  return std::nullopt;
}

std::optional<BreakpointByte> parse_flags(std::string_view letters) {
  BreakpointByte out;
  if (letters == "0" || letters == "-") return out;
  for (char c : letters) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
      case 'r': out.bits |= bpflag::R; break;
      case 'w': out.bits |= bpflag::W; break;
      case 'x': out.bits |= bpflag::X; break;
      case 'f': out.bits |= bpflag::Fetch; break;
      case 'h': out.bits |= bpflag::Hook; break;
      case 't': out.bits |= bpflag::Taint; break;
      default: return std::nullopt;
    }
  }
  return out;
}

std::string format_flags(BreakpointByte flags) {
  std::string s;
  if (flags.has(bpflag::R)) s += 'r';
  if (flags.has(bpflag::W)) s += 'w';
  if (flags.has(bpflag::X)) s += 'x';
  if (flags.has(bpflag::Fetch)) s += 'f';
  if (flags.has(bpflag::Hook)) s += 'h';
  if (flags.has(bpflag::Taint)) s += 't';
  return s.empty() ? "-" : s;
}

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::TruncatedInstruction: return "TruncatedInstruction";
    case ErrorCode::OperandOutOfRange: return "OperandOutOfRange";
    case ErrorCode::UnresolvedLabel: return "UnresolvedLabel";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::PhysicalOutOfBounds: return "PhysicalOutOfBounds";
    case ErrorCode::OutOfMemory: return "OutOfMemory";
    case ErrorCode::OutOfContiguousMemory: return "OutOfContiguousMemory";
    case ErrorCode::NotMapped: return "NotMapped";
    case ErrorCode::NoBuddyFrame: return "NoBuddyFrame";
    case ErrorCode::ReservedBitsSet: return "ReservedBitsSet";
    case ErrorCode::BuddyPinned: return "BuddyPinned";
    case ErrorCode::NoAdjacentPairOnSwapIn: return "NoAdjacentPairOnSwapIn";
    case ErrorCode::NotSwapped: return "NotSwapped";
    case ErrorCode::AlreadySet: return "AlreadySet";
    case ErrorCode::NotSet: return "NotSet";
    case ErrorCode::SlotOutOfRange: return "SlotOutOfRange";
    case ErrorCode::DrExhausted: return "DrExhausted";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidMode: return "InvalidMode";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::BadImage: return "BadImage";
    case ErrorCode::PageFault: return "PageFault";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

std::optional<int64_t> parse_int(std::string_view text) {
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    base = 16;
    text.remove_prefix(2);
  }
  if (text.empty()) return std::nullopt;
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  int64_t v = static_cast<int64_t>(value);
  return negative ? -v : v;
}

std::string hex(uint64_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%0*llx", width, static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace vbp
