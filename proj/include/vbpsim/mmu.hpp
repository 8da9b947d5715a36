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

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "vbpsim/common.hpp"
#include "vbpsim/perf.hpp"
#include "vbpsim/phys_mem.hpp"

namespace vbp {

/// Page table entry. Bits 12-31 hold the frame number; bits 5-11 and
/// 32-63 are reserved-zero. Entries are stored in memory as 32-bit words
/// (the reserved upper half is never materialised), giving 1024 entries
/// per 4 KiB table for the 10/10/12 split.
struct PageTableEntry {
  static constexpr uint64_t kPresent = 1u << 0;
  static constexpr uint64_t kWritable = 1u << 1;
  static constexpr uint64_t kExecutable = 1u << 2;
  static constexpr uint64_t kBreakpoint = 1u << 3;
  static constexpr uint64_t kBuddyMarker = 1u << 4;
  static constexpr uint64_t kFrameMask = 0xFFFFF000u;
  static constexpr uint64_t kFlagMask = 0x1Fu;

  uint64_t value = 0;

  static PageTableEntry make(FrameNumber frame, uint64_t flags) {
    return PageTableEntry{(uint64_t{frame} << kPageShift & kFrameMask) | (flags & kFlagMask)};
  }

  bool present() const { return value & kPresent; }
  bool writable() const { return value & kWritable; }
  bool executable() const { return value & kExecutable; }
  bool breakpoint() const { return value & kBreakpoint; }
  bool buddy_marker() const { return value & kBuddyMarker; }
  FrameNumber frame() const { return static_cast<FrameNumber>((value & kFrameMask) >> kPageShift); }

  /// Reserved bits zero, BREAKPOINT implies PRESENT, and BREAKPOINT and
  /// BUDDY_MARKER are exclusive.
  bool well_formed() const {
    if (value & ~(kFrameMask | kFlagMask)) return false;
    if (breakpoint() && !present()) return false;
    if (breakpoint() && buddy_marker()) return false;
    return true;
  }

  bool operator==(const PageTableEntry&) const = default;
};

constexpr uint32_t directory_index(VAddr v) { return v >> 22; }
constexpr uint32_t table_index(VAddr v) { return (v >> 12) & 0x3FF; }

enum class FaultReason { NotPresent, WriteProtected, NoExec };
std::string_view fault_name(FaultReason r);

struct PageFault {
  VAddr vaddr = 0;
  FaultReason reason = FaultReason::NotPresent;
  bool operator==(const PageFault&) const = default;
};

struct Translation {
  PAddr paddr = 0;
  bool breakpoint = false;
};

using TranslateResult = std::variant<Translation, PageFault>;

struct TlbEntry {
  uint32_t vpn = 0;
  PageTableEntry pte;
};

/// Fully associative, FIFO replacement.
class Tlb {
 public:
  explicit Tlb(size_t capacity = 16) : capacity_(capacity) {}

  const TlbEntry* lookup(uint32_t vpn) const;
  void insert(const TlbEntry& entry);
  void flush_all() { entries_.clear(); }
  void flush_page(uint32_t vpn);

  size_t size() const { return entries_.size(); }
  size_t capacity() const { return capacity_; }
  const std::deque<TlbEntry>& entries() const { return entries_; }

 private:
  size_t capacity_;
  std::deque<TlbEntry> entries_;
};

/// One-shot breakpoint suppression for the instruction being restarted.
struct ResumeToken {
  VAddr vaddr = 0;
  AccessKind kind = AccessKind::Read;
  bool operator==(const ResumeToken&) const = default;
};

struct FlagMatch {
  VAddr vaddr = 0;
  PAddr paddr = 0;
  AccessKind kind = AccessKind::Read;
  BreakpointByte flags;
};

inline constexpr size_t kMaxAccessBytes = 10;

/// Outcome of a checked multi-byte access.
struct CheckResult {
  enum class Status { Clear, Trap, Fault };

  Status status = Status::Clear;
  FlagMatch trap;        // valid when status == Trap
  PageFault fault;       // valid when status == Fault
  std::vector<FlagMatch> hooks;  // HOOK matches, in check order
  // Per byte that passed its checks: physical address and the buddy byte
  // seen (zero on pages without the breakpoint bit).
  std::array<PAddr, kMaxAccessBytes> paddr{};
  std::array<uint8_t, kMaxAccessBytes> flags{};
  uint16_t buddy_mask = 0;  // bit i: byte i lies on a breakpoint-bit page
  uint8_t count = 0;
};

/// Tracks which page an access group last referenced, so that bytes of
/// one access on one page count as a single frame reference.
struct AccessGroup {
  uint32_t last_vpn = UINT32_MAX;
};

struct MmuConfig {
  size_t tlb_capacity = 16;
  bool tlb_enabled = true;
  // Buddy-frame checking enabled (the breakpoint bit is honoured).
  bool vbp_enabled = true;
};

class Mmu {
 public:
  Mmu(PhysicalMemory& memory, PerfCounters& counters, MmuConfig config = {});

  void set_root(FrameNumber directory_frame);
  FrameNumber root() const { return root_; }
  const MmuConfig& config() const { return config_; }
  void set_vbp_enabled(bool on) { config_.vbp_enabled = on; }

  TranslateResult translate(VAddr vaddr, AccessKind kind);

  /// Breakpoint frame of a data frame: the next frame up.
  PAddr buddy_addr(PAddr frame_base) const;

  /// Translates and checks `width` bytes starting at `vaddr`, in ascending
  /// order. With kind Execute the first byte is checked as Execute and
  /// Fetch and the rest as Fetch. Stops at the first fault or blocking
  /// match; HOOK matches are collected and do not stop the access.
  CheckResult checked_access(VAddr vaddr, AccessKind kind, uint32_t width,
                             std::span<const ResumeToken> tokens, AccessGroup& group);

  void flush_tlb() { tlb_.flush_all(); }
  void flush_tlb(VAddr page) { tlb_.flush_page(page_of(page)); }
  const Tlb& tlb() const { return tlb_; }

  /// Privileged walk for the kernel and debugger: no TLB, no counters,
  /// no permission checks.
  std::optional<PageTableEntry> walk(VAddr vaddr) const;
  std::optional<PAddr> debug_translate(VAddr vaddr) const;

  /// Split-view routing: instruction fetches of `vaddr`'s page are served
  /// from `exec_frame` instead of the mapped frame.
  void set_exec_alias(VAddr page, FrameNumber exec_frame);
  void clear_exec_alias(VAddr page);
  std::optional<FrameNumber> exec_alias(VAddr page) const;

  PhysicalMemory& memory() { return memory_; }
  const PhysicalMemory& memory() const { return memory_; }
  PerfCounters& counters() { return counters_; }

 private:
  PhysicalMemory& memory_;
  PerfCounters& counters_;
  MmuConfig config_;
  Tlb tlb_;
  FrameNumber root_ = 0;
  std::unordered_map<uint32_t, FrameNumber> exec_alias_;
};

}  // namespace vbp
