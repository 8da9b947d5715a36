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

#include "vbpsim/mmu.hpp"

#include <algorithm>

namespace vbp {

std::string_view fault_name(FaultReason r) {
  switch (r) {
    case FaultReason::NotPresent: return "NotPresent";
    case FaultReason::WriteProtected: return "WriteProtected";
    case FaultReason::NoExec: return "NoExec";
  }
  return "?";
}

const TlbEntry* Tlb::lookup(uint32_t vpn) const {
  for (const auto& e : entries_) {
    if (e.vpn == vpn) return &e;
  }
  return nullptr;
}

void Tlb::insert(const TlbEntry& entry) {
  if (capacity_ == 0) return;
  flush_page(entry.vpn);
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(entry);
}

void Tlb::flush_page(uint32_t vpn) {
  std::erase_if(entries_, [vpn](const TlbEntry& e) { return e.vpn == vpn; });
}

Mmu::Mmu(PhysicalMemory& memory, PerfCounters& counters, MmuConfig config)
    : memory_(memory), counters_(counters), config_(config), tlb_(config.tlb_capacity) {}

void Mmu::set_root(FrameNumber directory_frame) {
  if (directory_frame >= memory_.frame_count()) {
    fail(ErrorCode::PhysicalOutOfBounds, "page directory frame out of range");
  }
  root_ = directory_frame;
  tlb_.flush_all();
}

std::optional<PageTableEntry> Mmu::walk(VAddr vaddr) const {
  PageTableEntry pde{memory_.read32(root_ * kPageSize + directory_index(vaddr) * 4)};
  if (!pde.present()) return std::nullopt;
  PageTableEntry pte{memory_.read32(pde.frame() * kPageSize + table_index(vaddr) * 4)};
  if (!pte.present()) return std::nullopt;
  return pte;
}

std::optional<PAddr> Mmu::debug_translate(VAddr vaddr) const {
  auto pte = walk(vaddr);
  if (!pte) return std::nullopt;
  return pte->frame() * kPageSize + page_offset(vaddr);
}

TranslateResult Mmu::translate(VAddr vaddr, AccessKind kind) {
  const uint32_t vpn = page_of(vaddr);
  PageTableEntry pte;
  bool from_tlb = false;
  if (config_.tlb_enabled) {
    if (const TlbEntry* e = tlb_.lookup(vpn)) {
      ++counters_.tlb_hits;
      pte = e->pte;
      from_tlb = true;
    }
  }
  if (!from_tlb) {
    if (config_.tlb_enabled) ++counters_.tlb_misses;
    ++counters_.pt_walks;
    auto walked = walk(vaddr);
    if (!walked) return PageFault{vaddr, FaultReason::NotPresent};
    pte = *walked;
  }

  if (kind == AccessKind::Write && !pte.writable()) return PageFault{vaddr, FaultReason::WriteProtected};
  if ((kind == AccessKind::Execute || kind == AccessKind::Fetch) && !pte.executable()) {
    return PageFault{vaddr, FaultReason::NoExec};
  }
  if (!from_tlb && config_.tlb_enabled) tlb_.insert(TlbEntry{vpn, pte});

  FrameNumber frame = pte.frame();
  if (kind == AccessKind::Execute || kind == AccessKind::Fetch) {
    if (auto it = exec_alias_.find(vpn); it != exec_alias_.end()) frame = it->second;
  }
  return Translation{frame * kPageSize + page_offset(vaddr), pte.breakpoint()};
}

PAddr Mmu::buddy_addr(PAddr frame_base) const {
  if (page_offset(frame_base) != 0) {
    fail(ErrorCode::InvalidArgument, "buddy_addr: " + hex(frame_base) + " is not page aligned");
  }
  const uint64_t buddy = uint64_t{frame_base} + kPageSize;
  if (buddy + kPageSize > memory_.size()) {
    fail(ErrorCode::PhysicalOutOfBounds, "buddy frame of " + hex(frame_base) + " lies outside physical memory");
  }
  return static_cast<PAddr>(buddy);
}

namespace {

bool suppressed(std::span<const ResumeToken> tokens, VAddr vaddr, AccessKind kind) {
  return std::find(tokens.begin(), tokens.end(), ResumeToken{vaddr, kind}) != tokens.end();
}

bool blocking_match(uint8_t flags, AccessKind kind) {
  switch (kind) {
    case AccessKind::Read: return flags & bpflag::R;
    case AccessKind::Write: return flags & bpflag::W;
    case AccessKind::Execute: return flags & bpflag::X;
    case AccessKind::Fetch: return flags & bpflag::Fetch;
  }
  return false;
}

}  // namespace

CheckResult Mmu::checked_access(VAddr vaddr, AccessKind kind, uint32_t width,
                                std::span<const ResumeToken> tokens, AccessGroup& group) {
  CheckResult result;
  if (width > kMaxAccessBytes) fail(ErrorCode::InvalidArgument, "access wider than 10 bytes");
  const bool fetch = kind == AccessKind::Execute || kind == AccessKind::Fetch;

  for (uint32_t i = 0; i < width; ++i) {
    const VAddr va = vaddr + i;
    const AccessKind byte_kind = (kind == AccessKind::Execute && i > 0) ? AccessKind::Fetch : kind;
    auto tr = translate(va, byte_kind);
    if (auto* pf = std::get_if<PageFault>(&tr)) {
      result.status = CheckResult::Status::Fault;
      result.fault = *pf;
      return result;
    }
    const Translation t = std::get<Translation>(tr);
    const bool check_bp = t.breakpoint && config_.vbp_enabled;

    if (page_of(va) != group.last_vpn) {
      group.last_vpn = page_of(va);
      if (fetch) {
        ++counters_.fetch_refs;
      } else {
        ++counters_.data_refs;
      }
      if (check_bp) ++counters_.buddy_refs;
    }

    uint8_t flags = 0;
    if (check_bp) {
      flags = memory_.read8(buddy_addr(page_base(t.paddr)) + page_offset(t.paddr));
      // The first byte of an executed instruction is also a fetched byte.
      AccessKind kinds[2] = {byte_kind, AccessKind::Fetch};
      const int n = byte_kind == AccessKind::Execute ? 2 : 1;
      for (int k = 0; k < n; ++k) {
        if (suppressed(tokens, va, kinds[k])) continue;
        if ((flags & bpflag::Hook) && kinds[k] != AccessKind::Fetch) {
          result.hooks.push_back(FlagMatch{va, t.paddr, kinds[k], BreakpointByte{flags}});
        }
        if (blocking_match(flags, kinds[k])) {
          result.status = CheckResult::Status::Trap;
          result.trap = FlagMatch{va, t.paddr, kinds[k], BreakpointByte{flags}};
          return result;
        }
      }
    }
    result.paddr[i] = t.paddr;
    result.flags[i] = flags;
    if (check_bp) result.buddy_mask |= static_cast<uint16_t>(1u << i);
    result.count = static_cast<uint8_t>(i + 1);
  }
  return result;
}

void Mmu::set_exec_alias(VAddr page, FrameNumber exec_frame) {
  exec_alias_[page_of(page)] = exec_frame;
  tlb_.flush_page(page_of(page));
}

void Mmu::clear_exec_alias(VAddr page) {
  exec_alias_.erase(page_of(page));
  tlb_.flush_page(page_of(page));
}

std::optional<FrameNumber> Mmu::exec_alias(VAddr page) const {
  auto it = exec_alias_.find(page_of(page));
  if (it == exec_alias_.end()) return std::nullopt;
  return it->second;
}

}  // namespace vbp
