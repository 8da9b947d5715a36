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

#include "vbpsim/legacy.hpp"

namespace vbp {

// ---------------------------------------------------------------------------
// Int3Manager

void Int3Manager::set(VAddr vaddr) {
  if (owns(vaddr)) fail(ErrorCode::AlreadySet, "int3 already set at " + hex(vaddr));
  const uint8_t original = kernel_.peek(as_, vaddr);
  kernel_.poke(as_, vaddr, kInt3Byte);
  saved_[vaddr] = original;
}

void Int3Manager::clear(VAddr vaddr) {
  auto it = saved_.find(vaddr);
  if (it == saved_.end()) fail(ErrorCode::NotSet, "no int3 at " + hex(vaddr));
  kernel_.poke(as_, vaddr, it->second);
  saved_.erase(it);
}

void Int3Manager::clear_all() {
  while (!saved_.empty()) clear(saved_.begin()->first);
}

std::optional<uint8_t> Int3Manager::saved(VAddr vaddr) const {
  auto it = saved_.find(vaddr);
  if (it == saved_.end()) return std::nullopt;
  return it->second;
}

void Int3Manager::disarm(VAddr vaddr) {
  auto it = saved_.find(vaddr);
  if (it == saved_.end()) fail(ErrorCode::NotSet, "no int3 at " + hex(vaddr));
  kernel_.poke(as_, vaddr, it->second);
}

void Int3Manager::arm(VAddr vaddr) {
  if (!owns(vaddr)) fail(ErrorCode::NotSet, "no int3 at " + hex(vaddr));
  kernel_.poke(as_, vaddr, kInt3Byte);
}

// ---------------------------------------------------------------------------
// DebugRegisters

void DebugRegisters::set(int slot, VAddr vaddr, DrKind kind) {
  if (slot < 0 || slot >= isa::kNumDebugSlots) {
    fail(ErrorCode::SlotOutOfRange, "debug register slot " + std::to_string(slot) + " out of range 0-3");
  }
  slots_[slot] = DrSlot{vaddr, kind, true};
}

void DebugRegisters::clear(int slot) {
  if (slot < 0 || slot >= isa::kNumDebugSlots) {
    fail(ErrorCode::SlotOutOfRange, "debug register slot " + std::to_string(slot) + " out of range 0-3");
  }
  slots_[slot] = DrSlot{};
}

int DebugRegisters::insert(VAddr vaddr, DrKind kind) {
  for (int i = 0; i < isa::kNumDebugSlots; ++i) {
    if (slots_[i].enabled && slots_[i].vaddr == vaddr && slots_[i].kind == kind) return i;
  }
  for (int i = 0; i < isa::kNumDebugSlots; ++i) {
    if (!slots_[i].enabled) {
      slots_[i] = DrSlot{vaddr, kind, true};
      return i;
    }
  }
  fail(ErrorCode::DrExhausted, "all 4 debug registers are in use");
}

bool DebugRegisters::remove(VAddr vaddr) {
  bool any = false;
  for (auto& s : slots_) {
    if (s.enabled && s.vaddr == vaddr) {
      s = DrSlot{};
      any = true;
    }
  }
  return any;
}

int DebugRegisters::enabled_count() const {
  int n = 0;
  for (const auto& s : slots_) n += s.enabled;
  return n;
}

// ---------------------------------------------------------------------------
// SplitView

SplitView::~SplitView() {
  try {
    release_all();
  } catch (...) {
  }
}

void SplitView::write_exec(const Page& p, VAddr vaddr, uint8_t value) {
  kernel_.memory().write8(p.exec_frame * kPageSize + page_offset(vaddr), value);
}

void SplitView::instrument(VAddr page, const std::set<VAddr>& breakpoints) {
  page = page_base(page);
  auto it = pages_.find(page);
  if (it == pages_.end()) {
    const PAddr clean = kernel_.physical(as_, page);
    Page p;
    p.exec_frame = kernel_.allocator().alloc();
    kernel_.memory().copy_frame(p.exec_frame, page_of(clean));
    it = pages_.emplace(page, p).first;
    kernel_.mmu().set_exec_alias(page, p.exec_frame);
  }
  for (VAddr v : breakpoints) {
    if (page_base(v) != page) fail(ErrorCode::InvalidArgument, hex(v) + " is not on page " + hex(page));
    it->second.breakpoints.insert(v);
    write_exec(it->second, v, kInt3Byte);
  }
}

void SplitView::add(VAddr vaddr) { instrument(page_base(vaddr), {vaddr}); }

void SplitView::remove(VAddr vaddr) {
  auto it = pages_.find(page_base(vaddr));
  if (it == pages_.end() || !it->second.breakpoints.erase(vaddr)) {
    fail(ErrorCode::NotSet, "no split-view breakpoint at " + hex(vaddr));
  }
  write_exec(it->second, vaddr, kernel_.peek(as_, vaddr));
  if (it->second.breakpoints.empty()) {
    kernel_.mmu().clear_exec_alias(it->first);
    kernel_.allocator().free(it->second.exec_frame);
    pages_.erase(it);
  }
}

bool SplitView::owns(VAddr vaddr) const {
  auto it = pages_.find(page_base(vaddr));
  return it != pages_.end() && it->second.breakpoints.count(vaddr);
}

void SplitView::release_all() {
  for (auto& [page, p] : pages_) {
    kernel_.mmu().clear_exec_alias(page);
    kernel_.allocator().free(p.exec_frame);
  }
  pages_.clear();
}

void SplitView::disarm(VAddr vaddr) {
  auto it = pages_.find(page_base(vaddr));
  if (it == pages_.end()) fail(ErrorCode::NotSet, "no split-view breakpoint at " + hex(vaddr));
  write_exec(it->second, vaddr, kernel_.peek(as_, vaddr));
}

void SplitView::arm(VAddr vaddr) {
  auto it = pages_.find(page_base(vaddr));
  if (it == pages_.end() || !it->second.breakpoints.count(vaddr)) return;  // evicted meanwhile
  write_exec(it->second, vaddr, kInt3Byte);
}

bool SplitView::watches(VAddr vaddr) const { return pages_.count(page_base(vaddr)) != 0; }

void SplitView::on_guest_write(VAddr vaddr, uint64_t cycle, std::vector<DebugEvent>& notes) {
  if (!watches(vaddr)) return;
  evict(page_base(vaddr));
  DebugEvent e;
  e.kind = EventKind::Eviction;
  e.vaddr = vaddr;
  e.access = AccessKind::Write;
  e.cycle = cycle;
  notes.push_back(e);
}

void SplitView::evict(VAddr page) {
  auto it = pages_.find(page);
  kernel_.mmu().clear_exec_alias(page);
  kernel_.allocator().free(it->second.exec_frame);
  pages_.erase(it);
  ++evictions_;
}

std::optional<FrameNumber> SplitView::exec_frame(VAddr page) const {
  auto it = pages_.find(page_base(page));
  if (it == pages_.end()) return std::nullopt;
  return it->second.exec_frame;
}

std::set<VAddr> SplitView::breakpoints(VAddr page) const {
  auto it = pages_.find(page_base(page));
  if (it == pages_.end()) return {};
  return it->second.breakpoints;
}

}  // namespace vbp
