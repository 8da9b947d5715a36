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

#include "vbpsim/kernel.hpp"

#include <algorithm>

namespace vbp {

// ---------------------------------------------------------------------------
// FrameAllocator

FrameAllocator::FrameAllocator(uint32_t frame_count) : used_(frame_count, false) {}

FrameNumber FrameAllocator::alloc() {
  for (FrameNumber f = 0; f < used_.size(); ++f) {
    if (!used_[f]) {
      used_[f] = true;
      ++used_count_;
      return f;
    }
  }
  fail(ErrorCode::OutOfMemory, "no free frames");
}

std::pair<FrameNumber, FrameNumber> FrameAllocator::alloc_buddy_pair() {
  for (FrameNumber f = 0; f + 1 < used_.size(); ++f) {
    if (!used_[f] && !used_[f + 1]) {
      used_[f] = used_[f + 1] = true;
      used_count_ += 2;
      pairs_.insert(f);
      return {f, f + 1};
    }
  }
  fail(ErrorCode::OutOfContiguousMemory, "no two adjacent free frames");
}

bool FrameAllocator::claim(FrameNumber f) {
  if (f >= used_.size() || used_[f]) return false;
  used_[f] = true;
  ++used_count_;
  return true;
}

void FrameAllocator::free(FrameNumber f) {
  if (f >= used_.size() || !used_[f]) {
    fail(ErrorCode::InvariantViolation, "double free of frame " + std::to_string(f));
  }
  if (pair_of(f)) fail(ErrorCode::InvariantViolation, "freeing frame " + std::to_string(f) + " of a live pair");
  used_[f] = false;
  --used_count_;
}

void FrameAllocator::register_pair(FrameNumber data_frame) {
  if (!used(data_frame) || !used(data_frame + 1) || pair_of(data_frame) || pair_of(data_frame + 1)) {
    fail(ErrorCode::InvariantViolation, "cannot register pair at frame " + std::to_string(data_frame));
  }
  pairs_.insert(data_frame);
}

void FrameAllocator::unregister_pair(FrameNumber data_frame) {
  if (!pairs_.erase(data_frame)) {
    fail(ErrorCode::InvariantViolation, "frame " + std::to_string(data_frame) + " is not a pair");
  }
}

std::optional<FrameNumber> FrameAllocator::pair_of(FrameNumber f) const {
  if (pairs_.count(f)) return f;
  if (f > 0 && pairs_.count(f - 1)) return f - 1;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Kernel

Kernel::Kernel(PhysicalMemory& memory, Mmu& mmu, KernelConfig config)
    : memory_(memory), mmu_(mmu), config_(config), alloc_(memory.frame_count()) {}

Kernel::AddressSpace& Kernel::space(AsId as) {
  if (as >= spaces_.size()) fail(ErrorCode::InvalidArgument, "no address space " + std::to_string(as));
  return spaces_[as];
}

const Kernel::AddressSpace& Kernel::space(AsId as) const {
  if (as >= spaces_.size()) fail(ErrorCode::InvalidArgument, "no address space " + std::to_string(as));
  return spaces_[as];
}

AsId Kernel::create_address_space() {
  AddressSpace s;
  s.directory = alloc_.alloc();
  memory_.zero_frame(s.directory);
  spaces_.push_back(std::move(s));
  return static_cast<AsId>(spaces_.size() - 1);
}

void Kernel::activate(AsId as) {
  mmu_.set_root(space(as).directory);
  active_ = as;
}

FrameNumber Kernel::directory_frame(AsId as) const { return space(as).directory; }

const MappingTable& Kernel::mappings(AsId as) const { return space(as).mappings; }

std::optional<Mapping> Kernel::mapping(AsId as, VAddr vaddr) const {
  const auto& m = space(as).mappings;
  auto it = m.find(page_of(vaddr));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

Mapping& Kernel::mapping_ref(AsId as, VAddr vaddr) {
  auto& m = space(as).mappings;
  auto it = m.find(page_of(vaddr));
  if (it == m.end()) fail(ErrorCode::NotMapped, "page " + hex(page_base(vaddr)) + " is not mapped");
  return it->second;
}

PageTableEntry Kernel::expected_pte(const Mapping& m) const {
  if (m.swapped) return PageTableEntry{};
  uint64_t flags = PageTableEntry::kPresent;
  if (m.writable && m.cow == Mapping::Cow::None) flags |= PageTableEntry::kWritable;
  if (m.executable) flags |= PageTableEntry::kExecutable;
  if (m.breakpoint) flags |= PageTableEntry::kBreakpoint;
  return PageTableEntry::make(m.frame, flags);
}

void Kernel::write_pte(AsId as, VAddr vaddr, PageTableEntry pte) {
  AddressSpace& s = space(as);
  const uint32_t di = directory_index(vaddr);
  auto it = s.tables.find(di);
  if (it == s.tables.end()) {
    FrameNumber t = alloc_.alloc();
    memory_.zero_frame(t);
    it = s.tables.emplace(di, t).first;
    memory_.write32(s.directory * kPageSize + di * 4,
                    static_cast<uint32_t>(PageTableEntry::make(t, PageTableEntry::kPresent |
                                                                      PageTableEntry::kWritable |
                                                                      PageTableEntry::kExecutable)
                                              .value));
  }
  memory_.write32(it->second * kPageSize + table_index(vaddr) * 4, static_cast<uint32_t>(pte.value));
  if (as == active_) mmu_.flush_tlb(vaddr);
}

void Kernel::sync(AsId as, VAddr vaddr) { write_pte(as, vaddr, expected_pte(mapping_ref(as, vaddr))); }

FrameNumber Kernel::map_page(AsId as, VAddr vaddr, bool writable, bool executable) {
  auto& table = space(as).mappings;
  if (table.count(page_of(vaddr))) fail(ErrorCode::InvalidArgument, "page " + hex(page_base(vaddr)) + " already mapped");
  FrameNumber f = alloc_.alloc();
  memory_.zero_frame(f);
  add_ref(f);
  table[page_of(vaddr)] = Mapping{f, writable, executable, false, Mapping::Cow::None, CowPolicy::InheritBuddy, false};
  sync(as, vaddr);
  return f;
}

void Kernel::unmap_page(AsId as, VAddr vaddr) {
  Mapping m = mapping_ref(as, vaddr);
  space(as).mappings.erase(page_of(vaddr));
  write_pte(as, vaddr, PageTableEntry{});
  if (!m.swapped) {
    drop_ref(m.frame);
    return;
  }
  // Last mapping of a swapped page: its slot goes too.
  for (const auto& sp : spaces_) {
    for (const auto& [vpn, other] : sp.mappings) {
      if (other.swapped && other.frame == m.frame) return;
    }
  }
  swap_.erase(m.frame);
}

void Kernel::drop_ref(FrameNumber f) {
  auto it = refs_.find(f);
  if (it == refs_.end()) fail(ErrorCode::InvariantViolation, "frame " + std::to_string(f) + " has no references");
  if (--it->second == 0) {
    refs_.erase(it);
    release_frame(f);
  }
}

void Kernel::release_frame(FrameNumber f) {
  if (alloc_.is_pair_data(f)) {
    alloc_.unregister_pair(f);
    if (observer_) observer_->flags_cleared(f);
    alloc_.free(f + 1);
  }
  alloc_.free(f);
}

PAddr Kernel::physical(AsId as, VAddr vaddr) const {
  auto m = mapping(as, vaddr);
  if (!m || m->swapped) fail(ErrorCode::NotMapped, "address " + hex(vaddr) + " is not resident");
  return m->frame * kPageSize + page_offset(vaddr);
}

uint8_t Kernel::peek(AsId as, VAddr vaddr) const { return memory_.read8(physical(as, vaddr)); }

void Kernel::poke(AsId as, VAddr vaddr, uint8_t value) { memory_.write8(physical(as, vaddr), value); }

void Kernel::attach_buddy(AsId as, VAddr vaddr) {
  Mapping& m = mapping_ref(as, vaddr);
  if (m.swapped) fail(ErrorCode::NotMapped, "page " + hex(page_base(vaddr)) + " is swapped out");
  if (m.breakpoint) return;

  const FrameNumber old = m.frame;
  FrameNumber data = old;
  if (refs_[old] == 1 && alloc_.claim(old + 1)) {
    alloc_.register_pair(old);
  } else {
    data = alloc_.alloc_buddy_pair().first;
    memory_.copy_frame(data, old);
    add_ref(data);
    m.frame = data;
    drop_ref(old);
  }
  memory_.zero_frame(data + 1);
  if (observer_) observer_->flags_cleared(data);
  m.breakpoint = true;
  sync(as, vaddr);
}

PAddr Kernel::buddy_byte(const Mapping& m, VAddr vaddr) const {
  return mmu_.buddy_addr(m.frame * kPageSize) + page_offset(vaddr);
}

void Kernel::set_vbp(AsId as, VAddr vaddr, BreakpointByte flags) {
  if (flags.bits & bpflag::Reserved) {
    fail(ErrorCode::ReservedBitsSet, "flags " + hex(flags.bits, 2) + " use reserved bits");
  }
  auto m = mapping(as, vaddr);
  if (!m || m->swapped) fail(ErrorCode::NoBuddyFrame, "address " + hex(vaddr) + " is not mapped");
  if (!m->breakpoint) {
    if (!config_.auto_attach) fail(ErrorCode::NoBuddyFrame, "page " + hex(page_base(vaddr)) + " has no buddy frame");
    attach_buddy(as, vaddr);
    m = mapping(as, vaddr);
  }
  memory_.write8(buddy_byte(*m, vaddr), flags.bits);
  if (observer_) observer_->flag_written(m->frame * kPageSize + page_offset(vaddr), flags.bits);
}

void Kernel::clear_vbp(AsId as, VAddr vaddr) {
  auto m = mapping(as, vaddr);
  if (!m || m->swapped) fail(ErrorCode::NoBuddyFrame, "address " + hex(vaddr) + " is not mapped");
  if (!m->breakpoint) return;
  memory_.write8(buddy_byte(*m, vaddr), 0);
  if (observer_) observer_->flag_written(m->frame * kPageSize + page_offset(vaddr), 0);
}

BreakpointByte Kernel::read_vbp(AsId as, VAddr vaddr) const {
  auto m = mapping(as, vaddr);
  if (!m || m->swapped) fail(ErrorCode::NoBuddyFrame, "address " + hex(vaddr) + " is not mapped");
  if (!m->breakpoint) return {};
  return BreakpointByte{memory_.read8(buddy_byte(*m, vaddr))};
}

void Kernel::set_vbp_page(AsId as, VAddr page, BreakpointByte flags) {
  page = page_base(page);
  set_vbp(as, page, flags);
  const Mapping m = *mapping(as, page);
  const PAddr buddy = mmu_.buddy_addr(m.frame * kPageSize);
  for (uint32_t off = 0; off < kPageSize; ++off) {
    memory_.write8(buddy + off, flags.bits);
    if (observer_) observer_->flag_written(m.frame * kPageSize + off, flags.bits);
  }
}

void Kernel::swap_out(FrameNumber frame) {
  const auto pair = alloc_.pair_of(frame);
  if (pair && config_.swap_policy == SwapPolicy::PinPair) {
    fail(ErrorCode::BuddyPinned, "frame " + std::to_string(frame) + " belongs to a resident buddy pair");
  }
  const FrameNumber data = pair.value_or(frame);
  if (!refs_.count(data)) fail(ErrorCode::InvalidArgument, "frame " + std::to_string(frame) + " is not a mapped data frame");
  if (swap_.count(data)) fail(ErrorCode::InvalidArgument, "swap slot " + std::to_string(data) + " is busy");

  SwapSlot slot;
  auto d = memory_.frame(data);
  slot.data.assign(d.begin(), d.end());
  if (pair) {
    auto b = memory_.frame(data + 1);
    slot.buddy.assign(b.begin(), b.end());
  }
  swap_[data] = std::move(slot);

  for (AsId as = 0; as < spaces_.size(); ++as) {
    for (auto& [vpn, m] : spaces_[as].mappings) {
      if (!m.swapped && m.frame == data) {
        m.swapped = true;
        write_pte(as, vpn << kPageShift, PageTableEntry{});
      }
    }
  }
  if (pair) {
    alloc_.unregister_pair(data);
    if (observer_) observer_->flags_stashed(data, data);
    alloc_.free(data + 1);
  }
  refs_.erase(data);
  alloc_.free(data);
}

void Kernel::swap_in(FrameNumber key) {
  auto it = swap_.find(key);
  if (it == swap_.end()) fail(ErrorCode::NotSwapped, "frame " + std::to_string(key) + " is not swapped out");
  const bool pair = !it->second.buddy.empty();
  FrameNumber data = 0;
  if (pair) {
    try {
      data = alloc_.alloc_buddy_pair().first;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfContiguousMemory) throw;
      fail(ErrorCode::NoAdjacentPairOnSwapIn, "no adjacent free pair to restore frame " + std::to_string(key));
    }
    auto b = memory_.frame(data + 1);
    std::copy(it->second.buddy.begin(), it->second.buddy.end(), b.begin());
  } else {
    data = alloc_.alloc();
  }
  auto d = memory_.frame(data);
  std::copy(it->second.data.begin(), it->second.data.end(), d.begin());
  swap_.erase(it);
  if (pair && observer_) observer_->flags_restored(key, data);

  for (AsId as = 0; as < spaces_.size(); ++as) {
    for (auto& [vpn, m] : spaces_[as].mappings) {
      if (m.swapped && m.frame == key) {
        m.swapped = false;
        m.frame = data;
        add_ref(data);
        write_pte(as, vpn << kPageShift, expected_pte(m));
      }
    }
  }
}

AsId Kernel::cow_fork_page(AsId parent, VAddr vaddr, CowPolicy policy) {
  Mapping& pm = mapping_ref(parent, vaddr);
  if (pm.swapped) fail(ErrorCode::NotMapped, "page " + hex(page_base(vaddr)) + " is swapped out");
  const AsId child = create_address_space();
  // create_address_space may have grown spaces_; re-fetch references.
  for (const auto& [vpn, m] : space(parent).mappings) {
    if (m.swapped) continue;
    Mapping c = m;
    if (vpn == page_of(vaddr)) {
      c.cow = Mapping::Cow::Child;
      c.cow_policy = policy;
    }
    space(child).mappings[vpn] = c;
    add_ref(c.frame);
    write_pte(child, vpn << kPageShift, expected_pte(c));
  }
  Mapping& parent_map = mapping_ref(parent, vaddr);
  parent_map.cow = Mapping::Cow::Parent;
  parent_map.cow_policy = policy;
  sync(parent, vaddr);
  return child;
}

void Kernel::cow_copy(AsId as, VAddr vaddr, Mapping& m) {
  const FrameNumber old = m.frame;
  FrameNumber fresh = 0;
  if (m.breakpoint && m.cow_policy == CowPolicy::InheritBuddy) {
    fresh = alloc_.alloc_buddy_pair().first;
    memory_.copy_frame(fresh + 1, old + 1);
    if (observer_) observer_->flags_copied(old, fresh);
  } else {
    fresh = alloc_.alloc();
    m.breakpoint = false;
  }
  memory_.copy_frame(fresh, old);
  add_ref(fresh);
  m.frame = fresh;
  m.cow = Mapping::Cow::None;
  sync(as, vaddr);
  drop_ref(old);
}

bool Kernel::handle_page_fault(AsId as, VAddr vaddr, FaultReason reason) {
  if (reason != FaultReason::WriteProtected) return false;
  auto& table = space(as).mappings;
  auto it = table.find(page_of(vaddr));
  if (it == table.end() || it->second.cow == Mapping::Cow::None || !it->second.writable) return false;
  if (it->second.swapped) return false;  // swap it in first
  Mapping& m = it->second;
  const FrameNumber frame = m.frame;

  if (m.cow == Mapping::Cow::Parent) {
    // The parent keeps its frames; every child still sharing them copies now.
    for (AsId other = 0; other < spaces_.size(); ++other) {
      for (auto& [vpn, cm] : spaces_[other].mappings) {
        if (cm.cow == Mapping::Cow::Child && !cm.swapped && cm.frame == frame) {
          cow_copy(other, vpn << kPageShift, cm);
        }
      }
    }
    m.cow = Mapping::Cow::None;
    sync(as, vaddr);
    return true;
  }

  if (refs_[frame] == 1) {
    m.cow = Mapping::Cow::None;
    sync(as, vaddr);
  } else {
    cow_copy(as, vaddr, m);
  }
  // Parent mappings left as sole owner become plain writable again.
  if (refs_.count(frame) && refs_[frame] == 1) {
    for (AsId other = 0; other < spaces_.size(); ++other) {
      for (auto& [vpn, pm] : spaces_[other].mappings) {
        if (pm.cow == Mapping::Cow::Parent && pm.frame == frame) {
          pm.cow = Mapping::Cow::None;
          write_pte(other, vpn << kPageShift, expected_pte(pm));
        }
      }
    }
  }
  return true;
}

std::vector<std::pair<std::string, uint64_t>> Kernel::stats() const {
  return {
      {"frames_total", alloc_.frame_count()},
      {"frames_used", alloc_.used_count()},
      {"pairs_live", alloc_.pairs().size()},
      {"swap_slots_used", swap_.size()},
  };
}

void Kernel::check_invariants() const {
  auto violation = [](const std::string& what) { fail(ErrorCode::InvariantViolation, what); };
  for (FrameNumber d : alloc_.pairs()) {
    if (!alloc_.used(d) || !alloc_.used(d + 1)) violation("pair " + std::to_string(d) + " has a free member");
  }
  for (AsId as = 0; as < spaces_.size(); ++as) {
    const AddressSpace& s = spaces_[as];
    for (const auto& [vpn, m] : s.mappings) {
      const VAddr va = vpn << kPageShift;
      PageTableEntry live;
      if (auto t = s.tables.find(directory_index(va)); t != s.tables.end()) {
        live.value = memory_.read32(t->second * kPageSize + table_index(va) * 4);
      }
      if (live != expected_pte(m)) {
        violation("PTE for " + hex(va) + " in space " + std::to_string(as) + " is " + hex(live.value) +
                  ", mapping says " + hex(expected_pte(m).value));
      }
      if (!live.well_formed()) violation("malformed PTE for " + hex(va));
      if (live.breakpoint() != (live.present() && alloc_.is_pair_data(live.frame()))) {
        violation("BREAKPOINT bit for " + hex(va) + " disagrees with the pair registry");
      }
    }
  }
}

}  // namespace vbp
