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
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vbpsim/common.hpp"
#include "vbpsim/mmu.hpp"
#include "vbpsim/phys_mem.hpp"

namespace vbp {

/// First-fit frame allocator with a registry of (data, breakpoint) pairs.
/// A pair's breakpoint frame is always the frame directly after its data
/// frame.
class FrameAllocator {
 public:
  explicit FrameAllocator(uint32_t frame_count);

  FrameNumber alloc();
  /// Allocates and registers the first adjacent free pair.
  std::pair<FrameNumber, FrameNumber> alloc_buddy_pair();
  /// Marks `f` used if it is free. Returns false if it was already used.
  bool claim(FrameNumber f);
  void free(FrameNumber f);
  bool used(FrameNumber f) const { return f < used_.size() && used_[f]; }

  void register_pair(FrameNumber data_frame);
  void unregister_pair(FrameNumber data_frame);
  /// Data frame of the pair `f` belongs to, if any.
  std::optional<FrameNumber> pair_of(FrameNumber f) const;
  bool is_pair_data(FrameNumber f) const { return pairs_.count(f) != 0; }
  const std::unordered_set<FrameNumber>& pairs() const { return pairs_; }

  uint32_t frame_count() const { return static_cast<uint32_t>(used_.size()); }
  uint32_t used_count() const { return used_count_; }
  const std::vector<bool>& bitmap() const { return used_; }

 private:
  std::vector<bool> used_;
  uint32_t used_count_ = 0;
  std::unordered_set<FrameNumber> pairs_;  // keyed by data frame
};

enum class SwapPolicy { PinPair, EvictTogether };
enum class CowPolicy { InheritBuddy, LeaveBehind };

/// Receives every change the kernel makes to breakpoint flags, so an
/// independent shadow copy can be kept in lockstep.
class BuddyObserver {
 public:
  virtual ~BuddyObserver() = default;
  virtual void flag_written(PAddr data_byte, uint8_t flags) = 0;
  virtual void flags_cleared(FrameNumber data_frame) = 0;
  virtual void flags_copied(FrameNumber src_data_frame, FrameNumber dst_data_frame) = 0;
  virtual void flags_stashed(FrameNumber data_frame, FrameNumber swap_key) = 0;
  virtual void flags_restored(FrameNumber swap_key, FrameNumber data_frame) = 0;
};

using AsId = uint32_t;

struct Mapping {
  enum class Cow { None, Parent, Child };

  FrameNumber frame = 0;
  bool writable = false;
  bool executable = false;
  bool breakpoint = false;
  Cow cow = Cow::None;
  CowPolicy cow_policy = CowPolicy::InheritBuddy;
  bool swapped = false;

  bool operator==(const Mapping&) const = default;
};

/// vpn -> mapping, mirroring the live PTEs of one address space.
using MappingTable = std::map<uint32_t, Mapping>;

struct KernelConfig {
  bool auto_attach = true;
  SwapPolicy swap_policy = SwapPolicy::PinPair;
};

/// The simulated OS: address spaces, page tables, buddy-frame management,
/// the breakpoint manipulation API, swap and copy-on-write.
class Kernel {
 public:
  Kernel(PhysicalMemory& memory, Mmu& mmu, KernelConfig config = {});

  AsId create_address_space();
  void activate(AsId as);
  AsId active() const { return active_; }
  size_t address_space_count() const { return spaces_.size(); }
  FrameNumber directory_frame(AsId as) const;

  FrameNumber map_page(AsId as, VAddr vaddr, bool writable, bool executable);
  void unmap_page(AsId as, VAddr vaddr);
  const MappingTable& mappings(AsId as) const;
  std::optional<Mapping> mapping(AsId as, VAddr vaddr) const;

  /// Privileged access to guest memory (no permission or breakpoint
  /// checks). Throws NotMapped for non-resident pages.
  uint8_t peek(AsId as, VAddr vaddr) const;
  void poke(AsId as, VAddr vaddr, uint8_t value);
  PAddr physical(AsId as, VAddr vaddr) const;

  /// Adds a buddy frame to an existing mapping, relocating the data when
  /// the adjacent frame is taken. Idempotent.
  void attach_buddy(AsId as, VAddr vaddr);

  void set_vbp(AsId as, VAddr vaddr, BreakpointByte flags);
  void clear_vbp(AsId as, VAddr vaddr);
  BreakpointByte read_vbp(AsId as, VAddr vaddr) const;
  void set_vbp_page(AsId as, VAddr page, BreakpointByte flags);

  void set_swap_policy(SwapPolicy p) { config_.swap_policy = p; }
  void swap_out(FrameNumber frame);
  void swap_in(FrameNumber frame);
  bool swapped(FrameNumber frame) const { return swap_.count(frame) != 0; }

  /// Creates a child address space sharing every mapping of `parent`, with
  /// the page at `vaddr` copy-on-write in both.
  AsId cow_fork_page(AsId parent, VAddr vaddr, CowPolicy policy);

  /// Resolves copy-on-write faults. Returns false for faults the kernel
  /// does not own.
  bool handle_page_fault(AsId as, VAddr vaddr, FaultReason reason);

  std::vector<std::pair<std::string, uint64_t>> stats() const;

  /// Throws Error(InvariantViolation) if any mapping disagrees with its PTE,
  /// a pair is not adjacent, or a BREAKPOINT bit lacks a registered pair.
  void check_invariants() const;

  void set_observer(BuddyObserver* observer) { observer_ = observer; }
  FrameAllocator& allocator() { return alloc_; }
  const FrameAllocator& allocator() const { return alloc_; }
  PhysicalMemory& memory() { return memory_; }
  Mmu& mmu() { return mmu_; }

 private:
  struct AddressSpace {
    FrameNumber directory = 0;
    std::map<uint32_t, FrameNumber> tables;  // directory index -> table frame
    MappingTable mappings;
  };

  struct SwapSlot {
    std::vector<uint8_t> data;
    std::vector<uint8_t> buddy;  // empty for unpaired frames
  };

  AddressSpace& space(AsId as);
  const AddressSpace& space(AsId as) const;
  Mapping& mapping_ref(AsId as, VAddr vaddr);
  PageTableEntry expected_pte(const Mapping& m) const;
  void write_pte(AsId as, VAddr vaddr, PageTableEntry pte);
  void sync(AsId as, VAddr vaddr);
  void add_ref(FrameNumber f) { ++refs_[f]; }
  void drop_ref(FrameNumber f);
  void release_frame(FrameNumber f);
  PAddr buddy_byte(const Mapping& m, VAddr vaddr) const;
  void cow_copy(AsId as, VAddr vaddr, Mapping& m);

  PhysicalMemory& memory_;
  Mmu& mmu_;
  KernelConfig config_;
  FrameAllocator alloc_;
  std::vector<AddressSpace> spaces_;
  AsId active_ = 0;
  std::unordered_map<FrameNumber, uint32_t> refs_;
  std::map<FrameNumber, SwapSlot> swap_;
  BuddyObserver* observer_ = nullptr;
};

}  // namespace vbp
