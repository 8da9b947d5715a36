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

// Baseline trapping mechanisms: int3 patching, the four hardware debug
// registers, and a split read-write/execute view with evict-on-write.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "vbpsim/kernel.hpp"
#include "vbpsim/machine.hpp"

namespace vbp {

inline constexpr uint8_t kInt3Byte = 0xCC;

/// Software breakpoints by binary modification. The 0xCC byte is written
/// into the guest's own data frame and is visible to guest reads.
class Int3Manager {
 public:
  Int3Manager(Kernel& kernel, AsId as) : kernel_(kernel), as_(as) {}

  void set(VAddr vaddr);  // AlreadySet
  void clear(VAddr vaddr);  // NotSet; restores the saved byte
  void clear_all();
  bool owns(VAddr vaddr) const { return saved_.count(vaddr) != 0; }
  std::optional<uint8_t> saved(VAddr vaddr) const;
  const std::map<VAddr, uint8_t>& breakpoints() const { return saved_; }

  /// Temporarily puts the original byte back (step-over protocol).
  void disarm(VAddr vaddr);
  void arm(VAddr vaddr);

 private:
  Kernel& kernel_;
  AsId as_;
  std::map<VAddr, uint8_t> saved_;
};

/// The four debug-register slots. Guests can read them with RDDR.
class DebugRegisters {
 public:
  void set(int slot, VAddr vaddr, DrKind kind);  // SlotOutOfRange
  void clear(int slot);                          // SlotOutOfRange
  void clear_all() { slots_ = {}; }
  /// First free slot; DrExhausted when all four are enabled.
  int insert(VAddr vaddr, DrKind kind);
  /// Disables every slot watching `vaddr`. Returns false if none did.
  bool remove(VAddr vaddr);
  int enabled_count() const;
  const DebugRegisterFile& file() const { return slots_; }

 private:
  DebugRegisterFile slots_{};
};

/// Split view: instruction fetches on an instrumented page are served from
/// a private exec frame carrying 0xCC at each breakpoint, while data reads
/// and writes go to the untouched clean frame. Any guest write to an
/// instrumented page evicts the page's breakpoints.
class SplitView : public CodeWriteHandler {
 public:
  SplitView(Kernel& kernel, AsId as) : kernel_(kernel), as_(as) {}
  ~SplitView() override;

  void instrument(VAddr page, const std::set<VAddr>& breakpoints);
  void add(VAddr vaddr);
  void remove(VAddr vaddr);  // NotSet
  bool owns(VAddr vaddr) const;
  void release_all();

  /// Step-over protocol on the exec frame; invisible to the guest.
  void disarm(VAddr vaddr);
  void arm(VAddr vaddr);

  bool watches(VAddr vaddr) const override;
  void on_guest_write(VAddr vaddr, uint64_t cycle, std::vector<DebugEvent>& notes) override;

  size_t evictions() const { return evictions_; }
  std::optional<FrameNumber> exec_frame(VAddr page) const;
  std::set<VAddr> breakpoints(VAddr page) const;

 private:
  struct Page {
    FrameNumber exec_frame = 0;
    std::set<VAddr> breakpoints;
  };

  void evict(VAddr page);
  void write_exec(const Page& p, VAddr vaddr, uint8_t value);

  Kernel& kernel_;
  AsId as_;
  std::map<VAddr, Page> pages_;  // keyed by page base
  size_t evictions_ = 0;
};

}  // namespace vbp
