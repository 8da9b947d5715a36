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
#include <string>
#include <unordered_map>

#include "vbpsim/kernel.hpp"

namespace vbp {

/// Flat physical-byte -> flags map kept in step with the kernel's
/// breakpoint API through the BuddyObserver interface. Never reads buddy
/// frames; only zero-valued entries are absent.
class ShadowOracle : public BuddyObserver {
 public:
  uint8_t get(PAddr data_byte) const;
  void set(PAddr data_byte, uint8_t flags);
  const std::unordered_map<PAddr, uint8_t>& entries() const { return flags_; }

  void flag_written(PAddr data_byte, uint8_t flags) override { set(data_byte, flags); }
  void flags_cleared(FrameNumber data_frame) override;
  void flags_copied(FrameNumber src_data_frame, FrameNumber dst_data_frame) override;
  void flags_stashed(FrameNumber data_frame, FrameNumber swap_key) override;
  void flags_restored(FrameNumber swap_key, FrameNumber data_frame) override;

  /// Compares every registered pair's buddy frame with the map and checks
  /// that no entry lies outside a pair. Returns an empty string on
  /// agreement, else a description of the first mismatch.
  std::string compare(const PhysicalMemory& memory, const FrameAllocator& alloc) const;

 private:
  std::map<uint32_t, uint8_t> take_frame(FrameNumber frame);

  std::unordered_map<PAddr, uint8_t> flags_;
  std::map<FrameNumber, std::map<uint32_t, uint8_t>> stash_;
};

}  // namespace vbp
