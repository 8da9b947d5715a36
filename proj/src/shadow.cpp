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

#include "vbpsim/shadow.hpp"

namespace vbp {

uint8_t ShadowOracle::get(PAddr data_byte) const {
  auto it = flags_.find(data_byte);
  return it == flags_.end() ? 0 : it->second;
}

void ShadowOracle::set(PAddr data_byte, uint8_t flags) {
  if (flags == 0) {
    flags_.erase(data_byte);
  } else {
    flags_[data_byte] = flags;
  }
}

std::map<uint32_t, uint8_t> ShadowOracle::take_frame(FrameNumber frame) {
  std::map<uint32_t, uint8_t> out;
  const PAddr base = frame * kPageSize;
  for (uint32_t off = 0; off < kPageSize; ++off) {
    auto it = flags_.find(base + off);
    if (it == flags_.end()) continue;
    out[off] = it->second;
    flags_.erase(it);
  }
  return out;
}

void ShadowOracle::flags_cleared(FrameNumber data_frame) { take_frame(data_frame); }

void ShadowOracle::flags_copied(FrameNumber src, FrameNumber dst) {
  take_frame(dst);
  const PAddr from = src * kPageSize;
  const PAddr to = dst * kPageSize;
  for (uint32_t off = 0; off < kPageSize; ++off) set(to + off, get(from + off));
}

void ShadowOracle::flags_stashed(FrameNumber data_frame, FrameNumber swap_key) {
  stash_[swap_key] = take_frame(data_frame);
}

void ShadowOracle::flags_restored(FrameNumber swap_key, FrameNumber data_frame) {
  auto node = stash_.extract(swap_key);
  take_frame(data_frame);
  if (node.empty()) return;
  for (auto [off, f] : node.mapped()) set(data_frame * kPageSize + off, f);
}

std::string ShadowOracle::compare(const PhysicalMemory& memory, const FrameAllocator& alloc) const {
  for (FrameNumber d : alloc.pairs()) {
    const PAddr base = d * kPageSize;
    for (uint32_t off = 0; off < kPageSize; ++off) {
      const uint8_t live = memory.read8(base + kPageSize + off);
      const uint8_t want = get(base + off);
      if (live != want) {
        return "buddy byte for " + hex(base + off) + " is " + hex(live, 2) + ", shadow has " + hex(want, 2);
      }
    }
  }
  for (const auto& [paddr, f] : flags_) {
    if (!alloc.is_pair_data(page_of(paddr))) {
      return "shadow entry " + hex(paddr) + "=" + hex(f, 2) + " lies outside any buddy pair";
    }
  }
  return {};
}

}  // namespace vbp
