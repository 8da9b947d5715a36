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
#include <span>
#include <string>
#include <vector>

#include "vbpsim/common.hpp"

namespace vbp {

inline constexpr uint32_t kDefaultPhysicalBytes = 16u << 20;

/// Flat physical memory, 4 KiB frames. Out-of-range accesses throw
/// Error(PhysicalOutOfBounds).
class PhysicalMemory {
 public:
  explicit PhysicalMemory(uint32_t bytes = kDefaultPhysicalBytes);

  uint32_t size() const { return static_cast<uint32_t>(bytes_.size()); }
  uint32_t frame_count() const { return size() / kPageSize; }

  uint8_t read8(PAddr addr) const;
  void write8(PAddr addr, uint8_t value);
  uint32_t read32(PAddr addr) const;
  void write32(PAddr addr, uint32_t value);

  std::span<uint8_t> frame(FrameNumber f);
  std::span<const uint8_t> frame(FrameNumber f) const;
  void copy_frame(FrameNumber dst, FrameNumber src);
  void zero_frame(FrameNumber f);

  std::span<const uint8_t> bytes() const { return bytes_; }

  /// Flat dump/load, offset 0 is physical address 0.
  void dump(const std::string& path) const;
  void load(const std::string& path);

 private:
  void check(PAddr addr, uint32_t width) const;

  std::vector<uint8_t> bytes_;
};

}  // namespace vbp
