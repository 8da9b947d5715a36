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

#include "vbpsim/phys_mem.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

namespace vbp {

PhysicalMemory::PhysicalMemory(uint32_t bytes) {
  if (bytes == 0 || bytes % kPageSize != 0) {
    fail(ErrorCode::InvalidArgument, "physical memory size must be a non-zero multiple of 4096");
  }
  bytes_.assign(bytes, 0);
}

void PhysicalMemory::check(PAddr addr, uint32_t width) const {
  if (uint64_t{addr} + width > bytes_.size()) {
    fail(ErrorCode::PhysicalOutOfBounds, "physical address " + hex(addr) + " out of bounds");
  }
}

uint8_t PhysicalMemory::read8(PAddr addr) const {
  check(addr, 1);
  return bytes_[addr];
}

void PhysicalMemory::write8(PAddr addr, uint8_t value) {
  check(addr, 1);
  bytes_[addr] = value;
}

uint32_t PhysicalMemory::read32(PAddr addr) const {
  check(addr, 4);
  return uint32_t{bytes_[addr]} | uint32_t{bytes_[addr + 1]} << 8 |
         uint32_t{bytes_[addr + 2]} << 16 | uint32_t{bytes_[addr + 3]} << 24;
}

void PhysicalMemory::write32(PAddr addr, uint32_t value) {
  check(addr, 4);
  for (int i = 0; i < 4; ++i) bytes_[addr + i] = static_cast<uint8_t>(value >> (8 * i));
}

std::span<uint8_t> PhysicalMemory::frame(FrameNumber f) {
  check(f * kPageSize, kPageSize);
  return std::span<uint8_t>(bytes_).subspan(size_t{f} * kPageSize, kPageSize);
}

std::span<const uint8_t> PhysicalMemory::frame(FrameNumber f) const {
  check(f * kPageSize, kPageSize);
  return std::span<const uint8_t>(bytes_).subspan(size_t{f} * kPageSize, kPageSize);
}

void PhysicalMemory::copy_frame(FrameNumber dst, FrameNumber src) {
  auto from = frame(src);
  auto to = frame(dst);
  std::copy(from.begin(), from.end(), to.begin());
}

void PhysicalMemory::zero_frame(FrameNumber f) {
  auto fr = frame(f);
  std::fill(fr.begin(), fr.end(), 0);
}

void PhysicalMemory::dump(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
}

void PhysicalMemory::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidArgument, "cannot read " + path);
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() > bytes_.size()) fail(ErrorCode::PhysicalOutOfBounds, "dump larger than physical memory");
  std::copy(data.begin(), data.end(), bytes_.begin());
  std::fill(bytes_.begin() + static_cast<std::ptrdiff_t>(data.size()), bytes_.end(), 0);
}

}  // namespace vbp
