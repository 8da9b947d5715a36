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
#include <string_view>
#include <vector>

#include "vbpsim/assembler.hpp"
#include "vbpsim/common.hpp"

namespace vbp {

struct ImageSegment {
  VAddr vaddr = 0;
  uint32_t offset = 0;  // into GuestImage::bytes
  uint32_t length = 0;
  std::string perms = "rwx";

  bool operator==(const ImageSegment&) const = default;
};

/// A flat binary plus its manifest. The manifest is a text sidecar:
///
///     entry 0x1000
///     segment 0x1000 0 0x40 rx      ; vaddr, file offset, length, perms
///     buddy 0x3000                  ; page needing a buddy frame
///     symbol loop 0x1010
struct GuestImage {
  std::vector<uint8_t> bytes;
  VAddr entry = 0;
  std::vector<ImageSegment> segments;
  std::vector<VAddr> buddy_pages;
  std::map<std::string, VAddr> symbols;

  /// Throws Error(BadImage) unless segments are in bounds and
  /// non-overlapping and the entry lies in an executable segment.
  void validate() const;

  VAddr symbol(const std::string& name) const;  // BadImage if missing
  /// Resolves a symbol name, `name+off`, or a number.
  std::optional<VAddr> resolve(std::string_view text) const;

  std::string manifest() const;
  static GuestImage from_manifest(std::string_view manifest, std::vector<uint8_t> bytes);

  void save(const std::string& binary_path, const std::string& manifest_path) const;
  static GuestImage load(const std::string& binary_path, const std::string& manifest_path);
  /// Loads `path` and `path + ".manifest"`.
  static GuestImage load(const std::string& binary_path);

  bool operator==(const GuestImage&) const = default;
};

/// Throws Error(BadImage, "no entry point") for sources without code.
GuestImage image_from_asm(const assembler::AsmImage& asm_image);
GuestImage assemble_image(std::string_view source);

}  // namespace vbp
