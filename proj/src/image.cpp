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

#include "vbpsim/image.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

namespace vbp {

void GuestImage::validate() const {
  auto sorted = segments;
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.vaddr < b.vaddr; });
  bool entry_ok = false;
  for (size_t i = 0; i < sorted.size(); ++i) {
    const auto& s = sorted[i];
    if (uint64_t{s.offset} + s.length > bytes.size()) {
      fail(ErrorCode::BadImage, "segment " + hex(s.vaddr) + " extends past the end of the binary");
    }
    if (uint64_t{s.vaddr} + s.length > 0x100000000ull) fail(ErrorCode::BadImage, "segment " + hex(s.vaddr) + " wraps");
    if (s.perms.empty() || s.perms.find_first_not_of("rwx") != std::string::npos) {
      fail(ErrorCode::BadImage, "segment " + hex(s.vaddr) + " has bad perms '" + s.perms + "'");
    }
    if (i > 0 && uint64_t{sorted[i - 1].vaddr} + sorted[i - 1].length > s.vaddr) {
      fail(ErrorCode::BadImage, "segments overlap at " + hex(s.vaddr));
    }
    if (entry >= s.vaddr && uint64_t{entry} < uint64_t{s.vaddr} + s.length &&
        s.perms.find('x') != std::string::npos) {
      entry_ok = true;
    }
  }
  if (!entry_ok) fail(ErrorCode::BadImage, "entry " + hex(entry) + " is not inside an executable segment");
}

VAddr GuestImage::symbol(const std::string& name) const {
  auto it = symbols.find(name);
  if (it == symbols.end()) fail(ErrorCode::BadImage, "no symbol '" + name + "'");
  return it->second;
}

std::optional<VAddr> GuestImage::resolve(std::string_view text) const {
  if (text.empty()) return std::nullopt;
  std::string_view base = text;
  int64_t off = 0;
  if (auto p = text.find_first_of("+-", 1); p != std::string_view::npos) {
    auto o = parse_int(text.substr(p + 1));
    if (!o) return std::nullopt;
    off = text[p] == '-' ? -*o : *o;
    base = text.substr(0, p);
  }
  if (auto it = symbols.find(std::string(base)); it != symbols.end()) {
    return static_cast<VAddr>(it->second + off);
  }
  auto v = parse_int(base);
  if (!v || *v < 0 || *v > 0xFFFFFFFFll) return std::nullopt;
  return static_cast<VAddr>(*v + off);
}

std::string GuestImage::manifest() const {
  std::ostringstream out;
  out << "entry " << hex(entry) << "\n";
  for (const auto& s : segments) {
    out << "segment " << hex(s.vaddr) << " " << s.offset << " " << hex(s.length) << " " << s.perms << "\n";
  }
  for (VAddr b : buddy_pages) out << "buddy " << hex(b) << "\n";
  for (const auto& [name, addr] : symbols) out << "symbol " << name << " " << hex(addr) << "\n";
  return out.str();
}

GuestImage GuestImage::from_manifest(std::string_view manifest, std::vector<uint8_t> bytes) {
  GuestImage img;
  img.bytes = std::move(bytes);
  bool have_entry = false;
  std::istringstream in{std::string(manifest)};
  std::string line;
  int line_no = 0;
  auto number = [&](const std::string& s) -> uint32_t {
    auto v = parse_int(s);
    if (!v || *v < 0 || *v > 0xFFFFFFFFll) {
      fail(ErrorCode::BadImage, "manifest line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return static_cast<uint32_t>(*v);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto c = line.find(';'); c != std::string::npos) line.resize(c);
    std::istringstream ls(line);
    std::vector<std::string> w{std::istream_iterator<std::string>(ls), std::istream_iterator<std::string>()};
    if (w.empty()) continue;
    auto want = [&](size_t n) {
      if (w.size() != n) {
        fail(ErrorCode::BadImage, "manifest line " + std::to_string(line_no) + ": '" + w[0] + "' expects " +
                                      std::to_string(n - 1) + " fields");
      }
    };
    if (w[0] == "entry") {
      want(2);
      img.entry = number(w[1]);
      have_entry = true;
    } else if (w[0] == "segment") {
      want(5);
      img.segments.push_back(ImageSegment{number(w[1]), number(w[2]), number(w[3]), w[4]});
    } else if (w[0] == "buddy") {
      want(2);
      img.buddy_pages.push_back(page_base(number(w[1])));
    } else if (w[0] == "symbol") {
      want(3);
      img.symbols[w[1]] = number(w[2]);
    } else {
      fail(ErrorCode::BadImage, "manifest line " + std::to_string(line_no) + ": unknown key '" + w[0] + "'");
    }
  }
  if (!have_entry) fail(ErrorCode::BadImage, "manifest has no entry point");
  img.validate();
  return img;
}

void GuestImage::save(const std::string& binary_path, const std::string& manifest_path) const {
  std::ofstream bin(binary_path, std::ios::binary);
  bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  std::ofstream man(manifest_path);
  man << manifest();
  if (!bin || !man) fail(ErrorCode::BadImage, "cannot write " + binary_path);
}

GuestImage GuestImage::load(const std::string& binary_path, const std::string& manifest_path) {
  std::ifstream bin(binary_path, std::ios::binary);
  if (!bin) fail(ErrorCode::BadImage, "cannot open " + binary_path);
  std::vector<uint8_t> bytes{std::istreambuf_iterator<char>(bin), std::istreambuf_iterator<char>()};
  std::ifstream man(manifest_path);
  if (!man) fail(ErrorCode::BadImage, "cannot open " + manifest_path);
  std::string text{std::istreambuf_iterator<char>(man), std::istreambuf_iterator<char>()};
  return from_manifest(text, std::move(bytes));
}

GuestImage GuestImage::load(const std::string& binary_path) { return load(binary_path, binary_path + ".manifest"); }

GuestImage image_from_asm(const assembler::AsmImage& a) {
  if (!a.entry) fail(ErrorCode::BadImage, "no entry point");
  GuestImage img;
  img.entry = *a.entry;
  for (const auto& seg : a.segments) {
    img.segments.push_back(ImageSegment{seg.origin, static_cast<uint32_t>(img.bytes.size()),
                                        static_cast<uint32_t>(seg.bytes.size()), seg.perms});
    img.bytes.insert(img.bytes.end(), seg.bytes.begin(), seg.bytes.end());
  }
  img.buddy_pages = a.buddy_pages;
  img.symbols = a.symbols;
  img.validate();
  return img;
}

GuestImage assemble_image(std::string_view source) { return image_from_asm(assembler::assemble(source)); }

}  // namespace vbp
