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

// Helpers shared by the test binaries: seeding, a random guest
// generator, and small reference computations used as oracles.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vbpsim/image.hpp"
#include "vbpsim/phys_mem.hpp"
#include "vbpsim/session.hpp"

namespace vbptest {

using namespace vbp;

/// VBPSIM_SEED if set, else a fixed default. Printed once per binary so
/// a failing run can be reproduced.
inline uint64_t seed() {
  static const uint64_t s = [] {
    uint64_t v = 0x5EEDu;
    if (const char* env = std::getenv("VBPSIM_SEED")) {
      if (auto p = parse_int(env)) v = static_cast<uint64_t>(*p);
    }
    std::cerr << "VBPSIM_SEED=" << v << "\n";
    return v;
  }();
  return s;
}

inline std::mt19937_64 rng(uint64_t salt = 0) { return std::mt19937_64(seed() ^ (salt * 0x9E3779B97F4A7C15ull)); }

template <class R>
uint64_t pick(R& r, uint64_t lo, uint64_t hi) {
  return std::uniform_int_distribution<uint64_t>(lo, hi)(r);
}

inline Session session_from(std::string_view source, SessionConfig cfg = {}) {
  return Session(assemble_image(source), cfg);
}

inline std::string reg(uint64_t r) { return "R" + std::to_string(r); }

/// A terminating random guest: straight-line code with forward branches
/// and at most a few counted loops, over two data pages (0x3000 with a
/// buddy frame, 0x4000 without) addressed through R7. Code lives on a
/// writable page so stores may hit it. R6 is the loop counter; neither
/// R6 nor R7 is written by generated bodies.
template <class R>
std::string random_guest(R& r, int length = 40) {
  std::ostringstream s;
  s << "org 0x1000 rwx\n_start:\n        MOVI R7, 0x3000\n";
  int label = 0;
  int pending_skip = -1;  // instructions until the forward label
  int loops = 0;
  bool in_loop = false;
  int loop_left = 0;
  auto scratch = [&] { return reg(pick(r, 0, 5)); };
  auto data_off = [&] {
    // Mostly the buddy page, sometimes the plain page, sometimes straddling.
    switch (pick(r, 0, 5)) {
      case 0: return 0x1000 + pick(r, 0, 0xFF8);
      case 1: return 0x1000 - pick(r, 1, 7);
      default: return pick(r, 0, 0x3F);
    }
  };
  for (int i = 0; i < length; ++i) {
    if (!in_loop && loops < 3 && pick(r, 0, 12) == 0) {
      s << "        MOVI R6, " << pick(r, 1, 6) << "\nloop" << loops << ":\n";
      in_loop = true;
      loop_left = static_cast<int>(pick(r, 2, 6));
    }
    switch (pick(r, 0, 13)) {
      case 0: s << "        MOVI " << scratch() << ", " << (pick(r, 0, 1) ? pick(r, 0, INT64_MAX) : pick(r, 0, 300)) << "\n"; break;
      case 1: s << "        MOVR " << scratch() << ", " << reg(pick(r, 0, 7)) << "\n"; break;
      case 2: s << "        ADD " << scratch() << ", " << reg(pick(r, 0, 7)) << "\n"; break;
      case 3: s << "        SUB " << scratch() << ", " << reg(pick(r, 0, 7)) << "\n"; break;
      case 4: s << "        XOR " << scratch() << ", " << reg(pick(r, 0, 7)) << "\n"; break;
      case 5: s << "        CMP " << reg(pick(r, 0, 7)) << ", " << reg(pick(r, 0, 7)) << "\n"; break;
      case 6: s << "        LOAD8 " << scratch() << ", [R7+" << data_off() << "]\n"; break;
      case 7: s << "        LOAD64 " << scratch() << ", [R7+" << data_off() << "]\n"; break;
      case 8: s << "        STORE8 [R7+" << data_off() << "], " << reg(pick(r, 0, 7)) << "\n"; break;
      case 9: s << "        STORE64 [R7+" << data_off() << "], " << reg(pick(r, 0, 7)) << "\n"; break;
      case 10: s << "        OUT " << reg(pick(r, 0, 7)) << "\n"; break;
      case 11: s << "        RDTSC " << scratch() << "\n"; break;
      case 12: s << "        NOP\n"; break;
      case 13:
        if (pending_skip < 0 && !in_loop) {
          s << "        " << (pick(r, 0, 1) ? "JZ" : "JNZ") << " skip" << label << "\n";
          pending_skip = static_cast<int>(pick(r, 1, 4));
        } else {
          s << "        NOP\n";
        }
        break;
    }
    if (pending_skip >= 0 && --pending_skip < 0) s << "skip" << label++ << ":\n";
    if (in_loop && --loop_left <= 0) {
      s << "        MOVI R5, 1\n        SUB R6, R5\n        JNZ loop" << loops++ << "\n";
      in_loop = false;
    }
  }
  if (in_loop) s << "        MOVI R5, 1\n        SUB R6, R5\n        JNZ loop" << loops++ << "\n";
  if (pending_skip >= 0) s << "skip" << label++ << ":\n";
  s << "        HALT\n";
  s << "org 0x3000 rw\n        zero 0x1000\n        buddy 0x3000\n";
  s << "org 0x4000 rw\n        zero 0x1000\n";
  return s.str();
}

/// Independent 10/10/12 walk over the in-memory tables.
struct RefTranslation {
  PAddr paddr = 0;
  uint32_t pte = 0;
};

inline std::optional<RefTranslation> reference_walk(const PhysicalMemory& mem, FrameNumber root, VAddr va) {
  const uint32_t pde = mem.read32(root * 4096u + (va >> 22) * 4u);
  if (!(pde & 1u)) return std::nullopt;
  const uint32_t pte = mem.read32((pde & 0xFFFFF000u) + ((va >> 12) & 0x3FFu) * 4u);
  if (!(pte & 1u)) return std::nullopt;
  return RefTranslation{(pte & 0xFFFFF000u) | (va & 0xFFFu), pte};
}

/// Little-endian rel32 jump target, computed from raw bytes.
inline uint32_t reference_jmp_target(uint32_t at, const uint8_t bytes[5]) {
  const uint32_t rel = uint32_t{bytes[1]} | uint32_t{bytes[2]} << 8 | uint32_t{bytes[3]} << 16 | uint32_t{bytes[4]} << 24;
  return at + 5 + rel;
}

}  // namespace vbptest
