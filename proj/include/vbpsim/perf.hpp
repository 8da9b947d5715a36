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
#include <string>
#include <utility>
#include <vector>

namespace vbp {

/// Monotone counters. A "reference" is one (access, page) pair: an 8-byte
/// load inside one page is one data reference; an instruction fetch that
/// straddles two pages is two fetch references.
struct PerfCounters {
  uint64_t instructions_retired = 0;
  uint64_t data_refs = 0;
  uint64_t fetch_refs = 0;
  uint64_t buddy_refs = 0;
  uint64_t tlb_hits = 0;
  uint64_t tlb_misses = 0;
  uint64_t pt_walks = 0;
  uint64_t debug_exits = 0;
  uint64_t taint_dropped = 0;

  /// Stable key order for export.
  std::vector<std::pair<std::string, uint64_t>> to_records() const {
    return {
        {"instructions_retired", instructions_retired},
        {"data_refs", data_refs},
        {"fetch_refs", fetch_refs},
        {"buddy_refs", buddy_refs},
        {"tlb_hits", tlb_hits},
        {"tlb_misses", tlb_misses},
        {"pt_walks", pt_walks},
        {"debug_exits", debug_exits},
        {"taint_dropped", taint_dropped},
    };
  }

  bool operator==(const PerfCounters&) const = default;
};

}  // namespace vbp
