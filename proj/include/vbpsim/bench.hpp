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

// Guest x trap mode x breakpoint-count matrix.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vbpsim/session.hpp"

namespace vbp {

struct BenchSpec {
  std::vector<std::string> guests;  // empty: whole corpus
  std::vector<TrapMode> modes;      // empty: all modes
  std::vector<uint32_t> bp_counts{0, 1, 4, 8};
  uint64_t max_cycles = 100000;
  uint64_t exit_penalty = 1000;
};

/// "guests=a,b modes=vbp,int3 bps=0,1 max=N penalty=N"; keys optional,
/// separated by spaces or ';'. Throws Error(InvalidArgument).
BenchSpec parse_bench_spec(std::string_view text);

struct BenchRow {
  std::string guest;
  TrapMode mode = TrapMode::Vbp;
  uint32_t bps = 0;
  uint64_t instructions = 0;
  uint64_t data_refs = 0;
  uint64_t fetch_refs = 0;
  uint64_t buddy_refs = 0;
  uint64_t debug_exits = 0;
  uint64_t synthetic_cycles = 0;
  // OK, DIVERGED (trace or OUT differs from the clean run), TIMEOUT, or
  // the error name when breakpoints could not be placed.
  std::string status;
};

/// Breakpoint sites for a guest: the `critical` symbol if present, then
/// distinct executed pcs of a clean run in first-execution order.
std::vector<VAddr> bench_sites(const GuestImage& image, uint64_t max_cycles);

BenchRow bench_one(const GuestImage& image, std::string_view guest, TrapMode mode, uint32_t bps,
                   const BenchSpec& spec);
/// Single-step rows are run with zero breakpoints only.
std::vector<BenchRow> run_bench(const BenchSpec& spec);
std::string bench_table(const std::vector<BenchRow>& rows);

}  // namespace vbp
