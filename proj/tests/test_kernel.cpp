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


#include <algorithm>

#include "doctest.h"
#include "support.hpp"
#include "vbpsim/kernel.hpp"
#include "vbpsim/shadow.hpp"

using namespace vbp;

namespace {

struct Rig {
  explicit Rig(uint32_t bytes = 1u << 20) : mem(bytes), mmu(mem, counters), kernel(mem, mmu) {
    kernel.set_observer(&shadow);
    as = kernel.create_address_space();
    kernel.activate(as);
  }
  PhysicalMemory mem;
  PerfCounters counters;
  Mmu mmu;
  Kernel kernel;
  ShadowOracle shadow;
  AsId as = 0;
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvariantViolation;  // "no error" never matches an expectation below
}

// Every breakpoint-bit mapping points at a data frame whose successor is
// its registered buddy, and the in-memory PTE says so.
void check_pairs(const Rig& r) {
  for (AsId as = 0; as < r.kernel.address_space_count(); ++as) {
    for (const auto& [vpn, m] : r.kernel.mappings(as)) {
      if (m.swapped) continue;
      const auto ref = vbptest::reference_walk(r.mem, r.kernel.directory_frame(as), vpn << kPageShift);
      REQUIRE(ref);
      CHECK(((ref->pte >> 3) & 1) == m.breakpoint);
      if (!m.breakpoint) continue;
      CHECK(r.kernel.allocator().pair_of(m.frame) == m.frame);
      CHECK(r.kernel.allocator().used(m.frame + 1));
    }
  }
  for (FrameNumber d : r.kernel.allocator().pairs()) CHECK(r.kernel.allocator().pair_of(d + 1) == d);
  CHECK(r.shadow.compare(r.mem, r.kernel.allocator()).empty());
  CHECK_NOTHROW(r.kernel.check_invariants());
}

}  // namespace

TEST_CASE("frame allocator") {
  FrameAllocator a(8);
  CHECK(a.alloc() == 0);
  CHECK(a.alloc_buddy_pair() == std::pair<FrameNumber, FrameNumber>{1, 2});
  CHECK(a.is_pair_data(1));
  CHECK(a.pair_of(2) == 1u);
  CHECK(code_of([&] { a.free(2); }) == ErrorCode::InvariantViolation);
  CHECK(a.claim(3));
  CHECK(!a.claim(3));
  a.free(3);
  CHECK(a.used_count() == 3);
  // 0,1,2 used; leave only isolated holes.
  for (FrameNumber f : {3u, 4u, 5u, 6u, 7u}) CHECK(a.claim(f));
  a.free(4);
  a.free(6);
  CHECK(code_of([&] { a.alloc_buddy_pair(); }) == ErrorCode::OutOfContiguousMemory);
  CHECK(a.alloc() == 4);
}

TEST_CASE("set_vbp attaches a buddy and keeps page contents") {
  Rig r;
  r.kernel.map_page(r.as, 0x1000, true, false);
  r.kernel.map_page(r.as, 0x2000, true, false);  // takes the frame right after 0x1000's
  auto rnd = vbptest::rng(5);
  std::vector<uint8_t> before(kPageSize);
  for (uint32_t i = 0; i < kPageSize; ++i) {
    before[i] = static_cast<uint8_t>(rnd());
    r.kernel.poke(r.as, 0x1000 + i, before[i]);
  }
  const FrameNumber old = r.kernel.mapping(r.as, 0x1000)->frame;
  REQUIRE(r.kernel.allocator().used(old + 1));

  r.kernel.set_vbp(r.as, 0x1010, BreakpointByte{bpflag::W});
  const Mapping m = *r.kernel.mapping(r.as, 0x1000);
  CHECK(m.breakpoint);
  CHECK(m.frame != old);  // relocated next to a free frame
  for (uint32_t i = 0; i < kPageSize; ++i) REQUIRE(r.kernel.peek(r.as, 0x1000 + i) == before[i]);
  CHECK(r.kernel.read_vbp(r.as, 0x1010) == BreakpointByte{bpflag::W});
  CHECK(r.kernel.read_vbp(r.as, 0x1011) == BreakpointByte{});
  CHECK(!r.kernel.allocator().used(old));  // the old frame went back
  check_pairs(r);

  // In place when the next frame is free.
  const FrameNumber f2 = r.kernel.mapping(r.as, 0x2000)->frame;
  if (!r.kernel.allocator().used(f2 + 1)) {
    r.kernel.attach_buddy(r.as, 0x2000);
    CHECK(r.kernel.mapping(r.as, 0x2000)->frame == f2);
  }
  check_pairs(r);
}

TEST_CASE("breakpoint API errors") {
  Rig r;
  r.kernel.map_page(r.as, 0x1000, true, false);
  CHECK(code_of([&] { r.kernel.set_vbp(r.as, 0x9000, BreakpointByte{bpflag::R}); }) == ErrorCode::NoBuddyFrame);
  CHECK(code_of([&] { r.kernel.set_vbp(r.as, 0x1000, BreakpointByte{0x40}); }) == ErrorCode::ReservedBitsSet);
  CHECK(code_of([&] { r.kernel.read_vbp(r.as, 0x9000); }) == ErrorCode::NoBuddyFrame);
  CHECK(r.kernel.read_vbp(r.as, 0x1000) == BreakpointByte{});  // no buddy yet: nothing set

  Rig strict;
  KernelConfig cfg;
  cfg.auto_attach = false;
  Kernel k(strict.mem, strict.mmu, cfg);
  const AsId as = k.create_address_space();
  k.activate(as);
  k.map_page(as, 0x1000, true, false);
  CHECK(code_of([&] { k.set_vbp(as, 0x1000, BreakpointByte{bpflag::R}); }) == ErrorCode::NoBuddyFrame);
}

TEST_CASE("set_vbp_page flags every byte and clear_vbp clears one") {
  Rig r;
  r.kernel.map_page(r.as, 0x5000, true, true);
  r.kernel.set_vbp_page(r.as, 0x5123, BreakpointByte{bpflag::X});
  for (uint32_t i = 0; i < kPageSize; i += 97) CHECK(r.kernel.read_vbp(r.as, 0x5000 + i).has(bpflag::X));
  r.kernel.clear_vbp(r.as, 0x5004);
  CHECK(r.kernel.read_vbp(r.as, 0x5004) == BreakpointByte{});
  check_pairs(r);
}

TEST_CASE("PIN_PAIR refuses to swap a pair member") {
  Rig r;
  r.kernel.map_page(r.as, 0x1000, true, false);
  r.kernel.set_vbp(r.as, 0x1000, BreakpointByte{bpflag::R});
  const FrameNumber d = r.kernel.mapping(r.as, 0x1000)->frame;
  CHECK(code_of([&] { r.kernel.swap_out(d); }) == ErrorCode::BuddyPinned);
  CHECK(code_of([&] { r.kernel.swap_out(d + 1); }) == ErrorCode::BuddyPinned);
  CHECK(!r.kernel.mapping(r.as, 0x1000)->swapped);

  // Frames without a buddy swap normally under either policy.
  r.kernel.map_page(r.as, 0x2000, true, false);
  const FrameNumber plain = r.kernel.mapping(r.as, 0x2000)->frame;
  r.kernel.poke(r.as, 0x2000, 0x77);
  r.kernel.swap_out(plain);
  CHECK(r.kernel.mapping(r.as, 0x2000)->swapped);
  CHECK(r.mmu.walk(0x2000) == std::nullopt);
  r.kernel.swap_in(plain);
  CHECK(r.kernel.peek(r.as, 0x2000) == 0x77);
  CHECK(code_of([&] { r.kernel.swap_in(plain); }) == ErrorCode::NotSwapped);
  check_pairs(r);
}

TEST_CASE("EVICT_TOGETHER round trip is byte-identical") {
  Rig r;
  r.kernel.set_swap_policy(SwapPolicy::EvictTogether);
  r.kernel.map_page(r.as, 0x1000, true, false);
  auto rnd = vbptest::rng(6);
  for (uint32_t i = 0; i < kPageSize; ++i) r.kernel.poke(r.as, 0x1000 + i, static_cast<uint8_t>(rnd()));
  for (int i = 0; i < 200; ++i) {
    r.kernel.set_vbp(r.as, 0x1000 + static_cast<VAddr>(vbptest::pick(rnd, 0, 4095)),
                     BreakpointByte{static_cast<uint8_t>(vbptest::pick(rnd, 1, 0x3F))});
  }
  const FrameNumber d = r.kernel.mapping(r.as, 0x1000)->frame;
  const std::vector<uint8_t> data(r.mem.frame(d).begin(), r.mem.frame(d).end());
  const std::vector<uint8_t> buddy(r.mem.frame(d + 1).begin(), r.mem.frame(d + 1).end());

  r.kernel.swap_out(d);
  CHECK(r.kernel.mapping(r.as, 0x1000)->swapped);
  CHECK(!r.kernel.allocator().used(d));
  CHECK(!r.kernel.allocator().used(d + 1));
  CHECK(code_of([&] { r.kernel.read_vbp(r.as, 0x1000); }) == ErrorCode::NoBuddyFrame);
  check_pairs(r);

  r.kernel.swap_in(d);
  const Mapping m = *r.kernel.mapping(r.as, 0x1000);
  CHECK(m.breakpoint);
  CHECK(std::equal(data.begin(), data.end(), r.mem.frame(m.frame).begin()));
  CHECK(std::equal(buddy.begin(), buddy.end(), r.mem.frame(m.frame + 1).begin()));
  check_pairs(r);
}

TEST_CASE("swap-in needs an adjacent pair") {
  Rig r(64 * kPageSize);
  r.kernel.set_swap_policy(SwapPolicy::EvictTogether);
  r.kernel.map_page(r.as, 0x1000, true, false);
  r.kernel.set_vbp(r.as, 0x1000, BreakpointByte{bpflag::R});
  const FrameNumber d = r.kernel.mapping(r.as, 0x1000)->frame;
  r.kernel.swap_out(d);

  // Fill memory, then free every other frame: plenty free, none adjacent.
  std::vector<FrameNumber> taken;
  try {
    while (true) taken.push_back(r.kernel.allocator().alloc());
  } catch (const Error&) {
  }
  for (size_t i = 0; i < taken.size(); i += 2) r.kernel.allocator().free(taken[i]);
  CHECK(code_of([&] { r.kernel.swap_in(d); }) == ErrorCode::NoAdjacentPairOnSwapIn);
  CHECK(r.kernel.mapping(r.as, 0x1000)->swapped);  // still out, nothing lost

  for (size_t i = 1; i < taken.size(); i += 2) r.kernel.allocator().free(taken[i]);
  r.kernel.swap_in(d);
  CHECK(r.kernel.read_vbp(r.as, 0x1000) == BreakpointByte{bpflag::R});
}

TEST_CASE("copy-on-write policies") {
  for (CowPolicy policy : {CowPolicy::InheritBuddy, CowPolicy::LeaveBehind}) {
    CAPTURE(static_cast<int>(policy));
    Rig r;
    r.kernel.map_page(r.as, 0x3000, true, false);
    r.kernel.poke(r.as, 0x3000, 0xAB);
    r.kernel.set_vbp(r.as, 0x3000, BreakpointByte{bpflag::R});
    const AsId child = r.kernel.cow_fork_page(r.as, 0x3000, policy);
    CHECK(r.kernel.mapping(child, 0x3000)->frame == r.kernel.mapping(r.as, 0x3000)->frame);
    CHECK(r.kernel.read_vbp(child, 0x3000).has(bpflag::R));

    // The child writes: its copy is made according to the policy.
    CHECK(r.kernel.handle_page_fault(child, 0x3008, FaultReason::WriteProtected));
    const Mapping cm = *r.kernel.mapping(child, 0x3000);
    CHECK(cm.frame != r.kernel.mapping(r.as, 0x3000)->frame);
    CHECK(r.kernel.peek(child, 0x3000) == 0xAB);
    CHECK(cm.breakpoint == (policy == CowPolicy::InheritBuddy));
    CHECK(r.kernel.read_vbp(child, 0x3000).has(bpflag::R) == (policy == CowPolicy::InheritBuddy));
    CHECK(r.kernel.read_vbp(r.as, 0x3000).has(bpflag::R));  // parent untouched
    CHECK(!r.kernel.handle_page_fault(child, 0x3008, FaultReason::NotPresent));
    check_pairs(r);
  }
}

TEST_CASE("random kernel operations keep pairs adjacent") {
  auto rnd = vbptest::rng(7);
  for (int round = 0; round < 20; ++round) {
    Rig r(256 * kPageSize);
    r.kernel.set_swap_policy(vbptest::pick(rnd, 0, 1) ? SwapPolicy::EvictTogether : SwapPolicy::PinPair);
    std::vector<AsId> spaces{r.as};
    std::string ops;
    CAPTURE(ops);
    for (int op = 0; op < 150; ++op) {
      const AsId as = spaces[vbptest::pick(rnd, 0, spaces.size() - 1)];
      const VAddr va = static_cast<VAddr>(vbptest::pick(rnd, 1, 12)) << 12 | static_cast<VAddr>(vbptest::pick(rnd, 0, 4095));
      const auto m = r.kernel.mapping(as, va);
      const uint64_t which = vbptest::pick(rnd, 0, 7);
      ops += std::to_string(which) + "@" + std::to_string(as) + ":" + hex(va) + (m ? "/f" + std::to_string(m->frame) : "") + " ";
      try {
        switch (which) {
          case 0: if (!m) r.kernel.map_page(as, va, true, vbptest::pick(rnd, 0, 1)); break;
          case 1: if (m) r.kernel.unmap_page(as, va); break;
          case 2:
          case 3: r.kernel.set_vbp(as, va, BreakpointByte{static_cast<uint8_t>(vbptest::pick(rnd, 0, 0x3F))}); break;
          case 4: if (m && !m->swapped) r.kernel.swap_out(m->frame); break;
          case 5: if (m && m->swapped) r.kernel.swap_in(m->frame); break;
          case 6:
            if (m && !m->swapped && spaces.size() < 4) {
              spaces.push_back(r.kernel.cow_fork_page(as, va, vbptest::pick(rnd, 0, 1) ? CowPolicy::InheritBuddy : CowPolicy::LeaveBehind));
            }
            break;
          case 7: r.kernel.handle_page_fault(as, va, FaultReason::WriteProtected); break;
        }
      } catch (const Error& e) {
        // Expected refusals only.
        const ErrorCode c = e.code();
        REQUIRE_MESSAGE((c == ErrorCode::NoBuddyFrame || c == ErrorCode::BuddyPinned || c == ErrorCode::NotMapped ||
                         c == ErrorCode::InvalidArgument || c == ErrorCode::OutOfMemory ||
                         c == ErrorCode::OutOfContiguousMemory || c == ErrorCode::NoAdjacentPairOnSwapIn),
                        error_name(c) << ": " << std::string(e.what()));
      }
    }
    check_pairs(r);
  }
}

TEST_CASE("stats") {
  Rig r(32 * kPageSize);
  r.kernel.map_page(r.as, 0x1000, true, false);
  r.kernel.set_vbp(r.as, 0x1000, BreakpointByte{bpflag::R});
  const auto s = r.kernel.stats();
  auto get = [&](const std::string& k) {
    for (const auto& [n, v] : s) {
      if (n == k) return v;
    }
    FAIL("missing stat " << k);
    return uint64_t{0};
  };
  CHECK(get("frames_total") == 32);
  CHECK(get("frames_used") == 4);  // directory, one table, data + buddy
  CHECK(get("pairs_live") == 1);
  CHECK(get("swap_slots_used") == 0);
}
