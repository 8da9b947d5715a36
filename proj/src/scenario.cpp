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


#include "vbpsim/scenario.hpp"

#include <algorithm>
#include <set>

#include "vbpsim/eventlog.hpp"
#include "vbpsim/guests.hpp"
#include "vbpsim/isa.hpp"

namespace vbp {

RunCapture capture(Session& session, uint64_t budget) {
  RunCapture c;
  c.timeout = session.run_to_end(budget).timeout;
  c.events = session.log();
  c.out = session.state().out;
  c.counters = session.counters();
  c.trace = session.trace();
  c.final_state = session.state();
  return c;
}

RunCapture clean_run(const GuestImage& image, uint64_t budget, SessionConfig cfg) {
  cfg.mode = TrapMode::Vbp;
  cfg.record_trace = true;
  Session s(image, cfg);
  return capture(s, budget);
}

std::vector<VAddr> executed_pcs(const std::vector<TraceRecord>& trace) {
  std::vector<VAddr> out;
  std::set<VAddr> seen;
  for (const auto& t : trace) {
    if (seen.insert(t.pc).second) out.push_back(t.pc);
  }
  return out;
}

std::vector<std::string> event_summary(const std::vector<DebugEvent>& events) {
  std::vector<std::string> out;
  for (const auto& e : events) {
    if (e.kind == EventKind::HookPoint) continue;
    out.push_back(std::string(event_name(e.kind)) + "@" + hex(e.vaddr));
  }
  return out;
}

nlohmann::json ScenarioResult::to_json() const {
  nlohmann::json j;
  j["scenario"] = name;
  j["pass"] = pass;
  if (!pass) j["diff"] = diff;
  auto& ev = j["events"] = nlohmann::json::array();
  for (const auto& e : run.events) ev.push_back(event_to_json(e));
  j["out"] = run.out;
  j["counters"] = records_to_json(run.counters.to_records());
  return j;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
  return "[" + s + "]";
}

std::string bytes_text(const std::vector<uint8_t>& b) {
  std::string s;
  for (uint8_t x : b) s += hex(x, 2).substr(2);
  return s.empty() ? "<none>" : s;
}

std::string expect_events(const RunCapture& run, const std::vector<std::string>& want) {
  const auto got = event_summary(run.events);
  if (got == want) return {};
  return "events " + join(got) + ", expected " + join(want);
}

std::string at(const std::string& kind, VAddr v) { return kind + "@" + hex(v); }

std::string same_out(const RunCapture& run, const RunCapture& clean) {
  if (run.out == clean.out) return {};
  return "OUT " + bytes_text(run.out) + " differs from clean " + bytes_text(clean.out);
}

std::string count_of(const RunCapture& run, EventKind kind, size_t lo) {
  const auto n = static_cast<size_t>(std::count_if(run.events.begin(), run.events.end(),
                                                   [&](const DebugEvent& e) { return e.kind == kind; }));
  if (n >= lo) return {};
  return std::to_string(n) + " " + std::string(event_name(kind)) + " events, expected at least " + std::to_string(lo);
}

uint64_t out_u64(const std::vector<uint8_t>& out) {
  uint64_t v = 0;
  for (size_t i = std::min<size_t>(out.size(), 8); i-- > 0;) v = (v << 8) | out[i];
  return v;
}

std::string first_of(std::initializer_list<std::string> parts) {
  for (const auto& p : parts) {
    if (!p.empty()) return p;
  }
  return {};
}

VAddr sym(Session& s, const char* name) { return s.image().symbol(name); }

void eight_on_own_code(Session& s, const RunCapture& clean) {
  const auto pcs = executed_pcs(clean.trace);
  for (size_t i = 0; i < pcs.size() && i < 8; ++i) s.set_breakpoint(pcs[i], BreakpointByte{bpflag::X});
}

// Reference decode of the JMP at `at` with one byte replaced by int3.
VAddr patched_jump_target(const GuestImage& image, VAddr jmp, VAddr patched) {
  std::vector<uint8_t> bytes(5);
  for (const auto& seg : image.segments) {
    if (jmp < seg.vaddr || jmp + 5 > seg.vaddr + seg.length) continue;
    std::copy_n(image.bytes.begin() + seg.offset + (jmp - seg.vaddr), 5, bytes.begin());
  }
  bytes[patched - jmp] = 0xCC;
  const auto d = isa::decode(bytes);
  return isa::branch_target(std::get<isa::Instruction>(d), jmp);
}

std::vector<Scenario> build() {
  std::vector<Scenario> v;
  const auto x = BreakpointByte{bpflag::X};

  // checksum_self: the guest hashes its own code page.
  v.push_back({"checksum_self/vbp", "checksum_self", TrapMode::Vbp, "transparency", false, eight_on_own_code,
               [](Session&, const RunCapture& r, const RunCapture& c) {
                 return first_of({same_out(r, c), count_of(r, EventKind::VbpHit, 8)});
               }});
  v.push_back({"checksum_self/int3", "checksum_self", TrapMode::Int3, "transparency", false, eight_on_own_code,
               [](Session&, const RunCapture& r, const RunCapture& c) -> std::string {
                 if (r.out == c.out) return "OUT equals clean run; int3 bytes went unnoticed";
                 return {};
               }});
  v.push_back({"checksum_self/splitview", "checksum_self", TrapMode::SplitView, "transparency", false,
               eight_on_own_code, [](Session&, const RunCapture& r, const RunCapture& c) { return same_out(r, c); }});

  // overwrite_self: payload rewritten from a template between two runs.
  v.push_back({"overwrite_self/vbp", "overwrite_self", TrapMode::Vbp, "reliability", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "payload"), x); },
               [](Session& s, const RunCapture& r, const RunCapture& c) {
                 const VAddr p = sym(s, "payload");
                 return first_of({expect_events(r, {at("VbpHit", p), at("VbpHit", p), at("Halt", sym(s, "done"))}),
                                  same_out(r, c)});
               }});
  v.push_back({"overwrite_self/splitview", "overwrite_self", TrapMode::SplitView, "reliability", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "payload"), x); },
               [](Session& s, const RunCapture& r, const RunCapture& c) {
                 const VAddr p = sym(s, "payload");
                 return first_of({expect_events(r, {at("Int3", p), at("Eviction", p), at("Halt", sym(s, "done"))}),
                                  same_out(r, c)});
               }});
  v.push_back({"overwrite_self/int3", "overwrite_self", TrapMode::Int3, "reliability", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "payload"), x); },
               [](Session& s, const RunCapture& r, const RunCapture&) {
                 return expect_events(r, {at("Int3", sym(s, "payload")), at("Halt", sym(s, "done"))});
               }});

  // migrate_code: payload copied elsewhere, original reset from a template.
  v.push_back({"migrate_code/vbp", "migrate_code", TrapMode::Vbp, "reliability", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "payload_a"), x); },
               [](Session& s, const RunCapture& r, const RunCapture& c) {
                 const VAddr a = sym(s, "payload_a");
                 const VAddr len = sym(s, "PAYLOAD_LEN");
                 return first_of({expect_events(r, {at("VbpHit", a), at("Halt", a + len)}), same_out(r, c)});
               }});
  v.push_back({"migrate_code/splitview", "migrate_code", TrapMode::SplitView, "reliability", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "payload_a"), x); },
               [](Session& s, const RunCapture& r, const RunCapture& c) {
                 const VAddr a = sym(s, "payload_a");
                 const VAddr len = sym(s, "PAYLOAD_LEN");
                 return first_of({expect_events(r, {at("Eviction", a), at("Halt", a + len)}), same_out(r, c)});
               }});
  v.push_back({"migrate_code/int3", "migrate_code", TrapMode::Int3, "reliability", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "payload_a"), x); },
               [](Session& s, const RunCapture& r, const RunCapture&) {
                 // The copied 0xCC traps in the migrated code; passing over it
                 // lands inside the MOVI immediate.
                 const VAddr b = sym(s, "payload_b");
                 return expect_events(r, {at("Int3", b), at("InvalidOpcode", b + 2)});
               }});

  // dr_probe: reads the debug registers.
  v.push_back({"dr_probe/debugregs", "dr_probe", TrapMode::DebugRegs, "transparency", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "_start"), x); },
               [](Session&, const RunCapture& r, const RunCapture& c) -> std::string {
                 if (c.out != std::vector<uint8_t>{0}) return "clean run reported " + bytes_text(c.out);
                 if (r.out != std::vector<uint8_t>{1}) return "OUT " + bytes_text(r.out) + ", expected 01";
                 return {};
               }});
  v.push_back({"dr_probe/vbp", "dr_probe", TrapMode::Vbp, "transparency", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "_start"), x); },
               [](Session&, const RunCapture& r, const RunCapture& c) {
                 return first_of({same_out(r, c), count_of(r, EventKind::VbpHit, 1)});
               }});

  // timing_probe: RDTSC around a short loop.
  v.push_back({"timing_probe/vbp", "timing_probe", TrapMode::Vbp, "transparency", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "report"), x); },
               [](Session&, const RunCapture& r, const RunCapture& c) {
                 return first_of({same_out(r, c), count_of(r, EventKind::VbpHit, 1)});
               }});
  v.push_back({"timing_probe/singlestep", "timing_probe", TrapMode::SingleStep, "efficiency", false,
               [](Session&, const RunCapture&) {},
               [](Session&, const RunCapture& r, const RunCapture& c) -> std::string {
                 const uint64_t clean = out_u64(c.out);
                 const uint64_t got = out_u64(r.out);
                 if (got < 10 * clean) {
                   return "delta " + std::to_string(got) + " is under 10x the clean " + std::to_string(clean);
                 }
                 return {};
               }});

  // misaligned_victim: a breakpoint inside a 5-byte JMP.
  v.push_back({"misaligned_victim/int3", "misaligned_victim", TrapMode::Int3, "flexibility", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "critical"), x); },
               [](Session& s, const RunCapture& r, const RunCapture& c) -> std::string {
                 const VAddr target = patched_jump_target(s.image(), sym(s, "_start"), sym(s, "critical"));
                 if (auto d = expect_events(r, {at("PageFault", target)}); !d.empty()) return d;
                 if (r.trace == c.trace) return "trace equals clean run";
                 return {};
               }});
  v.push_back({"misaligned_victim/vbp", "misaligned_victim", TrapMode::Vbp, "flexibility", false,
               [](Session& s, const RunCapture&) {
                 for (VAddr i = 0; i < 5; ++i) s.set_breakpoint(sym(s, "_start") + i, BreakpointByte{bpflag::Fetch});
               },
               [](Session& s, const RunCapture& r, const RunCapture& c) -> std::string {
                 std::vector<std::string> want;
                 for (VAddr i = 0; i < 5; ++i) want.push_back(at("VbpHit", sym(s, "_start") + i));
                 want.push_back(c.events.empty() ? "" : at("Halt", c.events.back().vaddr));
                 if (auto d = expect_events(r, want); !d.empty()) return d;
                 if (r.trace != c.trace) return "register trace differs from clean run";
                 return same_out(r, c);
               }});

  // taint_memcpy: injected source bytes flow to the destination.
  v.push_back({"taint_memcpy/vbp", "taint_memcpy", TrapMode::Vbp, "taint", true,
               [](Session& s, const RunCapture&) {
                 std::vector<uint8_t> data(sym(s, "LEN"));
                 for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<uint8_t>(0xA0 + i);
                 s.inject_external(sym(s, "src"), data);
               },
               [](Session& s, const RunCapture& r, const RunCapture&) -> std::string {
                 const VAddr dst = sym(s, "dst");
                 for (VAddr i = 0; i < sym(s, "LEN"); ++i) {
                   if (!s.read_vbp(dst + i).has(bpflag::Taint)) return "dst+" + std::to_string(i) + " not tainted";
                 }
                 if (r.out != std::vector<uint8_t>{0xA0}) return "OUT " + bytes_text(r.out) + ", expected a0";
                 const OracleReport rep = s.verify_against_oracle();
                 if (!rep.equivalent) return "oracle: " + rep.detail;
                 return {};
               }});

  // hot_loop_bench: counters against the loop constant.
  v.push_back({"hot_loop_bench/vbp", "hot_loop_bench", TrapMode::Vbp, "efficiency", false,
               [x](Session& s, const RunCapture&) { s.set_breakpoint(sym(s, "bench"), x); },
               [](Session& s, const RunCapture& r, const RunCapture& c) -> std::string {
                 const uint64_t n = sym(s, "ITERATIONS");
                 if (r.counters.debug_exits != n) {
                   return "debug_exits " + std::to_string(r.counters.debug_exits) + ", expected " + std::to_string(n);
                 }
                 if (r.counters.buddy_refs > r.counters.data_refs + r.counters.fetch_refs) return "buddy_refs over bound";
                 return same_out(r, c);
               }});
  v.push_back({"hot_loop_bench/singlestep", "hot_loop_bench", TrapMode::SingleStep, "efficiency", false,
               [](Session&, const RunCapture&) {},
               [](Session&, const RunCapture& r, const RunCapture& c) -> std::string {
                 if (r.counters.debug_exits != r.counters.instructions_retired) {
                   return "debug_exits " + std::to_string(r.counters.debug_exits) + " != instructions " +
                          std::to_string(r.counters.instructions_retired);
                 }
                 return same_out(r, c);
               }});
  v.push_back({"hot_loop_bench/vbp-nobp", "hot_loop_bench", TrapMode::Vbp, "efficiency", false,
               [](Session&, const RunCapture&) {},
               [](Session&, const RunCapture& r, const RunCapture&) -> std::string {
                 if (r.counters.buddy_refs != 0) return "buddy_refs " + std::to_string(r.counters.buddy_refs);
                 if (r.counters.debug_exits != 0) return "debug_exits " + std::to_string(r.counters.debug_exits);
                 return {};
               }});
  return v;
}

}  // namespace

const std::vector<Scenario>& scenarios() {
  static const std::vector<Scenario> all = build();
  return all;
}

const Scenario& find_scenario(std::string_view name) {
  for (const auto& s : scenarios()) {
    if (s.name == name) return s;
  }
  fail(ErrorCode::UnknownScenario, "no scenario named '" + std::string(name) + "'");
}

ScenarioResult run_scenario(std::string_view name) {
  const Scenario& sc = find_scenario(name);
  const GuestImage image = guest_image(sc.guest);
  const RunCapture clean = clean_run(image);

  SessionConfig cfg;
  cfg.mode = sc.mode;
  cfg.taint = sc.taint;
  cfg.record_trace = true;
  Session s(image, cfg);
  sc.setup(s, clean);

  ScenarioResult r;
  r.name = sc.name;
  r.run = capture(s);
  r.diff = r.run.timeout ? "timed out after " + std::to_string(kScenarioBudget) + " instructions" : sc.check(s, r.run, clean);
  r.pass = r.diff.empty();
  return r;
}

}  // namespace vbp
