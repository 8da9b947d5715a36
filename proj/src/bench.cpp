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


#include "vbpsim/bench.hpp"

#include <algorithm>
#include <sstream>

#include "vbpsim/guests.hpp"
#include "vbpsim/scenario.hpp"

namespace vbp {
namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

uint64_t number(const std::string& key, const std::string& text) {
  auto v = parse_int(text);
  if (!v || *v < 0) fail(ErrorCode::InvalidArgument, "bad value '" + text + "' for " + key);
  return static_cast<uint64_t>(*v);
}

constexpr TrapMode kAllModes[] = {TrapMode::Vbp, TrapMode::Int3, TrapMode::SplitView, TrapMode::SingleStep,
                                  TrapMode::DebugRegs};

}  // namespace

BenchSpec parse_bench_spec(std::string_view text) {
  BenchSpec spec;
  std::string norm(text);
  std::replace(norm.begin(), norm.end(), ';', ' ');
  std::istringstream in(norm);
  for (std::string item; in >> item;) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(ErrorCode::InvalidArgument, "expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const auto values = split(std::string_view(item).substr(eq + 1), ',');
    if (key == "guests") {
      for (const auto& g : values) guest_source(g);  // UnknownScenario for typos
      spec.guests = values;
    } else if (key == "modes") {
      spec.modes.clear();
      for (const auto& m : values) {
        auto mode = parse_mode(m);
        if (!mode) fail(ErrorCode::InvalidArgument, "unknown trap mode '" + m + "'");
        spec.modes.push_back(*mode);
      }
    } else if (key == "bps") {
      spec.bp_counts.clear();
      for (const auto& b : values) spec.bp_counts.push_back(static_cast<uint32_t>(number(key, b)));
    } else if (key == "max" && values.size() == 1) {
      spec.max_cycles = number(key, values[0]);
    } else if (key == "penalty" && values.size() == 1) {
      spec.exit_penalty = number(key, values[0]);
    } else {
      fail(ErrorCode::InvalidArgument, "unknown bench key '" + key + "'");
    }
  }
  return spec;
}

std::vector<VAddr> bench_sites(const GuestImage& image, uint64_t max_cycles) {
  std::vector<VAddr> sites;
  if (auto it = image.symbols.find("critical"); it != image.symbols.end()) sites.push_back(it->second);
  for (VAddr pc : executed_pcs(clean_run(image, max_cycles).trace)) {
    if (std::find(sites.begin(), sites.end(), pc) == sites.end()) sites.push_back(pc);
  }
  return sites;
}

BenchRow bench_one(const GuestImage& image, std::string_view guest, TrapMode mode, uint32_t bps,
                   const BenchSpec& spec) {
  BenchRow row;
  row.guest = std::string(guest);
  row.mode = mode;
  row.bps = bps;

  const RunCapture clean = clean_run(image, spec.max_cycles);
  const auto sites = bench_sites(image, spec.max_cycles);

  SessionConfig cfg;
  cfg.mode = mode;
  cfg.exit_penalty = spec.exit_penalty;
  cfg.record_trace = true;
  Session s(image, cfg);
  try {
    for (uint32_t i = 0; i < bps && i < sites.size(); ++i) s.set_breakpoint(sites[i], BreakpointByte{bpflag::X});
  } catch (const Error& e) {
    row.status = std::string(error_name(e.code()));
    return row;
  }
  const RunCapture run = capture(s, spec.max_cycles);
  const PerfCounters& c = run.counters;
  row.instructions = c.instructions_retired;
  row.data_refs = c.data_refs;
  row.fetch_refs = c.fetch_refs;
  row.buddy_refs = c.buddy_refs;
  row.debug_exits = c.debug_exits;
  row.synthetic_cycles = c.instructions_retired + c.buddy_refs + c.debug_exits * spec.exit_penalty;
  if (run.timeout) {
    row.status = "TIMEOUT";
  } else if (run.trace != clean.trace || run.out != clean.out) {
    row.status = "DIVERGED";
  } else {
    row.status = "OK";
  }
  return row;
}

std::vector<BenchRow> run_bench(const BenchSpec& spec) {
  std::vector<std::string> guests = spec.guests;
  if (guests.empty()) {
    for (auto n : guest_names()) guests.emplace_back(n);
  }
  std::vector<TrapMode> modes = spec.modes;
  if (modes.empty()) modes.assign(std::begin(kAllModes), std::end(kAllModes));

  std::vector<BenchRow> rows;
  for (const auto& g : guests) {
    const GuestImage image = guest_image(g);
    for (TrapMode m : modes) {
      for (uint32_t n : spec.bp_counts) {
        if (m == TrapMode::SingleStep && n != 0) continue;
        rows.push_back(bench_one(image, g, m, n, spec));
      }
    }
  }
  return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "guest\tmode\tbps\tinstructions\tdata_refs\tbuddy_refs\tdebug_exits\tsynthetic_cycles\tfetch_refs\tstatus\n";
  for (const auto& r : rows) {
    out << r.guest << '\t' << mode_name(r.mode) << '\t' << r.bps << '\t' << r.instructions << '\t' << r.data_refs
        << '\t' << r.buddy_refs << '\t' << r.debug_exits << '\t' << r.synthetic_cycles << '\t' << r.fetch_refs << '\t'
        << r.status << '\n';
  }
  return out.str();
}

}  // namespace vbp
