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

// Named guest runs with a fixed breakpoint setup and a pass condition
// stated against a clean run of the same guest.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vbpsim/session.hpp"

namespace vbp {

inline constexpr uint64_t kScenarioBudget = 100000;

/// Everything observable about one finished run.
struct RunCapture {
  std::vector<DebugEvent> events;
  std::vector<uint8_t> out;
  PerfCounters counters;
  std::vector<TraceRecord> trace;
  MachineState final_state;
  bool timeout = false;
};

RunCapture capture(Session& session, uint64_t budget = kScenarioBudget);
/// Vbp mode, no breakpoints, trace recorded.
/// Vbp mode, no breakpoints, trace recorded. `base` supplies the rest.
RunCapture clean_run(const GuestImage& image, uint64_t budget = kScenarioBudget, SessionConfig base = {});

/// Distinct retired pcs in first-execution order.
std::vector<VAddr> executed_pcs(const std::vector<TraceRecord>& trace);
/// "Kind@0xADDR" per event; HookPoint notes are skipped.
std::vector<std::string> event_summary(const std::vector<DebugEvent>& events);

struct Scenario {
  std::string name;  // <guest>/<mode>[-variant]
  std::string guest;
  TrapMode mode = TrapMode::Vbp;
  std::string goal;  // transparency, reliability, flexibility, efficiency, taint
  bool taint = false;
  std::function<void(Session&, const RunCapture& clean)> setup;
  // Empty string on pass, otherwise what differed.
  std::function<std::string(Session&, const RunCapture& run, const RunCapture& clean)> check;
};

struct ScenarioResult {
  std::string name;
  bool pass = false;
  std::string diff;
  RunCapture run;

  nlohmann::json to_json() const;
};

const std::vector<Scenario>& scenarios();
const Scenario& find_scenario(std::string_view name);  // UnknownScenario
ScenarioResult run_scenario(std::string_view name);

}  // namespace vbp
