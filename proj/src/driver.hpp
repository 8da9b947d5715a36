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

// Debugger-side run loop shared by live sessions and replays.

#include <functional>
#include <optional>
#include <vector>

#include "vbpsim/session.hpp"

namespace vbp::detail {

struct DriverContext {
  Environment& env;
  const SessionConfig& config;
  std::vector<DebugEvent>& log;
  std::vector<TraceRecord>* trace = nullptr;
  const HookHandler* on_hook = nullptr;
  // Called when continuing past an Int3 stop. Returns the outcome of the
  // stepped-over instruction if the debugger owns the int3, nullopt if
  // the guest's own 0xCC should be passed over.
  std::function<std::optional<StepOutcome>(VAddr)> step_over_int3;
};

using StepFn = std::function<StepOutcome(Environment&)>;

/// One debugger step: continue past the pending stop, execute (retrying
/// after copy-on-write faults the kernel resolves), then log events and
/// charge debugger exits.
StepOutcome advance(DriverContext& ctx, const StepFn& step);

/// Charges one debugger exit to the counters and the guest's clock.
void charge_exit(Environment& env, const SessionConfig& config);

}  // namespace vbp::detail
