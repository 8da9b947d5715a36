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

// Line-delimited JSON export of debug events and counters.
//
//   {"kind":"VbpHit","vaddr":4098,"access":"Fetch","flags":8,"cycle":0,"hook_id":null}
//
// Page faults add a "fault" field with the reason.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vbpsim/machine.hpp"

namespace vbp {

nlohmann::json event_to_json(const DebugEvent& e);
DebugEvent event_from_json(const nlohmann::json& j);
std::string event_line(const DebugEvent& e);
/// Short human-readable form, e.g. "VbpHit@0x1002 Fetch flags=f cycle=0".
std::string describe(const DebugEvent& e);

nlohmann::json records_to_json(const std::vector<std::pair<std::string, uint64_t>>& records);
/// "key value" lines.
std::string records_text(const std::vector<std::pair<std::string, uint64_t>>& records);

}  // namespace vbp
