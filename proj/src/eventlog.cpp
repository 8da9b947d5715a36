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

#include "vbpsim/eventlog.hpp"

namespace vbp {

using nlohmann::json;

json event_to_json(const DebugEvent& e) {
  json j;
  j["kind"] = event_name(e.kind);
  j["vaddr"] = e.vaddr;
  j["access"] = e.access ? json(access_name(*e.access)) : json(nullptr);
  j["flags"] = e.flags.bits;
  j["cycle"] = e.cycle;
  j["hook_id"] = e.hook_id ? json(*e.hook_id) : json(nullptr);
  if (e.fault) j["fault"] = fault_name(*e.fault);
  return j;
}

DebugEvent event_from_json(const json& j) {
  DebugEvent e;
  auto kind = parse_event_kind(j.at("kind").get<std::string>());
  if (!kind) fail(ErrorCode::InvalidArgument, "unknown event kind " + j.at("kind").dump());
  e.kind = *kind;
  e.vaddr = j.at("vaddr").get<VAddr>();
  if (j.contains("access") && !j["access"].is_null()) {
    auto a = parse_access(j["access"].get<std::string>());
    if (!a) fail(ErrorCode::InvalidArgument, "unknown access kind " + j["access"].dump());
    e.access = *a;
  }
  e.flags.bits = j.value("flags", uint8_t{0});
  e.cycle = j.value("cycle", uint64_t{0});
  if (j.contains("hook_id") && !j["hook_id"].is_null()) e.hook_id = j["hook_id"].get<uint32_t>();
  if (j.contains("fault")) {
    const std::string f = j["fault"].get<std::string>();
    for (auto r : {FaultReason::NotPresent, FaultReason::WriteProtected, FaultReason::NoExec}) {
      if (fault_name(r) == f) e.fault = r;
    }
  }
  return e;
}

std::string event_line(const DebugEvent& e) { return event_to_json(e).dump(); }

std::string describe(const DebugEvent& e) {
  std::string s = std::string(event_name(e.kind)) + "@" + hex(e.vaddr);
  if (e.access) s += " " + std::string(access_name(*e.access));
  if (e.flags.bits) s += " flags=" + format_flags(e.flags);
  if (e.fault) s += " " + std::string(fault_name(*e.fault));
  if (e.hook_id) s += " hook=" + std::to_string(*e.hook_id);
  s += " cycle=" + std::to_string(e.cycle);
  return s;
}

json records_to_json(const std::vector<std::pair<std::string, uint64_t>>& records) {
  json j = json::object();
  for (const auto& [k, v] : records) j[k] = v;
  return j;
}

std::string records_text(const std::vector<std::pair<std::string, uint64_t>>& records) {
  std::string out;
  for (const auto& [k, v] : records) out += k + " " + std::to_string(v) + "\n";
  return out;
}

}  // namespace vbp
