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

// Line-delimited JSON wire protocol over one session.
//
//   request   {"id": 7, "cmd": "set_bp", "args": {"addr": "0x1002", "flags": "f"}}
//   response  {"id": 7, "ok": true, "data": {...}}
//             {"id": 7, "ok": false, "error": "NoBuddyFrame", "message": "..."}
//   event     {"event": {"kind": "VbpHit", ...}}
//
// Event frames for everything logged while a command ran are sent before
// that command's response.

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vbpsim/session.hpp"

namespace vbp {

// Views shared by the protocol and the REPL.
nlohmann::json state_json(const Session& s);
nlohmann::json page_table_json(Session& s);
nlohmann::json tlb_json(Session& s);

class ProtocolHandler {
 public:
  explicit ProtocolHandler(Session& session);

  /// Handles one request line and returns the frames to send, in order.
  std::vector<std::string> handle_line(std::string_view line);
  nlohmann::json handle(const nlohmann::json& request, std::vector<nlohmann::json>& events);

  bool shutdown_requested() const { return shutdown_; }

  static constexpr uint64_t kDefaultContinueBudget = 1000000;
  static constexpr uint32_t kMaxReadLength = 4096;

 private:
  nlohmann::json dispatch(const std::string& cmd, const nlohmann::json& args);
  VAddr address(const nlohmann::json& args, const char* key = "addr") const;
  void drain(std::vector<nlohmann::json>& events);

  Session& session_;
  size_t seen_ = 0;  // log entries already sent as event frames
  bool shutdown_ = false;
};

}  // namespace vbp
