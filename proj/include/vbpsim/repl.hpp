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

// Line-oriented debugger console. Addresses are hex (0x optional) or
// labels; lengths are decimal or 0x-prefixed.

#include <iosfwd>
#include <string>

#include "vbpsim/session.hpp"

namespace vbp {

class Repl {
 public:
  Repl(Session& session, std::ostream& out) : session_(session), out_(out) {}

  /// Executes one command line. Returns false after `q`.
  bool execute(const std::string& line);
  /// Reads commands until `q` or end of input.
  void run(std::istream& in, bool prompt);

  static const char* help_text();

 private:
  VAddr address(const std::string& text) const;
  void report(const Session::RunResult& r);

  Session& session_;
  std::ostream& out_;
  size_t seen_ = 0;
};

}  // namespace vbp
