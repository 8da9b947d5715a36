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

#include "vbpsim/guests.hpp"

namespace vbp {

std::string_view guest_source(std::string_view name) {
  for (const auto& g : guest_sources()) {
    if (g.name == name) return g.source;
  }
  fail(ErrorCode::UnknownScenario, "no guest named '" + std::string(name) + "'");
}

GuestImage guest_image(std::string_view name) { return assemble_image(guest_source(name)); }

std::vector<std::string_view> guest_names() {
  std::vector<std::string_view> out;
  for (const auto& g : guest_sources()) out.push_back(g.name);
  return out;
}

}  // namespace vbp
