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

// Built-in guest programs (sources live in guests/*.asm).

#include <span>
#include <string_view>
#include <vector>

#include "vbpsim/image.hpp"

namespace vbp {

struct GuestSource {
  std::string_view name;
  std::string_view source;
};

std::span<const GuestSource> guest_sources();
/// Throws Error(UnknownScenario) for names not in the corpus.
std::string_view guest_source(std::string_view name);
GuestImage guest_image(std::string_view name);
std::vector<std::string_view> guest_names();

}  // namespace vbp
