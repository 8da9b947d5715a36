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

#include <cstdint>
#include <functional>

#include "vbpsim/session.hpp"

namespace vbp {

/// Listens on 127.0.0.1:`port` (0 picks a free port), accepts one client
/// and serves the wire protocol until `shutdown` or disconnect.
/// `on_listening` receives the bound port before accept. Throws
/// std::system_error on socket failures.
void serve(Session& session, uint16_t port, const std::function<void(uint16_t)>& on_listening);

}  // namespace vbp
