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

#include "vbpsim/machine.hpp"
#include "vbpsim/session.hpp"
#include "vbpsim/shadow.hpp"

namespace vbp {

/// Reference interpreter for the breakpoint semantics. It walks the page
/// tables straight from physical memory on every byte, takes breakpoint
/// flags from a ShadowOracle instead of buddy frames, and keeps taint in
/// the shadow as well. Nothing here goes through the Mmu or TLB.
class OracleInterpreter {
 public:
  OracleInterpreter(ShadowOracle& shadow, bool taint) : shadow_(shadow), taint_(taint) {}

  StepOutcome step(Environment& env);

 private:
  ShadowOracle& shadow_;
  bool taint_;
};

}  // namespace vbp
