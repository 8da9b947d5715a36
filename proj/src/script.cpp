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


#include "vbpsim/script.hpp"

#include <sstream>

#include "vbpsim/session.hpp"

namespace vbp {
namespace {

std::vector<std::string> words_of(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

[[noreturn]] void bad(int line, const std::string& msg) {
  fail(ErrorCode::SyntaxError, "line " + std::to_string(line) + ": " + msg);
}

VAddr location(const GuestImage& image, const std::string& text, int line) {
  auto v = image.resolve(text);
  if (!v) fail(ErrorCode::UnresolvedLabel, "line " + std::to_string(line) + ": unknown location '" + text + "'");
  return *v;
}

BreakpointByte flags_of(const std::string& text, int line) {
  auto f = parse_flags(text);
  if (!f) bad(line, "bad flags '" + text + "'");
  return *f;
}

std::vector<uint8_t> hex_bytes(const std::vector<std::string>& words, size_t from, int line) {
  std::string digits;
  for (size_t i = from; i < words.size(); ++i) digits += words[i];
  if (digits.size() >= 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) digits.erase(0, 2);
  if (digits.size() % 2) bad(line, "odd number of hex digits");
  std::vector<uint8_t> out;
  for (size_t i = 0; i < digits.size(); i += 2) {
    auto v = parse_int("0x" + digits.substr(i, 2));
    if (!v) bad(line, "bad hex byte '" + digits.substr(i, 2) + "'");
    out.push_back(static_cast<uint8_t>(*v));
  }
  return out;
}

}  // namespace

std::vector<ScriptCommand> parse_script(std::string_view text, const GuestImage& image) {
  std::vector<ScriptCommand> out;
  std::istringstream in{std::string(text)};
  int n = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++n;
    if (auto c = raw.find_first_of(";#"); c != std::string::npos) raw.resize(c);
    auto w = words_of(raw);
    if (w.empty()) continue;
    ScriptCommand c;
    c.line = n;
    const std::string& op = w[0];
    auto need = [&](size_t lo, size_t hi) {
      if (w.size() < lo || w.size() > hi) bad(n, "wrong number of operands for '" + op + "'");
    };
    if (op == "bp") {
      need(2, 3);
      c.kind = ScriptCommand::Kind::Bp;
      c.vaddr = location(image, w[1], n);
      if (w.size() == 3) c.flags = flags_of(w[2], n);
    } else if (op == "vbp" || op == "page") {
      need(3, 3);
      c.kind = op == "vbp" ? ScriptCommand::Kind::Vbp : ScriptCommand::Kind::Page;
      c.vaddr = location(image, w[1], n);
      c.flags = flags_of(w[2], n);
    } else if (op == "hook") {
      need(3, 3);
      c.kind = ScriptCommand::Kind::Hook;
      c.vaddr = location(image, w[1], n);
      auto id = parse_int(w[2]);
      if (!id || *id < 0 || *id > UINT32_MAX) bad(n, "bad hook id '" + w[2] + "'");
      c.value = static_cast<uint32_t>(*id);
    } else if (op == "inject") {
      if (w.size() < 3) bad(n, "inject needs a location and bytes");
      c.kind = ScriptCommand::Kind::Inject;
      c.vaddr = location(image, w[1], n);
      c.bytes = hex_bytes(w, 2, n);
    } else if (op == "dr") {
      need(4, 4);
      c.kind = ScriptCommand::Kind::Dr;
      auto slot = parse_int(w[1]);
      if (!slot || *slot < 0) bad(n, "bad slot '" + w[1] + "'");
      c.value = static_cast<uint32_t>(*slot);
      c.vaddr = location(image, w[2], n);
      if (w[3] != "x" && w[3] != "w" && w[3] != "rw") bad(n, "dr kind must be x, w or rw");
      c.dr_kind = w[3];
    } else {
      bad(n, "unknown command '" + op + "'");
    }
    out.push_back(std::move(c));
  }
  return out;
}

void apply_script(Session& session, const std::vector<ScriptCommand>& commands) {
  for (const auto& c : commands) {
    try {
      switch (c.kind) {
        case ScriptCommand::Kind::Bp: session.set_breakpoint(c.vaddr, c.flags); break;
        case ScriptCommand::Kind::Vbp: session.set_vbp(c.vaddr, c.flags); break;
        case ScriptCommand::Kind::Page: session.set_vbp_page(page_base(c.vaddr), c.flags); break;
        case ScriptCommand::Kind::Hook: session.register_hook(c.vaddr, c.value); break;
        case ScriptCommand::Kind::Inject: session.inject_external(c.vaddr, c.bytes); break;
        case ScriptCommand::Kind::Dr: {
          const DrKind k = c.dr_kind == "x" ? DrKind::Exec : c.dr_kind == "w" ? DrKind::Write : DrKind::ReadWrite;
          session.debug_registers().set(static_cast<int>(c.value), c.vaddr, k);
          break;
        }
      }
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(c.line) + ": " + e.what());
    }
  }
}

}  // namespace vbp
