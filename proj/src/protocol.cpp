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


#include "vbpsim/protocol.hpp"

#include "vbpsim/eventlog.hpp"
#include "vbpsim/isa.hpp"

namespace vbp {

using nlohmann::json;

json state_json(const Session& s) {
  const MachineState& m = s.state();
  json j;
  j["pc"] = m.pc;
  j["regs"] = m.regs;
  j["zf"] = m.zf;
  j["cycle"] = m.cycle;
  j["stall_cycles"] = m.stall_cycles;
  j["halted"] = m.halted;
  j["reg_taint"] = m.reg_taint;
  j["out"] = m.out;
  j["mode"] = mode_name(s.mode());
  j["run_state"] = s.run_state() == RunState::Halted ? "halted" : "stopped";
  j["last_stop"] = s.last_stop() ? event_to_json(*s.last_stop()) : json(nullptr);
  return j;
}

json page_table_json(Session& s) {
  json rows = json::array();
  for (const auto& [vpn, m] : s.kernel().mappings(s.address_space())) {
    const VAddr va = vpn << kPageShift;
    json r;
    r["vaddr"] = va;
    r["frame"] = m.frame;
    r["writable"] = m.writable;
    r["executable"] = m.executable;
    r["breakpoint"] = m.breakpoint;
    r["buddy_frame"] = m.breakpoint ? json(m.frame + 1) : json(nullptr);
    r["cow"] = m.cow == Mapping::Cow::None ? "none" : m.cow == Mapping::Cow::Parent ? "parent" : "child";
    r["swapped"] = m.swapped;
    const auto pte = s.mmu().walk(va);
    r["pte"] = pte ? pte->value : 0;
    rows.push_back(r);
  }
  return rows;
}

json tlb_json(Session& s) {
  json rows = json::array();
  for (const auto& e : s.mmu().tlb().entries()) {
    rows.push_back({{"vpn", e.vpn},
                    {"frame", e.pte.frame()},
                    {"writable", e.pte.writable()},
                    {"executable", e.pte.executable()},
                    {"breakpoint", e.pte.breakpoint()}});
  }
  return rows;
}

namespace {

BreakpointByte flags_arg(const json& v) {
  if (v.is_number_unsigned()) {
    const auto n = v.get<uint64_t>();
    if (n > 0xFF) fail(ErrorCode::InvalidArgument, "flags out of range");
    return BreakpointByte{static_cast<uint8_t>(n)};
  }
  if (v.is_string()) {
    if (auto f = parse_flags(v.get<std::string>())) return *f;
  }
  fail(ErrorCode::InvalidArgument, "flags must be a byte or a letter string");
}

uint64_t uint_arg(const json& args, const char* key, uint64_t fallback) {
  if (!args.contains(key)) return fallback;
  const json& v = args[key];
  if (!v.is_number_unsigned()) fail(ErrorCode::InvalidArgument, std::string(key) + " must be a non-negative integer");
  return v.get<uint64_t>();
}

json stop_json(const Session::RunResult& r) {
  json j;
  j["stop"] = r.event ? event_to_json(*r.event) : json(nullptr);
  j["timeout"] = r.timeout;
  j["retired"] = r.retired;
  return j;
}

json error_frame(const json& id, std::string_view code, const std::string& message) {
  return {{"id", id}, {"ok", false}, {"error", code}, {"message", message}};
}

}  // namespace

ProtocolHandler::ProtocolHandler(Session& session) : session_(session), seen_(session.log().size()) {}

VAddr ProtocolHandler::address(const json& args, const char* key) const {
  if (!args.contains(key)) fail(ErrorCode::InvalidArgument, std::string("missing ") + key);
  const json& v = args[key];
  if (v.is_number_unsigned() && v.get<uint64_t>() <= 0xFFFFFFFFu) return static_cast<VAddr>(v.get<uint64_t>());
  if (v.is_string()) {
    if (auto a = session_.image().resolve(v.get<std::string>())) return *a;
  }
  fail(ErrorCode::InvalidArgument, std::string("bad address in ") + key);
}

void ProtocolHandler::drain(std::vector<json>& events) {
  const auto& log = session_.log();
  for (; seen_ < log.size(); ++seen_) events.push_back({{"event", event_to_json(log[seen_])}});
}

json ProtocolHandler::dispatch(const std::string& cmd, const json& args) {
  Session& s = session_;
  if (cmd == "state") return state_json(s);
  if (cmd == "set_bp") {
    const VAddr a = address(args);
    s.set_breakpoint(a, flags_arg(args.value("flags", json("x"))));
    return {{"addr", a}};
  }
  if (cmd == "clear_bp") {
    const VAddr a = address(args);
    s.clear_breakpoint(a);
    return {{"addr", a}};
  }
  if (cmd == "read_bp") {
    const VAddr a = address(args);
    const BreakpointByte f = s.read_vbp(a);
    return {{"addr", a}, {"flags", f.bits}, {"letters", format_flags(f)}};
  }
  if (cmd == "read_mem") {
    const VAddr a = address(args);
    const uint64_t len = uint_arg(args, "len", 16);
    if (len > kMaxReadLength) fail(ErrorCode::InvalidArgument, "len above " + std::to_string(kMaxReadLength));
    std::vector<uint8_t> bytes;
    for (uint64_t i = 0; i < len; ++i) bytes.push_back(s.read_mem(a + static_cast<VAddr>(i)));
    return {{"addr", a}, {"bytes", bytes}};
  }
  if (cmd == "step") return stop_json(s.step());
  if (cmd == "continue") return stop_json(s.run_until_event(uint_arg(args, "max_cycles", kDefaultContinueBudget)));
  if (cmd == "mode") {
    if (args.contains("mode")) {
      const json& m = args["mode"];
      auto mode = m.is_string() ? parse_mode(m.get<std::string>()) : std::nullopt;
      if (!mode) fail(ErrorCode::InvalidArgument, "unknown trap mode");
      s.set_mode(*mode);
    }
    return {{"mode", mode_name(s.mode())}};
  }
  if (cmd == "counters") return records_to_json(s.counters().to_records());
  if (cmd == "pt") return page_table_json(s);
  if (cmd == "tlb") return tlb_json(s);
  if (cmd == "hook") {
    const VAddr a = address(args);
    const uint64_t id = uint_arg(args, "id", 0);
    if (id > UINT32_MAX) fail(ErrorCode::InvalidArgument, "hook id out of range");
    s.register_hook(a, static_cast<uint32_t>(id));
    return {{"addr", a}};
  }
  if (cmd == "inject") {
    const VAddr a = address(args);
    std::vector<uint8_t> bytes;
    try {
      bytes = args.at("bytes").get<std::vector<uint8_t>>();
    } catch (const json::exception&) {
      fail(ErrorCode::InvalidArgument, "bytes must be an array of bytes");
    }
    s.inject_external(a, bytes);
    return {{"addr", a}, {"len", bytes.size()}};
  }
  if (cmd == "disasm") {
    VAddr a = args.contains("addr") ? address(args) : s.state().pc;
    const uint64_t count = std::min<uint64_t>(uint_arg(args, "count", 8), 256);
    json rows = json::array();
    for (uint64_t i = 0; i < count; ++i) {
      uint8_t buf[isa::kMaxInstructionLength];
      for (VAddr k = 0; k < isa::kMaxInstructionLength; ++k) buf[k] = s.read_mem(a + k);
      const auto d = isa::decode(std::span<const uint8_t>(buf, isa::kMaxInstructionLength));
      if (const auto* in = std::get_if<isa::Instruction>(&d)) {
        rows.push_back({{"addr", a}, {"length", in->length}, {"text", isa::disassemble(*in, a)}});
        a += in->length;
      } else {
        rows.push_back({{"addr", a}, {"length", 1}, {"text", "db " + hex(buf[0], 2)}});
        a += 1;
      }
    }
    return rows;
  }
  if (cmd == "events") {
    json ev = json::array();
    for (const auto& e : s.log()) ev.push_back(event_to_json(e));
    return ev;
  }
  if (cmd == "shutdown") {
    shutdown_ = true;
    return json::object();
  }
  throw std::invalid_argument("unknown command '" + cmd + "'");
}

json ProtocolHandler::handle(const json& request, std::vector<json>& events) {
  if (!request.is_object() || !request.contains("id") || !request["id"].is_number_integer()) {
    return error_frame(nullptr, "BadRequest", "request needs an integer id");
  }
  const json id = request["id"];
  if (!request.contains("cmd") || !request["cmd"].is_string()) return error_frame(id, "BadRequest", "missing cmd");
  const json args = request.value("args", json::object());
  if (!args.is_object()) return error_frame(id, "BadRequest", "args must be an object");
  json response;
  try {
    response = {{"id", id}, {"ok", true}, {"data", dispatch(request["cmd"].get<std::string>(), args)}};
  } catch (const Error& e) {
    response = error_frame(id, error_name(e.code()), e.what());
  } catch (const std::invalid_argument& e) {
    response = error_frame(id, "UnknownCommand", e.what());
  } catch (const json::exception& e) {
    response = error_frame(id, "InvalidArgument", e.what());
  }
  drain(events);
  return response;
}

std::vector<std::string> ProtocolHandler::handle_line(std::string_view line) {
  std::vector<json> frames;
  json response;
  try {
    response = handle(json::parse(line), frames);
  } catch (const json::parse_error& e) {
    response = error_frame(nullptr, "BadRequest", e.what());
  }
  std::vector<std::string> out;
  for (const auto& f : frames) out.push_back(f.dump());
  // Frame keys in protocol order; payloads stay sorted.
  nlohmann::ordered_json ordered;
  for (const char* key : {"id", "ok", "data", "error", "message"}) {
    if (response.contains(key)) ordered[key] = response[key];
  }
  out.push_back(ordered.dump());
  return out;
}

}  // namespace vbp
