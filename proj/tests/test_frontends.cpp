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


#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "vbpsim/protocol.hpp"
#include "vbpsim/repl.hpp"
#include "vbpsim/script.hpp"
#include "vbpsim/server.hpp"

using namespace vbp;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvariantViolation;
}

constexpr const char* kGuest = R"(
org 0x1000 rx
_start: NOP
        NOP
        MOVI R1, 0x41
        OUT R1
        HALT
org 0x3000 rw
buf:    zero 0x1000
        buddy 0x3000
)";

std::vector<json> frames(ProtocolHandler& h, const json& req) {
  std::vector<json> v;
  for (const auto& line : h.handle_line(req.dump())) v.push_back(json::parse(line));
  return v;
}

json reply(ProtocolHandler& h, const json& req) {
  auto v = frames(h, req);
  REQUIRE(!v.empty());
  return v.back();
}

SessionConfig tainted() {
  SessionConfig c;
  c.taint = true;
  return c;
}

}  // namespace

TEST_CASE("script parsing") {
  const GuestImage img = assemble_image(kGuest);
  const auto cmds = parse_script(R"(
; comment
bp _start+2 f
vbp buf rw      # trailing comment
page 0x3000 t
hook buf+4 9
inject buf 01 ff
dr 3 buf w
)",
                                 img);
  REQUIRE(cmds.size() == 6);
  CHECK(cmds[0].kind == ScriptCommand::Kind::Bp);
  CHECK(cmds[0].vaddr == 0x1002);
  CHECK(cmds[0].flags == BreakpointByte{bpflag::Fetch});
  CHECK(cmds[0].line == 3);
  CHECK(cmds[1].flags == BreakpointByte{bpflag::R | bpflag::W});
  CHECK(cmds[2].kind == ScriptCommand::Kind::Page);
  CHECK(cmds[3].value == 9);
  CHECK(cmds[3].vaddr == 0x3004);
  CHECK(cmds[4].bytes == std::vector<uint8_t>{0x01, 0xFF});
  CHECK(cmds[5].value == 3);
  CHECK(cmds[5].dr_kind == "w");

  CHECK(code_of([&] { parse_script("bp nowhere", img); }) == ErrorCode::UnresolvedLabel);
  CHECK(code_of([&] { parse_script("frobnicate 1", img); }) == ErrorCode::SyntaxError);
  CHECK(code_of([&] { parse_script("vbp buf", img); }) == ErrorCode::SyntaxError);
  CHECK(code_of([&] { parse_script("inject buf zz", img); }) == ErrorCode::SyntaxError);
  try {
    parse_script("\n\nbp nowhere", img);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  Session s(img);
  apply_script(s, parse_script("vbp buf r\nhook buf+1 4\n", img));
  CHECK(s.read_vbp(0x3000) == BreakpointByte{bpflag::R});
  CHECK(s.read_vbp(0x3001).has(bpflag::Hook));
  try {
    apply_script(s, parse_script("vbp buf r\nvbp 0x8000 x\n", img));
    FAIL("unmapped page accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoBuddyFrame);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("protocol: state, breakpoints and continue") {
  Session s(assemble_image(kGuest));
  ProtocolHandler h(s);
  json r = reply(h, {{"id", 1}, {"cmd", "state"}});
  CHECK(r["id"] == 1);
  CHECK(r["ok"] == true);
  CHECK(r["data"]["pc"] == 0x1000);
  CHECK(r["data"]["mode"] == "vbp");
  CHECK(r["data"]["regs"].size() == 8);
  CHECK(r["data"]["last_stop"].is_null());

  r = reply(h, {{"id", 2}, {"cmd", "set_bp"}, {"args", {{"addr", "0x1002"}, {"flags", "f"}}}});
  CHECK(r["ok"] == true);
  r = reply(h, {{"id", 3}, {"cmd", "read_bp"}, {"args", {{"addr", 0x1002}}}});
  CHECK(r["data"]["flags"] == bpflag::Fetch);
  CHECK(r["data"]["letters"] == "f");

  // Events come first, then the response carrying the stop.
  auto v = frames(h, {{"id", 4}, {"cmd", "continue"}});
  REQUIRE(v.size() == 2);
  CHECK(v[0]["event"]["kind"] == "VbpHit");
  CHECK(v[0]["event"]["vaddr"] == 0x1002);
  CHECK(v[0]["event"]["access"] == "Fetch");
  CHECK(v[1]["id"] == 4);
  CHECK(v[1]["data"]["stop"] == v[0]["event"]);

  r = reply(h, {{"id", 5}, {"cmd", "read_mem"}, {"args", {{"addr", "_start"}, {"len", 3}}}});
  CHECK(r["data"]["bytes"] == json::array({1, 1, 0x10}));

  v = frames(h, {{"id", 6}, {"cmd", "continue"}});
  REQUIRE(v.size() == 2);
  CHECK(v[0]["event"]["kind"] == "Halt");
  r = reply(h, {{"id", 7}, {"cmd", "state"}});
  CHECK(r["data"]["out"] == json::array({0x41}));
  CHECK(r["data"]["run_state"] == "halted");

  r = reply(h, {{"id", 8}, {"cmd", "counters"}});
  CHECK(r["ok"] == true);
  r = reply(h, {{"id", 9}, {"cmd", "pt"}});
  CHECK(r["data"].size() == 2);
  r = reply(h, {{"id", 10}, {"cmd", "disasm"}, {"args", {{"addr", 0x1000}, {"count", 3}}}});
  CHECK(r["ok"] == true);
  CHECK(r["data"].size() == 3);
  r = reply(h, {{"id", 11}, {"cmd", "shutdown"}});
  CHECK(r["ok"] == true);
  CHECK(h.shutdown_requested());
}

TEST_CASE("protocol errors") {
  Session s(assemble_image(kGuest));
  ProtocolHandler h(s);
  json r = reply(h, {{"id", 1}, {"cmd", "set_bp"}, {"args", {{"addr", 0x8000}}}});
  CHECK(r["ok"] == false);
  CHECK(r["error"] == "NoBuddyFrame");
  CHECK(r["message"].is_string());

  r = reply(h, {{"id", 2}, {"cmd", "teleport"}});
  CHECK(r["error"] == "UnknownCommand");
  r = reply(h, {{"id", 3}, {"cmd", "set_bp"}, {"args", {{"addr", "nowhere"}}}});
  CHECK(r["ok"] == false);
  r = reply(h, {{"id", 4}, {"cmd", "read_mem"}, {"args", {{"addr", 0x1000}, {"len", 5000}}}});
  CHECK(r["error"] == "InvalidArgument");
  r = reply(h, {{"id", 5}, {"cmd", "mode"}, {"args", {{"mode", "warp"}}}});
  CHECK(r["error"] == "InvalidArgument");
  r = reply(h, {{"id", 6}, {"cmd", "set_bp"}, {"args", {{"addr", 0x1000}, {"flags", "q"}}}});
  CHECK(r["ok"] == false);

  auto bad = h.handle_line("{not json");
  REQUIRE(bad.size() == 1);
  r = json::parse(bad[0]);
  CHECK(r["error"] == "BadRequest");
  CHECK(r["id"].is_null());
  r = reply(h, {{"cmd", "state"}});
  CHECK(r["error"] == "BadRequest");
  r = reply(h, {{"id", "seven"}, {"cmd", "state"}});
  CHECK(r["error"] == "BadRequest");

  // Key order on the wire.
  const std::string line = h.handle_line(R"({"id":9,"cmd":"teleport"})").back();
  CHECK(line.find("\"id\"") < line.find("\"ok\""));
  CHECK(line.find("\"ok\"") < line.find("\"error\""));
  CHECK(line.find("\"error\"") < line.find("\"message\""));
}

TEST_CASE("protocol: mode switch, hook, inject") {
  Session s(assemble_image(kGuest), tainted());
  ProtocolHandler h(s);
  json r = reply(h, {{"id", 1}, {"cmd", "mode"}, {"args", {{"mode", "int3"}}}});
  CHECK(r["data"]["mode"] == "int3");
  r = reply(h, {{"id", 2}, {"cmd", "set_bp"}, {"args", {{"addr", 0x1002}}}});
  CHECK(r["ok"] == true);
  r = reply(h, {{"id", 3}, {"cmd", "read_mem"}, {"args", {{"addr", 0x1002}, {"len", 1}}}});
  CHECK(r["data"]["bytes"] == json::array({0xCC}));
  r = reply(h, {{"id", 4}, {"cmd", "mode"}, {"args", {{"mode", "vbp"}}}});
  r = reply(h, {{"id", 5}, {"cmd", "hook"}, {"args", {{"addr", "buf"}, {"id", 3}}}});
  CHECK(r["ok"] == true);
  r = reply(h, {{"id", 6}, {"cmd", "inject"}, {"args", {{"addr", "buf+1"}, {"bytes", {5, 6}}}}});
  CHECK(r["ok"] == true);
  CHECK(s.read_mem(0x3002) == 6);
  CHECK(s.read_vbp(0x3002).has(bpflag::Taint));
  r = reply(h, {{"id", 7}, {"cmd", "events"}});
  CHECK(r["ok"] == true);
}

TEST_CASE("repl") {
  Session s(assemble_image(kGuest));
  std::ostringstream out;
  Repl repl(s, out);
  CHECK(repl.execute("b 1002 f"));
  CHECK(repl.execute("c"));
  CHECK(out.str().find("VbpHit@0x1002 Fetch") != std::string::npos);
  out.str("");
  repl.execute("bp 1002");
  CHECK(out.str() == "0x08 (f)\n");
  out.str("");
  repl.execute("mem _start 3");  // original bytes, not the breakpoint
  CHECK(out.str() == "0x00001000: 01 01 10\n");
  out.str("");
  repl.execute("frob");
  CHECK(out.str().rfind("unknown command 'frob'\n", 0) == 0);
  CHECK(out.str().find(Repl::help_text()) != std::string::npos);
  out.str("");
  repl.execute("b 8000");
  CHECK(out.str().rfind("error: NoBuddyFrame", 0) == 0);
  CHECK(!repl.execute("q"));

  std::istringstream in("c\nregs\nq\nc\n");
  std::ostringstream out2;
  Repl(s, out2).run(in, false);
  CHECK(out2.str().find("Halt@0x100e") != std::string::npos);
  CHECK(out2.str().find("R1 0x0000000000000041") != std::string::npos);
}

TEST_CASE("server over a socket") {
  Session s(assemble_image(kGuest));
  std::mutex mu;
  std::condition_variable cv;
  uint16_t port = 0;
  std::thread srv([&] {
    serve(s, 0, [&](uint16_t p) {
      std::lock_guard lk(mu);
      port = p;
      cv.notify_all();
    });
  });
  {
    std::unique_lock lk(mu);
    cv.wait(lk, [&] { return port != 0; });
  }
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);

  std::string buffered;
  auto read_line = [&] {
    while (buffered.find('\n') == std::string::npos) {
      char chunk[512];
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n <= 0) return std::string();
      buffered.append(chunk, static_cast<size_t>(n));
    }
    const size_t nl = buffered.find('\n');
    std::string line = buffered.substr(0, nl);
    buffered.erase(0, nl + 1);
    return line;
  };
  auto send = [&](const std::string& line) {
    const std::string l = line + "\n";
    REQUIRE(::write(fd, l.data(), l.size()) == static_cast<ssize_t>(l.size()));
  };

  send(R"({"id":1,"cmd":"set_bp","args":{"addr":"0x1002","flags":"f"}})");
  CHECK(json::parse(read_line())["ok"] == true);
  send(R"({"id":2,"cmd":"continue"})");
  CHECK(json::parse(read_line())["event"]["kind"] == "VbpHit");
  CHECK(json::parse(read_line())["id"] == 2);
  send(R"({"id":3,"cmd":"shutdown"})");
  CHECK(json::parse(read_line())["ok"] == true);
  srv.join();
  CHECK(read_line().empty());  // server closed the connection
  ::close(fd);
}
