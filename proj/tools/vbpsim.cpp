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


// vbpsim: assemble, run, debug, serve, bench and scenario front end.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <system_error>

#include "CLI11.hpp"
#include "vbpsim/bench.hpp"
#include "vbpsim/eventlog.hpp"
#include "vbpsim/guests.hpp"
#include "vbpsim/image.hpp"
#include "vbpsim/repl.hpp"
#include "vbpsim/scenario.hpp"
#include "vbpsim/script.hpp"
#include "vbpsim/server.hpp"

namespace {

using namespace vbp;

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kInternalError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::BadImage, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// An image argument is an assembly file (*.asm), a binary with a
// `.manifest` sidecar, or the name of a built-in guest.
GuestImage load_image(const std::string& arg) {
  if (std::filesystem::exists(arg)) {
    if (std::filesystem::path(arg).extension() == ".asm") return assemble_image(read_file(arg));
    return GuestImage::load(arg);
  }
  for (auto name : guest_names()) {
    if (name == arg) return guest_image(arg);
  }
  fail(ErrorCode::BadImage, "no image file or built-in guest named '" + arg + "'");
}

TrapMode mode_arg(const std::string& text) {
  auto m = parse_mode(text);
  if (!m) fail(ErrorCode::InvalidArgument, "unknown trap mode '" + text + "'");
  return *m;
}

std::string out_text(const std::vector<uint8_t>& out) {
  std::string s;
  for (uint8_t b : out) s += (s.empty() ? "" : " ") + hex(b, 2).substr(2);
  return s;
}

int cmd_asm(const std::string& in, const std::string& out) {
  const GuestImage image = assemble_image(read_file(in));
  image.save(out, out + ".manifest");
  std::cerr << "wrote " << out << " (" << image.bytes.size() << " bytes) and " << out << ".manifest\n";
  return kOk;
}

struct RunOptions {
  std::string image;
  std::string mode = "vbp";
  std::string bp_script;
  std::string counters;
  uint64_t max_cycles = 1000000;
  uint64_t penalty = 1000;
  bool taint = false;
  bool verify = false;
};

int cmd_run(const RunOptions& o) {
  const GuestImage image = load_image(o.image);
  SessionConfig cfg;
  cfg.mode = mode_arg(o.mode);
  cfg.taint = o.taint;
  cfg.exit_penalty = o.penalty;
  Session session(image, cfg);
  if (!o.bp_script.empty()) apply_script(session, parse_script(read_file(o.bp_script), image));

  const auto r = session.run_to_end(o.max_cycles);
  if (!o.counters.empty()) {
    std::ofstream out(o.counters);
    if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + o.counters);
    out << records_text(session.counters().to_records());
  }
  for (const auto& e : session.log()) std::cout << event_line(e) << "\n";
  std::cerr << "out: " << out_text(session.state().out) << "\n";
  std::cerr << (r.timeout ? "timeout" : "stopped") << " after " << session.counters().instructions_retired
            << " instructions\n";
  if (o.verify) {
    const OracleReport rep = session.verify_against_oracle();
    std::cerr << "oracle: " << (rep.equivalent ? "equivalent" : "DIVERGED " + rep.detail) << "\n";
    if (!rep.equivalent) return kInternalError;
  }
  return kOk;
}

int cmd_debug(const std::string& image_arg, const std::string& mode) {
  SessionConfig cfg;
  cfg.mode = mode_arg(mode);
  Session session(load_image(image_arg), cfg);
  Repl repl(session, std::cout);
  repl.run(std::cin, ::isatty(STDIN_FILENO));
  return kOk;
}

int cmd_serve(const std::string& image_arg, const std::string& mode, uint16_t port) {
  SessionConfig cfg;
  cfg.mode = mode_arg(mode);
  Session session(load_image(image_arg), cfg);
  try {
    serve(session, port, [](uint16_t p) { std::cout << "listening on 127.0.0.1:" << p << std::endl; });
  } catch (const std::system_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUserError;
  }
  return kOk;
}

int cmd_bench(const std::string& matrix) {
  std::cout << bench_table(run_bench(parse_bench_spec(matrix)));
  return kOk;
}

int cmd_scenario(const std::vector<std::string>& names, bool list) {
  if (list) {
    for (const auto& s : scenarios()) std::cout << s.name << "\t" << s.goal << "\n";
    return kOk;
  }
  std::vector<std::string> todo = names;
  if (todo.empty()) {
    for (const auto& s : scenarios()) todo.push_back(s.name);
  }
  bool all = true;
  for (const auto& n : todo) {
    const ScenarioResult r = run_scenario(n);
    all &= r.pass;
    nlohmann::json j = r.to_json();
    j.erase("events");
    std::cout << j.dump() << "\n";
  }
  return all ? kOk : kUserError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual breakpoint MMU simulator"};
  app.require_subcommand(1);

  std::string asm_in, asm_out;
  auto* asm_cmd = app.add_subcommand("asm", "Assemble a guest into an image and manifest");
  asm_cmd->add_option("input", asm_in, "assembly source")->required();
  asm_cmd->add_option("-o,--output", asm_out, "image path (manifest goes to <path>.manifest)")->required();

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a guest to halt, printing the event log");
  run_cmd->add_option("image", run.image, "image, .asm file, or built-in guest name")->required();
  run_cmd->add_option("--trap-mode", run.mode, "vbp, int3, splitview, singlestep, debugregs");
  run_cmd->add_option("--bp", run.bp_script, "breakpoint script");
  run_cmd->add_option("--counters", run.counters, "write counters to this file");
  run_cmd->add_option("--max-cycles", run.max_cycles, "instruction budget");
  run_cmd->add_option("--exit-penalty", run.penalty, "synthetic cycles per debugger exit");
  run_cmd->add_flag("--taint", run.taint, "propagate TAINT flags");
  run_cmd->add_flag("--verify", run.verify, "replay against the oracle afterwards");

  std::string dbg_image, dbg_mode = "vbp";
  auto* dbg_cmd = app.add_subcommand("debug", "Interactive debugger on standard input");
  dbg_cmd->add_option("image", dbg_image)->required();
  dbg_cmd->add_option("--trap-mode", dbg_mode);

  std::string srv_image, srv_mode = "vbp";
  uint16_t srv_port = 0;
  auto* srv_cmd = app.add_subcommand("serve", "Serve the wire protocol for one client");
  srv_cmd->add_option("image", srv_image)->required();
  srv_cmd->add_option("--trap-mode", srv_mode);
  srv_cmd->add_option("--port", srv_port, "TCP port on 127.0.0.1 (0 picks one)");

  std::string matrix;
  auto* bench_cmd = app.add_subcommand("bench", "Run the guest x mode x breakpoint-count matrix");
  bench_cmd->add_option("matrix", matrix, "e.g. \"guests=hot_loop_bench modes=vbp,singlestep bps=0,1\"");

  std::vector<std::string> scen_names;
  bool scen_list = false;
  auto* scen_cmd = app.add_subcommand("scenario", "Run named scenarios (all by default)");
  scen_cmd->add_option("names", scen_names);
  scen_cmd->add_flag("--list", scen_list);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUserError;
  }

  try {
    if (*asm_cmd) return cmd_asm(asm_in, asm_out);
    if (*run_cmd) return cmd_run(run);
    if (*dbg_cmd) return cmd_debug(dbg_image, dbg_mode);
    if (*srv_cmd) return cmd_serve(srv_image, srv_mode, srv_port);
    if (*bench_cmd) return cmd_bench(matrix);
    if (*scen_cmd) return cmd_scenario(scen_names, scen_list);
  } catch (const Error& e) {
    std::cerr << "error: " << error_name(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::InvariantViolation ? kInternalError : kUserError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kUserError;
}
