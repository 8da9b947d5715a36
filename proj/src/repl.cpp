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


#include "vbpsim/repl.hpp"

#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "vbpsim/eventlog.hpp"
#include "vbpsim/protocol.hpp"

namespace vbp {
namespace {

constexpr uint64_t kContinueBudget = 1000000;

std::vector<std::string> words_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

BreakpointByte flags_of(const std::string& text) {
  auto f = parse_flags(text);
  if (!f) fail(ErrorCode::InvalidArgument, "bad flags '" + text + "' (letters from rwxfht)");
  return *f;
}

}  // namespace

const char* Repl::help_text() {
  return "commands:\n"
         "  b <addr> [rwxfh]     set breakpoint flags (default x)\n"
         "  d <addr>             clear breakpoint\n"
         "  bpage <addr> <flags> flag every byte of a page\n"
         "  s                    step one instruction\n"
         "  c                    continue to the next event\n"
         "  regs                 registers\n"
         "  mem <addr> <len>     guest bytes\n"
         "  bp <addr>            buddy byte\n"
         "  pt                   page table\n"
         "  tlb                  TLB entries\n"
         "  counters             performance counters\n"
         "  mode [m]             show or set trap mode (vbp int3 splitview singlestep debugregs)\n"
         "  q                    quit\n";
}

VAddr Repl::address(const std::string& text) const {
  if (auto it = session_.image().symbols.find(text); it != session_.image().symbols.end()) return it->second;
  if (text.find_first_of("+-") != std::string::npos) {
    if (auto v = session_.image().resolve(text)) return *v;
  }
  std::string digits = text;
  if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) digits.erase(0, 2);
  if (auto v = parse_int("0x" + digits); v && *v >= 0 && *v <= 0xFFFFFFFFll) return static_cast<VAddr>(*v);
  fail(ErrorCode::InvalidArgument, "bad address '" + text + "'");
}

void Repl::report(const Session::RunResult& r) {
  const auto& log = session_.log();
  for (; seen_ < log.size(); ++seen_) {
    if (!r.event || !(log[seen_] == *r.event) || seen_ + 1 != log.size()) out_ << "  " << describe(log[seen_]) << "\n";
  }
  if (r.event) {
    out_ << "stopped: " << describe(*r.event) << "\n";
  } else if (r.timeout) {
    out_ << "no event after " << r.retired << " instructions\n";
  }
  out_ << "pc " << hex(session_.state().pc) << "\n";
}

bool Repl::execute(const std::string& line) {
  const auto w = words_of(line);
  if (w.empty()) return true;
  const std::string& cmd = w[0];
  auto need = [&](size_t lo, size_t hi) {
    if (w.size() < lo || w.size() > hi) fail(ErrorCode::InvalidArgument, "usage error for '" + cmd + "'");
  };
  try {
    if (cmd == "q" || cmd == "quit") {
      return false;
    } else if (cmd == "b") {
      need(2, 3);
      const VAddr a = address(w[1]);
      const BreakpointByte f = w.size() == 3 ? flags_of(w[2]) : BreakpointByte{bpflag::X};
      session_.set_breakpoint(a, f);
      out_ << "breakpoint " << hex(a) << " " << format_flags(f) << "\n";
    } else if (cmd == "d") {
      need(2, 2);
      const VAddr a = address(w[1]);
      session_.clear_breakpoint(a);
      out_ << "cleared " << hex(a) << "\n";
    } else if (cmd == "bpage") {
      need(3, 3);
      const VAddr a = page_base(address(w[1]));
      session_.set_vbp_page(a, flags_of(w[2]));
      out_ << "page " << hex(a) << " " << w[2] << "\n";
    } else if (cmd == "s") {
      need(1, 1);
      report(session_.step());
    } else if (cmd == "c") {
      need(1, 1);
      report(session_.run_until_event(kContinueBudget));
    } else if (cmd == "regs") {
      const MachineState& s = session_.state();
      for (size_t i = 0; i < s.regs.size(); ++i) {
        out_ << "R" << i << " " << hex(s.regs[i], 16) << ((s.reg_taint >> i) & 1 ? " T" : "") << "\n";
      }
      out_ << "pc " << hex(s.pc) << " zf " << s.zf << " cycle " << s.cycle << " stall " << s.stall_cycles << "\n";
    } else if (cmd == "mem") {
      need(3, 3);
      const VAddr a = address(w[1]);
      auto len = parse_int(w[2]);
      if (!len || *len < 0 || *len > 4096) fail(ErrorCode::InvalidArgument, "bad length '" + w[2] + "'");
      for (int64_t i = 0; i < *len; i += 16) {
        out_ << hex(a + static_cast<VAddr>(i), 8) << ":";
        for (int64_t k = i; k < std::min<int64_t>(*len, i + 16); ++k) {
          out_ << " " << hex(session_.read_mem(a + static_cast<VAddr>(k)), 2).substr(2);
        }
        out_ << "\n";
      }
    } else if (cmd == "bp") {
      need(2, 2);
      const BreakpointByte f = session_.read_vbp(address(w[1]));
      out_ << hex(f.bits, 2) << " (" << format_flags(f) << ")\n";
    } else if (cmd == "pt") {
      for (const auto& r : page_table_json(session_)) {
        out_ << hex(r["vaddr"].get<uint32_t>(), 8) << " -> frame " << r["frame"].get<uint32_t>()
             << (r["writable"].get<bool>() ? " w" : " -") << (r["executable"].get<bool>() ? "x" : "-")
             << (r["breakpoint"].get<bool>() ? " bp" : "") << (r["swapped"].get<bool>() ? " swapped" : "")
             << (r["cow"] != "none" ? " cow=" + r["cow"].get<std::string>() : "") << "\n";
      }
    } else if (cmd == "tlb") {
      for (const auto& r : tlb_json(session_)) {
        out_ << "vpn " << hex(r["vpn"].get<uint32_t>(), 5) << " -> frame " << r["frame"].get<uint32_t>()
             << (r["breakpoint"].get<bool>() ? " bp" : "") << "\n";
      }
    } else if (cmd == "counters") {
      out_ << records_text(session_.counters().to_records());
    } else if (cmd == "mode") {
      need(1, 2);
      if (w.size() == 2) {
        auto m = parse_mode(w[1]);
        if (!m) fail(ErrorCode::InvalidArgument, "unknown mode '" + w[1] + "'");
        session_.set_mode(*m);
      }
      out_ << "mode " << mode_name(session_.mode()) << "\n";
    } else {
      out_ << "unknown command '" << cmd << "'\n" << help_text();
    }
  } catch (const Error& e) {
    out_ << "error: " << error_name(e.code()) << ": " << e.what() << "\n";
  }
  return true;
}

void Repl::run(std::istream& in, bool prompt) {
  std::string line;
  while (true) {
    if (prompt) out_ << "(vbp) " << std::flush;
    if (!std::getline(in, line)) break;
    if (!execute(line)) break;
  }
}

}  // namespace vbp
