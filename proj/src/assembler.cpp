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

#include "vbpsim/assembler.hpp"

#include <algorithm>
#include <cctype>

#include "vbpsim/common.hpp"
#include "vbpsim/isa.hpp"

namespace vbp::assembler {
namespace {

using isa::Form;
using isa::Opcode;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

bool is_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s.front())) return false;
  return std::all_of(s.begin(), s.end(), is_ident_char);
}

std::vector<std::string_view> split_operands(std::string_view s) {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  int depth = 0;
  size_t start = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
    if (s[i] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

enum class StmtKind { Instr, Db, Dq, Zero, Buddy, Entry };

struct Stmt {
  int line = 0;
  StmtKind kind = StmtKind::Instr;
  uint32_t addr = 0;
  size_t segment = 0;
  Opcode op = Opcode::Halt;
  std::vector<std::string_view> operands;
  uint32_t size = 0;
};

class Assembler {
 public:
  AsmImage run(std::string_view source) {
    pass_one(source);
    pass_two();
    return std::move(image_);
  }

 private:
  [[noreturn]] void error(int line, ErrorCode code, const std::string& msg) const {
    fail(code, "line " + std::to_string(line) + ": " + msg);
  }

  void pass_one(std::string_view source) {
    int line_no = 0;
    size_t pos = 0;
    while (pos <= source.size()) {
      size_t nl = source.find('\n', pos);
      if (nl == std::string_view::npos) nl = source.size();
      std::string_view line = source.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (auto c = line.find(';'); c != std::string_view::npos) line = line.substr(0, c);
      line = trim(line);
      // Labels, possibly several, possibly followed by a statement.
      while (true) {
        size_t colon = line.find(':');
        if (colon == std::string_view::npos) break;
        std::string_view name = trim(line.substr(0, colon));
        if (!is_identifier(name)) break;
        define_label(line_no, std::string(name));
        line = trim(line.substr(colon + 1));
      }
      if (!line.empty()) statement(line_no, line);
      if (nl == source.size()) break;
    }
  }

  void define_label(int line, const std::string& name) {
    if (image_.symbols.count(name)) error(line, ErrorCode::DuplicateLabel, "duplicate label '" + name + "'");
    ensure_segment();
    image_.symbols[name] = pc_;
  }

  void ensure_segment() {
    if (image_.segments.empty()) image_.segments.push_back(Segment{pc_, "rwx", {}});
  }

  void statement(int line, std::string_view text) {
    size_t sp = 0;
    while (sp < text.size() && !std::isspace(static_cast<unsigned char>(text[sp]))) ++sp;
    const std::string word = lower(text.substr(0, sp));
    const std::string_view rest = trim(text.substr(sp));

    if (word == "org") {
      auto ops = split_words(rest);
      if (ops.empty() || ops.size() > 2) error(line, ErrorCode::SyntaxError, "org expects <addr> [perms]");
      auto v = parse_int(ops[0]);
      if (!v || *v < 0 || *v > 0xFFFFFFFFll) error(line, ErrorCode::SyntaxError, "bad org address '" + std::string(ops[0]) + "'");
      std::string perms = ops.size() == 2 ? lower(ops[1]) : "rwx";
      if (perms.find_first_not_of("rwx") != std::string::npos || perms.empty()) {
        error(line, ErrorCode::SyntaxError, "bad segment perms '" + perms + "'");
      }
      pc_ = static_cast<uint32_t>(*v);
      image_.segments.push_back(Segment{pc_, perms, {}});
      return;
    }

    Stmt st;
    st.line = line;
    if (auto words = split_words(text); words.size() >= 3 && lower(words[1]) == "equ") {
      // NAME equ <expr>: expression may only use symbols defined above.
      const std::string name(words[0]);
      if (!is_identifier(name)) error(line, ErrorCode::SyntaxError, "bad constant name '" + name + "'");
      if (image_.symbols.count(name)) error(line, ErrorCode::DuplicateLabel, "duplicate label '" + name + "'");
      const size_t at = text.find(words[1]) + words[1].size();
      image_.symbols[name] = static_cast<uint32_t>(eval(st, text.substr(at), pc_));
      return;
    }
    st.operands = split_operands(rest);
    if (word == "db") {
      st.kind = StmtKind::Db;
      if (st.operands.empty()) error(line, ErrorCode::SyntaxError, "db needs at least one value");
      st.size = static_cast<uint32_t>(st.operands.size());
    } else if (word == "dq") {
      st.kind = StmtKind::Dq;
      if (st.operands.empty()) error(line, ErrorCode::SyntaxError, "dq needs at least one value");
      st.size = static_cast<uint32_t>(8 * st.operands.size());
    } else if (word == "zero") {
      st.kind = StmtKind::Zero;
      if (st.operands.size() != 1) error(line, ErrorCode::SyntaxError, "zero expects a byte count");
      const int64_t n = eval(st, st.operands[0], pc_);
      if (n < 0 || n > (1 << 24)) error(line, ErrorCode::SyntaxError, "zero count out of range");
      st.size = static_cast<uint32_t>(n);
    } else if (word == "buddy" || word == "entry") {
      st.kind = word == "buddy" ? StmtKind::Buddy : StmtKind::Entry;
      if (st.operands.size() != 1) error(line, ErrorCode::SyntaxError, word + " expects one address");
    } else {
      auto op = isa::opcode_from_mnemonic(word);
      if (!op) error(line, ErrorCode::SyntaxError, "unknown mnemonic '" + std::string(text.substr(0, sp)) + "'");
      st.op = *op;
      st.size = *isa::instruction_length(static_cast<uint8_t>(*op));
      check_arity(st);
    }
    if (st.size > 0) ensure_segment();
    st.addr = pc_;
    st.segment = image_.segments.empty() ? 0 : image_.segments.size() - 1;
    pc_ += st.size;
    stmts_.push_back(st);
  }

  static std::vector<std::string_view> split_words(std::string_view s) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j > i) out.push_back(s.substr(i, j - i));
      i = j;
    }
    return out;
  }

  void check_arity(const Stmt& st) const {
    size_t want = 0;
    switch (isa::form_of(st.op)) {
      case Form::None: want = 0; break;
      case Form::Rel32:
      case Form::Reg: want = 1; break;
      default: want = 2; break;
    }
    if (st.operands.size() != want) {
      error(st.line, ErrorCode::SyntaxError,
            std::string(isa::mnemonic(st.op)) + " expects " + std::to_string(want) + " operand(s)");
    }
  }

  int64_t eval(const Stmt& st, std::string_view expr, uint32_t here) const {
    expr = trim(expr);
    if (expr.empty()) error(st.line, ErrorCode::SyntaxError, "missing operand");
    int64_t total = 0;
    size_t i = 0;
    int sign = 1;
    bool expect_term = true;
    while (i < expr.size()) {
      char c = expr[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      if (!expect_term) {
        if (c != '+' && c != '-') error(st.line, ErrorCode::SyntaxError, "bad expression '" + std::string(expr) + "'");
        sign = c == '-' ? -1 : 1;
        expect_term = true;
        ++i;
        continue;
      }
      if (c == '-' || c == '+') {
        if (c == '-') sign = -sign;
        ++i;
        continue;
      }
      size_t j = i;
      while (j < expr.size() && (is_ident_char(expr[j]) || expr[j] == '$')) ++j;
      std::string_view term = expr.substr(i, j - i);
      if (term.empty()) error(st.line, ErrorCode::SyntaxError, "bad expression '" + std::string(expr) + "'");
      int64_t value = 0;
      if (term == "$") {
        value = here;
      } else if (std::isdigit(static_cast<unsigned char>(term.front()))) {
        auto v = parse_int(term);
        if (!v) error(st.line, ErrorCode::SyntaxError, "bad number '" + std::string(term) + "'");
        value = *v;
      } else if (is_identifier(term)) {
        auto it = image_.symbols.find(std::string(term));
        if (it == image_.symbols.end()) {
          error(st.line, ErrorCode::UnresolvedLabel, "unresolved label '" + std::string(term) + "'");
        }
        value = it->second;
      } else {
        error(st.line, ErrorCode::SyntaxError, "bad term '" + std::string(term) + "'");
      }
      total += sign * value;
      sign = 1;
      expect_term = false;
      i = j;
    }
    if (expect_term) error(st.line, ErrorCode::SyntaxError, "dangling operator in '" + std::string(expr) + "'");
    return total;
  }

  uint8_t reg(const Stmt& st, std::string_view s) const {
    s = trim(s);
    if (s.size() == 2 && (s[0] == 'r' || s[0] == 'R') && s[1] >= '0' && s[1] <= '7') {
      return static_cast<uint8_t>(s[1] - '0');
    }
    error(st.line, ErrorCode::SyntaxError, "expected register R0-R7, got '" + std::string(s) + "'");
  }

  // "[Rn]", "[Rn+expr]", "[Rn-expr]"
  std::pair<uint8_t, int32_t> mem(const Stmt& st, std::string_view s) const {
    s = trim(s);
    if (s.size() < 4 || s.front() != '[' || s.back() != ']') {
      error(st.line, ErrorCode::SyntaxError, "expected memory operand [Rn+off], got '" + std::string(s) + "'");
    }
    s = trim(s.substr(1, s.size() - 2));
    uint8_t base = reg(st, s.substr(0, 2));
    std::string_view rest = trim(s.substr(2));
    int64_t off = 0;
    if (!rest.empty()) {
      if (rest.front() != '+' && rest.front() != '-') {
        error(st.line, ErrorCode::SyntaxError, "bad displacement '" + std::string(rest) + "'");
      }
      off = eval(st, rest, st.addr);
    }
    if (off < INT32_MIN || off > UINT32_MAX) error(st.line, ErrorCode::SyntaxError, "displacement out of range");
    return {base, static_cast<int32_t>(static_cast<uint32_t>(off))};
  }

  void emit(const Stmt& st, std::span<const uint8_t> bytes) {
    auto& seg = image_.segments[st.segment];
    seg.bytes.insert(seg.bytes.end(), bytes.begin(), bytes.end());
  }

  void pass_two() {
    for (const auto& st : stmts_) {
      switch (st.kind) {
        case StmtKind::Db: {
          std::vector<uint8_t> out;
          for (auto o : st.operands) {
            int64_t v = eval(st, o, st.addr);
            if (v < -128 || v > 255) error(st.line, ErrorCode::SyntaxError, "db value out of range");
            out.push_back(static_cast<uint8_t>(v));
          }
          emit(st, out);
          break;
        }
        case StmtKind::Dq: {
          std::vector<uint8_t> out;
          for (auto o : st.operands) {
            auto v = static_cast<uint64_t>(eval(st, o, st.addr));
            for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
          }
          emit(st, out);
          break;
        }
        case StmtKind::Zero:
          emit(st, std::vector<uint8_t>(st.size, 0));
          break;
        case StmtKind::Buddy:
          image_.buddy_pages.push_back(page_base(static_cast<uint32_t>(eval(st, st.operands[0], st.addr))));
          break;
        case StmtKind::Entry:
          image_.entry = static_cast<uint32_t>(eval(st, st.operands[0], st.addr));
          break;
        case StmtKind::Instr:
          emit(st, isa::encode(build(st)));
          break;
      }
    }
    if (!image_.entry) {
      if (auto it = image_.symbols.find("_start"); it != image_.symbols.end()) {
        image_.entry = it->second;
      } else {
        for (const auto& seg : image_.segments) {
          if (!seg.bytes.empty()) {
            image_.entry = seg.origin;
            break;
          }
        }
      }
    }
    std::erase_if(image_.segments, [](const Segment& s) { return s.bytes.empty(); });
    check_overlap();
  }

  void check_overlap() const {
    auto segs = image_.segments;
    std::sort(segs.begin(), segs.end(), [](auto& a, auto& b) { return a.origin < b.origin; });
    for (size_t i = 1; i < segs.size(); ++i) {
      uint64_t end = uint64_t{segs[i - 1].origin} + segs[i - 1].bytes.size();
      if (end > segs[i].origin) {
        fail(ErrorCode::SyntaxError, "segments overlap at " + hex(segs[i].origin));
      }
    }
  }

  isa::Instruction build(const Stmt& st) const {
    isa::Instruction in = isa::make(st.op);
    const auto& o = st.operands;
    switch (isa::form_of(st.op)) {
      case Form::None:
        break;
      case Form::RegImm64:
        in.rd = reg(st, o[0]);
        in.imm = static_cast<uint64_t>(eval(st, o[1], st.addr));
        break;
      case Form::RegReg:
        in.rd = reg(st, o[0]);
        in.rs = reg(st, o[1]);
        break;
      case Form::Load: {
        in.rd = reg(st, o[0]);
        auto [base, off] = mem(st, o[1]);
        in.rs = base;
        in.rel = off;
        break;
      }
      case Form::Store: {
        auto [base, off] = mem(st, o[0]);
        in.rd = base;
        in.rel = off;
        in.rs = reg(st, o[1]);
        break;
      }
      case Form::Rel32: {
        int64_t target = eval(st, o[0], st.addr);
        in.rel = static_cast<int32_t>(static_cast<uint32_t>(target) - (st.addr + in.length));
        break;
      }
      case Form::RegSlot: {
        in.rd = reg(st, o[0]);
        int64_t n = eval(st, o[1], st.addr);
        if (n < 0 || n >= isa::kNumDebugSlots) error(st.line, ErrorCode::SyntaxError, "debug slot must be 0-3");
        in.rs = static_cast<uint8_t>(n);
        break;
      }
      case Form::Reg:
        if (st.op == Opcode::Out) {
          in.rs = reg(st, o[0]);
        } else {
          in.rd = reg(st, o[0]);
        }
        break;
    }
    return in;
  }

  AsmImage image_;
  std::vector<Stmt> stmts_;
  uint32_t pc_ = 0;
};

}  // namespace

AsmImage assemble(std::string_view source) { return Assembler().run(source); }

}  // namespace vbp::assembler
