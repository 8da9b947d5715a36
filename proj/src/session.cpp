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

#include "vbpsim/session.hpp"

#include <algorithm>
#include <cstring>

#include "driver.hpp"
#include "vbpsim/eventlog.hpp"
#include "vbpsim/oracle.hpp"

namespace vbp {

std::string_view mode_name(TrapMode mode) {
  switch (mode) {
    case TrapMode::Vbp: return "vbp";
    case TrapMode::Int3: return "int3";
    case TrapMode::SplitView: return "splitview";
    case TrapMode::SingleStep: return "singlestep";
    case TrapMode::DebugRegs: return "debugregs";
  }
  return "?";
}

std::optional<TrapMode> parse_mode(std::string_view name) {
  for (auto m : {TrapMode::Vbp, TrapMode::Int3, TrapMode::SplitView, TrapMode::SingleStep, TrapMode::DebugRegs}) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Environment

Environment::Environment(const GuestImage& image, const SessionConfig& config, BuddyObserver* observer)
    : memory(config.physical_bytes), mmu(memory, counters, config.mmu), kernel(memory, mmu, config.kernel) {
  kernel.set_observer(observer);
  as = kernel.create_address_space();

  struct Perms {
    bool writable = false;
    bool executable = false;
  };
  std::map<uint32_t, Perms> pages;
  for (const auto& seg : image.segments) {
    if (seg.length == 0) continue;
    for (uint32_t vpn = page_of(seg.vaddr); vpn <= page_of(seg.vaddr + seg.length - 1); ++vpn) {
      pages[vpn].writable |= seg.perms.find('w') != std::string::npos;
      pages[vpn].executable |= seg.perms.find('x') != std::string::npos;
    }
  }
  for (VAddr b : image.buddy_pages) pages.try_emplace(page_of(b), Perms{true, false});
  for (const auto& [vpn, p] : pages) kernel.map_page(as, vpn << kPageShift, p.writable, p.executable);
  for (const auto& seg : image.segments) {
    for (uint32_t i = 0; i < seg.length; ++i) kernel.poke(as, seg.vaddr + i, image.bytes[seg.offset + i]);
  }
  for (VAddr b : image.buddy_pages) kernel.attach_buddy(as, b);
  kernel.activate(as);
  state.pc = image.entry;
}

// ---------------------------------------------------------------------------
// Driver

namespace detail {

void charge_exit(Environment& env, const SessionConfig& config) {
  ++env.counters.debug_exits;
  env.state.stall_cycles += config.exit_penalty;
}

namespace {

bool is_debug_exit(EventKind k) {
  return k == EventKind::VbpHit || k == EventKind::Int3 || k == EventKind::SingleStep || k == EventKind::DrHit;
}

}  // namespace

StepOutcome advance(DriverContext& ctx, const StepFn& step) {
  Environment& env = ctx.env;
  MachineState& s = env.state;

  auto run = [&]() {
    while (true) {
      StepOutcome o = step(env);
      if (o.stop && o.stop->kind == EventKind::PageFault && o.stop->fault == FaultReason::WriteProtected &&
          env.kernel.handle_page_fault(env.as, o.stop->vaddr, FaultReason::WriteProtected)) {
        continue;  // copy-on-write resolved; the retry re-raises any hooks
      }
      return o;
    }
  };

  StepOutcome out;
  bool done = false;
  if (auto p = std::exchange(env.pending, std::nullopt)) {
    switch (p->kind) {
      case EventKind::VbpHit:
      case EventKind::DrHit:
        resume(s, ResumeToken{p->vaddr, p->access.value_or(AccessKind::Execute)});
        break;
      case EventKind::Int3: {
        std::optional<StepOutcome> o;
        if (ctx.step_over_int3) o = ctx.step_over_int3(p->vaddr);
        if (o) {
          out = std::move(*o);
        } else {
          // The guest's own 0xCC: deliver it as a one-byte no-op.
          s.pc = p->vaddr + 1;
          s.cycle += 1;
          s.resume_tokens.clear();
          ++env.counters.instructions_retired;
          out.retired = true;
          if (s.tf) {
            DebugEvent e;
            e.kind = EventKind::SingleStep;
            e.vaddr = p->vaddr;
            e.cycle = s.cycle;
            out.stop = e;
          }
        }
        done = true;
        break;
      }
      default:
        break;
    }
  }
  if (!done) out = run();

  if (out.retired && ctx.trace) ctx.trace->push_back(TraceRecord{s.pc, s.regs, s.zf});

  for (auto& n : out.notes) {
    if (n.kind == EventKind::HookPoint) {
      if (auto it = env.hooks.find(n.vaddr); it != env.hooks.end()) n.hook_id = it->second;
    }
    ctx.log.push_back(n);
    charge_exit(env, ctx.config);
    if (n.kind == EventKind::HookPoint && ctx.on_hook && *ctx.on_hook) (*ctx.on_hook)(n);
    // Hooks already dispatched for this instruction are not raised again
    // when it is restarted.
    if (!out.retired && n.kind == EventKind::HookPoint && n.access) resume(s, ResumeToken{n.vaddr, *n.access});
  }

  if (out.stop) {
    const DebugEvent& e = *out.stop;
    ctx.log.push_back(e);
    env.last_stop = e;
    if (is_debug_exit(e.kind)) charge_exit(env, ctx.config);
    if (e.kind == EventKind::VbpHit || e.kind == EventKind::DrHit || e.kind == EventKind::Int3) env.pending = e;
    env.run_state = e.kind == EventKind::Halt ? RunState::Halted : RunState::Stopped;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Session

Session::Session(GuestImage image, SessionConfig config)
    : image_(std::move(image)), config_(config), mode_(config.mode) {
  image_.validate();
  env_ = std::make_unique<Environment>(image_, config_, &shadow_);
  int3_ = std::make_unique<Int3Manager>(env_->kernel, env_->as);
  split_ = std::make_unique<SplitView>(env_->kernel, env_->as);
  env_->state.tf = mode_ == TrapMode::SingleStep;
  env_->mmu.set_vbp_enabled(mode_ == TrapMode::Vbp && config_.mmu.vbp_enabled);
  if (mode_ != TrapMode::Vbp) verifiable_ = false;
}

Session::~Session() = default;

void Session::record(Op op) {
  op(*env_);
  ops_.emplace_back(steps_, std::move(op));
}

StepOutcome Session::advance() {
  TrapConfig tc;
  tc.taint = config_.taint;
  tc.debug_regs = mode_ == TrapMode::DebugRegs ? &drs_.file() : nullptr;
  tc.code_writes = mode_ == TrapMode::SplitView ? split_.get() : nullptr;
  const detail::StepFn machine_step = [&tc](Environment& e) { return vbp::step(e.state, e.mmu, tc); };

  detail::DriverContext ctx{*env_, config_, log_, config_.record_trace ? &trace_ : nullptr, &hook_handler_, {}};
  ctx.step_over_int3 = [&](VAddr v) -> std::optional<StepOutcome> {
    auto over = [&](auto& owner) {
      owner.disarm(v);
      StepOutcome o;
      try {
        o = machine_step(*env_);
      } catch (...) {
        owner.arm(v);
        throw;
      }
      owner.arm(v);
      if (o.retired) detail::charge_exit(*env_, config_);  // the step-over trap
      return o;
    };
    if (mode_ == TrapMode::Int3 && int3_->owns(v)) return over(*int3_);
    if (mode_ == TrapMode::SplitView && split_->owns(v)) return over(*split_);
    // Breakpoint removed while stopped on it: the original byte is back.
    const auto alias = env_->mmu.exec_alias(v);
    const uint8_t now = alias ? env_->memory.read8(*alias * kPageSize + page_offset(v)) : env_->kernel.peek(env_->as, v);
    if (now != kInt3Byte) return machine_step(*env_);
    return std::nullopt;
  };
  // Ops issued from inside this step (hook handlers) take effect after it.
  ++steps_;
  return detail::advance(ctx, machine_step);
}

Session::RunResult Session::run_until_event(uint64_t max_cycles) {
  RunResult r;
  if (env_->run_state == RunState::Halted) {
    r.event = env_->last_stop;
    return r;
  }
  while (r.retired < max_cycles) {
    StepOutcome o = advance();
    if (o.retired) ++r.retired;
    if (o.stop) {
      r.event = o.stop;
      return r;
    }
  }
  r.timeout = true;
  return r;
}

Session::RunResult Session::run_to_end(uint64_t max_cycles) {
  RunResult total;
  while (true) {
    RunResult r = run_until_event(max_cycles - total.retired);
    total.retired += r.retired;
    total.event = r.event;
    total.timeout = r.timeout;
    if (r.timeout || !r.event) return total;
    const EventKind k = r.event->kind;
    if (k == EventKind::Halt || k == EventKind::PageFault || k == EventKind::InvalidOpcode) return total;
    if (total.retired >= max_cycles) {
      total.timeout = true;
      return total;
    }
  }
}

void Session::set_vbp(VAddr vaddr, BreakpointByte flags) {
  record([vaddr, flags](Environment& e) { e.kernel.set_vbp(e.as, vaddr, flags); });
}

void Session::clear_vbp(VAddr vaddr) {
  record([vaddr](Environment& e) { e.kernel.clear_vbp(e.as, vaddr); });
}

BreakpointByte Session::read_vbp(VAddr vaddr) const { return env_->kernel.read_vbp(env_->as, vaddr); }

void Session::set_vbp_page(VAddr page, BreakpointByte flags) {
  record([page, flags](Environment& e) { e.kernel.set_vbp_page(e.as, page, flags); });
}

void Session::set_breakpoint(VAddr vaddr, BreakpointByte flags) {
  const bool exec = flags.has(bpflag::X) || flags.has(bpflag::Fetch);
  switch (mode_) {
    case TrapMode::Vbp:
      set_vbp(vaddr, flags);
      return;
    case TrapMode::Int3:
    case TrapMode::SplitView:
      if (!exec || flags.has(bpflag::R) || flags.has(bpflag::W)) {
        fail(ErrorCode::InvalidArgument, std::string(mode_name(mode_)) + " mode supports execute breakpoints only");
      }
      if (mode_ == TrapMode::Int3) {
        int3_->set(vaddr);
      } else {
        split_->add(vaddr);
      }
      return;
    case TrapMode::DebugRegs: {
      if (!exec && !flags.has(bpflag::R) && !flags.has(bpflag::W)) {
        fail(ErrorCode::InvalidArgument, "no breakpoint kind given");
      }
      const DebugRegisters before = drs_;
      try {
        if (exec) drs_.insert(vaddr, DrKind::Exec);
        if (flags.has(bpflag::R)) {
          drs_.insert(vaddr, DrKind::ReadWrite);
        } else if (flags.has(bpflag::W)) {
          drs_.insert(vaddr, DrKind::Write);
        }
      } catch (const Error&) {
        drs_ = before;
        throw;
      }
      return;
    }
    case TrapMode::SingleStep:
      fail(ErrorCode::InvalidMode, "single-step mode has no breakpoints");
  }
}

void Session::clear_breakpoint(VAddr vaddr) {
  switch (mode_) {
    case TrapMode::Vbp: clear_vbp(vaddr); return;
    case TrapMode::Int3: int3_->clear(vaddr); return;
    case TrapMode::SplitView: split_->remove(vaddr); return;
    case TrapMode::DebugRegs:
      if (!drs_.remove(vaddr)) fail(ErrorCode::NotSet, "no debug register watches " + hex(vaddr));
      return;
    case TrapMode::SingleStep:
      fail(ErrorCode::InvalidMode, "single-step mode has no breakpoints");
  }
}

void Session::register_hook(VAddr vaddr, uint32_t hook_id) {
  record([vaddr, hook_id](Environment& e) {
    const BreakpointByte now = e.kernel.mapping(e.as, vaddr) ? e.kernel.read_vbp(e.as, vaddr) : BreakpointByte{};
    e.kernel.set_vbp(e.as, vaddr, BreakpointByte{static_cast<uint8_t>(now.bits | bpflag::Hook)});
    e.hooks[vaddr] = hook_id;
  });
}

void Session::unregister_hook(VAddr vaddr) {
  record([vaddr](Environment& e) {
    const BreakpointByte now = e.kernel.read_vbp(e.as, vaddr);
    if (now.has(bpflag::Hook)) {
      e.kernel.set_vbp(e.as, vaddr, BreakpointByte{static_cast<uint8_t>(now.bits & ~bpflag::Hook)});
    }
    e.hooks.erase(vaddr);
  });
}

void Session::inject_external(VAddr vaddr, std::span<const uint8_t> bytes) {
  if (bytes.empty()) return;
  for (size_t i = 0; i < bytes.size(); ++i) {
    const VAddr v = vaddr + static_cast<VAddr>(i);
    auto m = env_->kernel.mapping(env_->as, v);
    if (!m || m->swapped) fail(ErrorCode::PageFault, "inject target " + hex(v) + " is not mapped");
    if (!m->breakpoint) fail(ErrorCode::NoBuddyFrame, "inject target " + hex(v) + " has no buddy frame");
  }
  record([vaddr, data = std::vector<uint8_t>(bytes.begin(), bytes.end())](Environment& e) {
    for (size_t i = 0; i < data.size(); ++i) {
      const VAddr v = vaddr + static_cast<VAddr>(i);
      e.kernel.poke(e.as, v, data[i]);
      const BreakpointByte now = e.kernel.read_vbp(e.as, v);
      e.kernel.set_vbp(e.as, v, BreakpointByte{static_cast<uint8_t>(now.bits | bpflag::Taint)});
    }
  });
}

void Session::set_mode(TrapMode mode) {
  int3_->clear_all();
  drs_.clear_all();
  split_->release_all();
  mode_ = mode;
  env_->state.tf = mode == TrapMode::SingleStep;
  env_->mmu.set_vbp_enabled(mode == TrapMode::Vbp && config_.mmu.vbp_enabled);
  env_->pending.reset();
  env_->state.resume_tokens.clear();
  if (mode != TrapMode::Vbp) verifiable_ = false;
}

AsId Session::cow_fork(VAddr vaddr, CowPolicy policy) {
  const AsId child = env_->kernel.cow_fork_page(env_->as, vaddr, policy);
  ops_.emplace_back(steps_, [vaddr, policy](Environment& e) { e.kernel.cow_fork_page(e.as, vaddr, policy); });
  return child;
}

void Session::switch_address_space(AsId as) {
  record([as](Environment& e) {
    e.kernel.activate(as);
    e.as = as;
  });
}

void Session::set_pc(VAddr pc) {
  record([pc](Environment& e) {
    e.state.pc = pc;
    e.state.halted = false;
    e.state.resume_tokens.clear();
    e.pending.reset();
    e.run_state = RunState::Stopped;
  });
}

uint8_t Session::read_mem(VAddr vaddr) const { return env_->kernel.peek(env_->as, vaddr); }

// ---------------------------------------------------------------------------
// Oracle verification

namespace {

struct Replay {
  ShadowOracle shadow;
  std::unique_ptr<Environment> env;
  std::vector<DebugEvent> log;
};

std::string state_diff(const MachineState& a, const MachineState& b) {
  if (a.pc != b.pc) return "pc " + hex(a.pc) + " vs " + hex(b.pc);
  for (int i = 0; i < isa::kNumRegs; ++i) {
    if (a.regs[i] != b.regs[i]) return "R" + std::to_string(i) + " " + hex(a.regs[i]) + " vs " + hex(b.regs[i]);
  }
  if (a.zf != b.zf) return "zf differs";
  if (a.tf != b.tf) return "tf differs";
  if (a.halted != b.halted) return "halted differs";
  if (a.cycle != b.cycle) return "cycle " + std::to_string(a.cycle) + " vs " + std::to_string(b.cycle);
  if (a.stall_cycles != b.stall_cycles) return "stall cycles differ";
  if (a.resume_tokens != b.resume_tokens) return "resume tokens differ";
  if (a.reg_taint != b.reg_taint) return "register taint " + hex(a.reg_taint, 2) + " vs " + hex(b.reg_taint, 2);
  if (a.out != b.out) return "OUT bytes differ";
  return {};
}

std::string log_diff(const std::vector<DebugEvent>& a, const std::vector<DebugEvent>& b, const char* name) {
  const size_t n = std::max(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    if (i < a.size() && i < b.size() && a[i] == b[i]) continue;
    const std::string left = i < a.size() ? describe(a[i]) : "<end>";
    const std::string right = i < b.size() ? describe(b[i]) : "<end>";
    return "event " + std::to_string(i) + ": session " + left + ", " + name + " " + right;
  }
  return {};
}

}  // namespace

OracleReport Session::verify_against_oracle() const {
  OracleReport rep;
  rep.steps = steps_;
  if (!verifiable()) {
    rep.equivalent = false;
    rep.detail = "only Vbp-mode sessions can be replayed";
    return rep;
  }

  SessionConfig cfg = config_;
  cfg.mmu.tlb_enabled = false;
  cfg.record_trace = false;

  auto replay = [&](bool use_oracle) {
    auto r = std::make_unique<Replay>();
    r->env = std::make_unique<Environment>(image_, cfg, &r->shadow);
    r->env->mmu.set_vbp_enabled(cfg.mmu.vbp_enabled);
    OracleInterpreter interp(r->shadow, cfg.taint);
    const TrapConfig tc{cfg.taint, nullptr, nullptr};
    detail::StepFn fn;
    if (use_oracle) {
      fn = [&interp](Environment& e) { return interp.step(e); };
    } else {
      fn = [&tc](Environment& e) { return vbp::step(e.state, e.mmu, tc); };
    }
    detail::DriverContext ctx{*r->env, cfg, r->log, nullptr, nullptr, {}};
    size_t k = 0;
    for (uint64_t i = 0; i <= steps_; ++i) {
      while (k < ops_.size() && ops_[k].first == i) ops_[k++].second(*r->env);
      if (i < steps_) detail::advance(ctx, fn);
    }
    return r;
  };

  const auto tlb_off = replay(false);
  const auto oracle = replay(true);
  rep.events_compared = log_.size();

  auto diverge = [&](std::string what) {
    rep.equivalent = false;
    rep.detail = std::move(what);
    return rep;
  };

  if (auto d = log_diff(log_, tlb_off->log, "tlb-off"); !d.empty()) return diverge(d);
  if (auto d = log_diff(log_, oracle->log, "oracle"); !d.empty()) return diverge(d);
  if (auto d = state_diff(env_->state, tlb_off->env->state); !d.empty()) return diverge("tlb-off state: " + d);
  if (auto d = state_diff(env_->state, oracle->env->state); !d.empty()) return diverge("oracle state: " + d);

  const PerfCounters& a = env_->counters;
  const PerfCounters& b = tlb_off->env->counters;
  if (a.instructions_retired != b.instructions_retired || a.data_refs != b.data_refs ||
      a.fetch_refs != b.fetch_refs || a.buddy_refs != b.buddy_refs || a.debug_exits != b.debug_exits ||
      a.taint_dropped != b.taint_dropped) {
    return diverge("tlb-off reference counters differ");
  }
  if (a.taint_dropped != oracle->env->counters.taint_dropped) return diverge("oracle taint_dropped differs");

  const Kernel& k = env_->kernel;
  if (k.address_space_count() != oracle->env->kernel.address_space_count()) {
    return diverge("address space count differs");
  }
  for (AsId as = 0; as < k.address_space_count(); ++as) {
    for (const auto& [vpn, m] : k.mappings(as)) {
      const VAddr va = vpn << kPageShift;
      for (const Replay* r : {tlb_off.get(), oracle.get()}) {
        const auto om = r->env->kernel.mapping(as, va);
        if (!om || !(*om == m)) return diverge("mapping of " + hex(va) + " differs");
        if (m.swapped) continue;
        auto mine = env_->memory.frame(m.frame);
        auto theirs = r->env->memory.frame(om->frame);
        if (!std::equal(mine.begin(), mine.end(), theirs.begin())) {
          for (uint32_t off = 0; off < kPageSize; ++off) {
            if (mine[off] != theirs[off]) return diverge("memory at " + hex(va + off) + " differs");
          }
        }
        if (!m.breakpoint) continue;
        for (uint32_t off = 0; off < kPageSize; ++off) {
          const uint8_t live = env_->memory.read8((m.frame + 1) * kPageSize + off);
          const uint8_t want = r == oracle.get() ? r->shadow.get(om->frame * kPageSize + off)
                                                 : r->env->memory.read8((om->frame + 1) * kPageSize + off);
          if (live != want) {
            return diverge("breakpoint byte for " + hex(va + off) + " is " + hex(live, 2) + ", " +
                           (r == oracle.get() ? "oracle" : "tlb-off") + " has " + hex(want, 2));
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace vbp
