#include "rct/semantics.hpp"

#include <algorithm>
#include <sstream>

#include "rct/rng.hpp"

namespace rct::sem {

using ir::Error;
using ir::ErrKind;
using ir::Function;
using ir::Instruction;
using ir::Op;
using ir::Operand;
using ir::Region;

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

bool Event::operator==(const Event& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Ev::Branch:
      return taken == o.taken;
    case Ev::Read:
    case Ev::Write:
      return region == o.region && addr == o.addr;
    case Ev::OobRead:
      return addr == o.addr && value == o.value;
    case Ev::OobWrite:
      return addr == o.addr;
    case Ev::Call:
      return caller == o.caller && name == o.name;
    case Ev::Ret:
      return name == o.name && has_value == o.has_value &&
             (!has_value || value == o.value);
    case Ev::MemFault:
      return true;
    case Ev::SpecStart:
    case Ev::Rollback:
      return id == o.id;
  }
  return false;
}

std::string Event::str() const {
  std::ostringstream os;
  switch (kind) {
    case Ev::Branch:
      os << "BRANCH " << (taken ? 1 : 0);
      break;
    case Ev::Read:
      os << "READ " << (region == Region::Protected ? "p" : "u") << " " << addr;
      break;
    case Ev::Write:
      os << "WRITE " << (region == Region::Protected ? "p" : "u") << " " << addr;
      break;
    case Ev::OobRead:
      os << "OOBREAD " << addr << " " << value;
      break;
    case Ev::OobWrite:
      os << "OOBWRITE " << addr;
      break;
    case Ev::Call:
      os << "CALL " << (caller == Domain::Lib ? "lib" : "app") << " " << name;
      break;
    case Ev::Ret:
      os << "RET " << name << " ";
      if (has_value)
        os << value;
      else
        os << "-";
      break;
    case Ev::MemFault:
      os << "MEMFAULT";
      break;
    case Ev::SpecStart:
      os << "SPECSTART " << id;
      break;
    case Ev::Rollback:
      os << "ROLLBACK " << id;
      break;
  }
  return os.str();
}

std::vector<Segment> Trace::segments() const {
  std::vector<Segment> segs;
  size_t i = 0;
  while (i < events.size()) {
    Domain d = events[i].domain;
    size_t j = i + 1;
    while (j < events.size() && events[j].domain == d) ++j;
    segs.push_back({d, i, j});
    i = j;
  }
  return segs;
}

std::string Trace::dump() const {
  std::ostringstream os;
  for (const auto& e : events) os << "EVENT " << e.str() << "\n";
  return os.str();
}

Trace observable_projection(const Trace& t) { return t; }

// ---------------------------------------------------------------------------
// Initial states
// ---------------------------------------------------------------------------

Machine make_initial_state(const ir::WholeProgram& w, uint64_t seed) {
  Machine m;
  m.mem.assign(ir::kMemCells, 0);
  m.prot_sp = w.prot_stack_base;
  SplitMix64 rng(seed * 0x2545f4914f6cdd1dULL + 0x9e3779b9ULL);
  for (const auto& [name, len] : w.merged.secrets) {
    uint64_t base = w.secret_base.at(name);
    for (uint64_t i = 0; i < len; ++i) {
      uint64_t v;
      if (seed == 0)
        v = 0;
      else if (seed == 1)
        v = 1;
      else
        v = rng.next();
      m.mem[base + i] = v;
    }
  }
  return m;
}

std::vector<Machine> initial_states(const ir::WholeProgram& w,
                                    const std::vector<uint64_t>& seeds) {
  std::vector<Machine> out;
  out.reserve(seeds.size());
  for (uint64_t s : seeds) out.push_back(make_initial_state(w, s));
  return out;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

Runner::Runner(const ir::WholeProgram& w, RunConfig cfg,
               const spec::Speculator* sp)
    : w_(w), cfg_(cfg), sp_(sp) {
  if (sp_ && sp_->is_never()) sp_ = nullptr;
}

void Runner::emit(Event e) {
  e.domain = m_.domain();
  trace_.events.push_back(std::move(e));
}

uint64_t Runner::resolve_var(const std::string& name) const {
  const Frame& f = m_.frames.back();
  if (auto it = f.vars.find(name); it != f.vars.end()) return it->second;
  if (auto it = f.buf_base.find(name); it != f.buf_base.end()) return it->second;
  if (f.fn->label == ir::FnLabel::Lib) {
    if (auto it = w_.secret_base.find(name); it != w_.secret_base.end())
      return it->second;
  }
  throw Error(ErrKind::IllegalInstruction,
              "unbound name '" + name + "' in " + f.fn->name);
}

uint64_t Runner::eval(const Operand& o) const {
  switch (o.k) {
    case Operand::K::Lit:
      return o.lit;
    case Operand::K::Reg:
      return m_.sregs[(size_t)o.reg];
    case Operand::K::Var:
      return resolve_var(o.var);
  }
  return 0;
}

std::optional<Runner::BufRef> Runner::resolve_buffer(
    const std::string& name) const {
  const Frame& f = m_.frames.back();
  if (auto it = f.buf_base.find(name); it != f.buf_base.end()) {
    for (const auto& b : f.fn->buffers)
      if (b.name == name) return BufRef{it->second, b.len};
  }
  for (const auto& p : f.fn->params)
    if (p.is_buffer && p.name == name)
      return BufRef{f.vars.at(name), p.len};
  if (f.fn->label == ir::FnLabel::Lib) {
    if (auto it = w_.secret_base.find(name); it != w_.secret_base.end())
      return BufRef{it->second, w_.merged.secrets.at(name)};
  }
  return std::nullopt;
}

void Runner::enter_block(const std::vector<Instruction>& blk) {
  if (blk.empty()) return;
  m_.frames.back().blocks.push_back({&blk, 0, false, 0, nullptr});
}

void Runner::enter_branch(const Instruction& ins, bool taken) {
  enter_block(taken ? ins.blk_a : ins.blk_b);
}

void Runner::fault() {
  if (speculating()) {
    emit({.kind = Ev::MemFault});
    rollback();
  } else {
    emit({.kind = Ev::MemFault});
    m_.halted = true;
    m_.faulted = true;
  }
}

void Runner::rollback() {
  SpecCtx ctx = std::move(windows_.back());
  windows_.pop_back();
  m_ = std::move(ctx.snapshot);
  emit({.kind = Ev::Rollback, .id = ctx.id});
  // Resume on the architecturally correct path of the mispredicted branch.
  enter_branch(*ctx.branch, ctx.correct_taken);
}

void Runner::do_call(const Instruction& ins) {
  const Function& callee = w_.merged.functions.at(ins.callee);
  std::vector<uint64_t> vals;
  vals.reserve(ins.args.size());
  for (const auto& a : ins.args) vals.push_back(eval(a));
  emit({.kind = Ev::Call, .name = ins.callee, .caller = m_.domain()});
  // Arguments travel through the scratch registers and linger there.
  for (size_t i = 0; i < vals.size() && i < (size_t)ir::kNumScratchRegs; ++i)
    m_.sregs[i] = vals[i];

  Frame f;
  f.fn = &callee;
  f.saved_stack_prot = m_.stack_prot;
  f.ret_dst = ins.dst;
  f.want_ret = ins.has_dst;
  for (size_t i = 0; i < callee.params.size(); ++i)
    f.vars[callee.params[i].name] = i < vals.size() ? vals[i] : 0;
  for (const auto& l : callee.locals) f.vars[l] = 0;
  for (const auto& b : callee.buffers) {
    bool prot = b.hint == Region::Protected || m_.stack_prot;
    if (prot) {
      f.buf_base[b.name] = m_.prot_sp;
      m_.prot_sp += b.len;
      f.prot_alloc += b.len;
      if (m_.prot_sp > ir::kMemCells) {
        fault();
        return;
      }
    } else {
      f.buf_base[b.name] = m_.app_sp;
      m_.app_sp += b.len;
      f.app_alloc += b.len;
      if (m_.app_sp > ir::kProtBase) {
        fault();
        return;
      }
    }
  }
  m_.frames.push_back(std::move(f));
  enter_block(callee.body);
}

void Runner::do_return(bool has_val, uint64_t val) {
  Frame done = std::move(m_.frames.back());
  m_.frames.pop_back();
  m_.app_sp -= done.app_alloc;
  m_.prot_sp -= done.prot_alloc;
  m_.stack_prot = done.saved_stack_prot;

  bool has_caller = !m_.frames.empty();
  bool crossing = has_caller && done.fn->label == ir::FnLabel::Lib &&
                  m_.frames.back().fn->label == ir::FnLabel::App;
  Event e{.kind = Ev::Ret, .name = done.fn->name};
  if (crossing && has_val) {
    e.has_value = true;
    e.value = val;
  }
  // Emitted in the domain control returns to.
  emit(e);
  if (has_val) m_.sregs[0] = val;
  if (has_caller) {
    if (m_.frames.back().want_ret && !m_.frames.back().ret_dst.empty())
      m_.frames.back().vars[m_.frames.back().ret_dst] = has_val ? val : 0;
    m_.frames.back().want_ret = false;
  } else {
    m_.halted = true;
  }
}

void Runner::do_access(const Instruction& ins, bool is_store) {
  uint64_t addr;
  bool in_bounds = false;
  if (!ins.buf.empty()) {
    auto br = resolve_buffer(ins.buf);
    if (!br) throw Error(ErrKind::IllegalInstruction, "no buffer " + ins.buf);
    uint64_t idx = eval(ins.index);
    addr = br->base + idx;
    in_bounds = idx < br->len;
  } else {
    addr = eval(ins.index);
  }
  if (addr >= ir::kMemCells) {
    fault();
    return;
  }
  Region r = ir::region_of(addr);
  bool app = m_.domain() == Domain::App;
  if (r == Region::Protected && app) {
    // pkru gate: enabled only while executing lib code.
    fault();
    return;
  }
  if (is_store) {
    uint64_t v = eval(ins.b);
    m_.mem[addr] = v;
    if (in_bounds)
      emit({.kind = Ev::Write, .region = r, .addr = addr});
    else
      emit({.kind = Ev::OobWrite, .addr = addr});
    if (cfg_.parallel_observer && m_.domain() == Domain::Lib &&
        r == Region::Unprotected && snapshots_ < cfg_.snapshot_budget) {
      // Adversarial parallel observer snapshots the cell as soon as it is
      // written.
      ++snapshots_;
      Event snap{.kind = Ev::OobRead, .addr = addr, .value = v};
      snap.domain = Domain::App;
      trace_.events.push_back(std::move(snap));
    }
  } else {
    uint64_t v = m_.mem[addr];
    if (in_bounds) {
      emit({.kind = Ev::Read, .region = r, .addr = addr});
    } else {
      emit({.kind = Ev::OobRead, .addr = addr, .value = v});
    }
    m_.frames.back().vars[ins.dst] = v;
  }
}

void Runner::exec(const Instruction& ins) {
  charge(cfg_.cost.per_instruction);
  switch (ins.op) {
    case Op::Const:
      m_.frames.back().vars[ins.dst] = ins.lit;
      break;
    case Op::Binop: {
      uint64_t a = eval(ins.a), b = eval(ins.b), r = 0;
      switch (ins.bop) {
        case ir::BinOp::Add: r = a + b; break;
        case ir::BinOp::Sub: r = a - b; break;
        case ir::BinOp::Mul: r = a * b; break;
        case ir::BinOp::And: r = a & b; break;
        case ir::BinOp::Or: r = a | b; break;
        case ir::BinOp::Xor: r = a ^ b; break;
        case ir::BinOp::Shl: r = a << (b & 63); break;
        case ir::BinOp::Shr: r = a >> (b & 63); break;
        case ir::BinOp::Lt: r = a < b ? 1 : 0; break;
        case ir::BinOp::Eq: r = a == b ? 1 : 0; break;
      }
      m_.frames.back().vars[ins.dst] = r;
      break;
    }
    case Op::Load:
      do_access(ins, false);
      break;
    case Op::Store:
      do_access(ins, true);
      break;
    case Op::If: {
      bool taken = eval(ins.a) != 0;
      int occ = m_.branch_occ[ins.site]++;
      emit({.kind = Ev::Branch, .taken = taken});
      if (sp_ && (int)windows_.size() < sp_->max_depth) {
        spec::Decision d = sp_->decide(ins.site, occ);
        if (d.mispredict) {
          SpecCtx ctx;
          ctx.snapshot = m_;
          ctx.remaining = d.window;
          ctx.id = next_spec_id_++;
          ctx.branch = &ins;
          ctx.correct_taken = taken;
          windows_.push_back(std::move(ctx));
          emit({.kind = Ev::SpecStart, .id = windows_.back().id});
          enter_branch(ins, !taken);
          return;
        }
      }
      enter_branch(ins, taken);
      break;
    }
    case Op::Loop:
      if (ins.bound > 0) {
        m_.frames.back().vars[ins.counter] = 0;
        if (!ins.blk_a.empty())
          m_.frames.back().blocks.push_back(
              {&ins.blk_a, 0, true, ins.bound, &ins});
      }
      break;
    case Op::Call:
      do_call(ins);
      break;
    case Op::Ret:
      do_return(ins.has_ret_val, ins.has_ret_val ? eval(ins.ret_val) : 0);
      break;
    case Op::Memzero: {
      auto br = resolve_buffer(ins.dst);
      if (!br) throw Error(ErrKind::IllegalInstruction, "no buffer " + ins.dst);
      charge(cfg_.cost.memzero_cell * br->len);
      bool app = m_.domain() == Domain::App;
      for (uint64_t i = 0; i < br->len; ++i) {
        uint64_t addr = br->base + i;
        if (addr >= ir::kMemCells ||
            (ir::region_of(addr) == Region::Protected && app)) {
          fault();
          return;
        }
        m_.mem[addr] = 0;
        emit({.kind = Ev::Write, .region = ir::region_of(addr), .addr = addr});
      }
      break;
    }
    case Op::Fence:
      charge(cfg_.cost.fence);
      if (speculating()) rollback();
      break;
    case Op::ClearScratch:
      m_.sregs.fill(0);
      break;
    case Op::Pkru:
      // pkru tracks the executing domain; the instruction is the structural
      // marker carrying the domain-switch cost.
      charge(cfg_.cost.domain_switch);
      break;
    case Op::StackSwitch:
      m_.stack_prot = ins.flag;
      break;
  }
}

void Runner::step() {
  Frame& f = m_.frames.back();
  while (!f.blocks.empty()) {
    Frame::BlockRef& br = f.blocks.back();
    if (br.idx < br.blk->size()) break;
    if (br.is_loop && br.iters_left > 1) {
      --br.iters_left;
      br.idx = 0;
      f.vars[br.loop->counter] += 1;
      break;
    }
    f.blocks.pop_back();
  }
  if (f.blocks.empty()) {
    do_return(false, 0);
    return;
  }
  const Instruction& ins = (*f.blocks.back().blk)[f.blocks.back().idx];
  ++f.blocks.back().idx;
  exec(ins);
}

RunResult Runner::run(Machine s) {
  m_ = std::move(s);
  trace_.events.clear();
  cost_ = 0;
  snapshots_ = 0;

  const Function& entry = w_.merged.functions.at(w_.entry);
  Frame f;
  f.fn = &entry;
  f.saved_stack_prot = false;
  for (const auto& l : entry.locals) f.vars[l] = 0;
  for (const auto& b : entry.buffers) {
    bool prot = b.hint == Region::Protected;
    if (prot) {
      f.buf_base[b.name] = m_.prot_sp;
      m_.prot_sp += b.len;
      f.prot_alloc += b.len;
    } else {
      f.buf_base[b.name] = m_.app_sp;
      m_.app_sp += b.len;
      f.app_alloc += b.len;
    }
  }
  m_.frames.push_back(std::move(f));
  enter_block(entry.body);

  uint64_t max_steps = cfg_.max_steps ? cfg_.max_steps : w_.step_bound * 4 + 64;
  // Speculation replays up to window steps per misprediction.
  if (sp_) max_steps = max_steps * 4 + 4096;

  while (!m_.halted) {
    if (m_.steps++ > max_steps)
      throw Error(ErrKind::IllegalInstruction, "step budget exceeded");
    size_t active_before = windows_.size();
    step();
    if (m_.halted && speculating()) {
      // The program cannot retire inside a window; the window ends instead.
      m_.halted = false;
      rollback();
      continue;
    }
    // Windows that were active before this step consume one step each; a
    // window opened by this very step starts counting at the next one.
    size_t n = std::min(active_before, windows_.size());
    for (size_t i = 0; i < n; ++i)
      if (windows_[i].remaining > 0) --windows_[i].remaining;
    while (!windows_.empty() && windows_.back().remaining == 0) rollback();
  }
  RunResult rr;
  rr.trace = std::move(trace_);
  rr.final_state = std::move(m_);
  rr.cost = cost_;
  return rr;
}

Trace traces(const ir::WholeProgram& w, const Machine& s) {
  Runner r(w);
  return r.run(s).trace;
}

Trace spec_traces(const ir::WholeProgram& w, const Machine& s,
                  const spec::Speculator& sp) {
  Runner r(w, {}, &sp);
  return r.run(s).trace;
}

}  // namespace rct::sem
