#include "rct/attackers.hpp"

#include <algorithm>

#include "rct/rng.hpp"

namespace rct::atk {

using ir::BufferDecl;
using ir::Error;
using ir::ErrKind;
using ir::FnLabel;
using ir::Function;
using ir::Instruction;
using ir::Module;
using ir::Op;
using ir::Operand;

std::string class_name(AttackerClass c) {
  switch (c) {
    case AttackerClass::MemorySafe: return "memory-safe";
    case AttackerClass::ReadOnly: return "read-only";
    case AttackerClass::MemoryUnsafe: return "memory-unsafe";
    case AttackerClass::Speculative: return "speculative";
    case AttackerClass::ParallelReadOnly: return "parallel-read-only";
  }
  return "?";
}

AttackerClass parse_class(const std::string& s) {
  if (s == "memory-safe") return AttackerClass::MemorySafe;
  if (s == "read-only") return AttackerClass::ReadOnly;
  if (s == "memory-unsafe") return AttackerClass::MemoryUnsafe;
  if (s == "speculative") return AttackerClass::Speculative;
  if (s == "parallel-read-only") return AttackerClass::ParallelReadOnly;
  throw Error(ErrKind::Parse, "unknown attacker model '" + s + "'");
}

bool trace_satisfies(AttackerClass cls, const sem::Trace& t) {
  // Only the application's own actions are restricted; lib segments are
  // never inspected.
  for (const auto& e : t.events) {
    if (e.domain != sem::Domain::App) continue;
    switch (cls) {
      case AttackerClass::MemorySafe:
        if (e.kind == sem::Ev::OobRead || e.kind == sem::Ev::OobWrite)
          return false;
        break;
      case AttackerClass::ReadOnly:
      case AttackerClass::ParallelReadOnly:
        if (e.kind == sem::Ev::OobWrite) return false;
        break;
      case AttackerClass::MemoryUnsafe:
      case AttackerClass::Speculative:
        break;
    }
  }
  return true;
}

bool is_attacker(const Module& e, AttackerClass cls,
                 const std::vector<Module>& probes,
                 const std::vector<uint64_t>& seeds) {
  for (const auto& probe : probes) {
    ir::WholeProgram w = ir::link(probe, e);
    for (uint64_t s : seeds) {
      sem::Trace t = sem::traces(w, sem::make_initial_state(w, s));
      if (!trace_satisfies(cls, t)) return false;
    }
  }
  return true;
}

namespace {

Instruction mk_const(const std::string& dst, uint64_t v) {
  Instruction i;
  i.op = Op::Const;
  i.dst = dst;
  i.lit = v;
  return i;
}

Instruction mk_binop(const std::string& dst, ir::BinOp op, Operand a, Operand b) {
  Instruction i;
  i.op = Op::Binop;
  i.dst = dst;
  i.bop = op;
  i.a = a;
  i.b = b;
  return i;
}

Instruction mk_load(const std::string& dst, const std::string& buf, Operand idx) {
  Instruction i;
  i.op = Op::Load;
  i.dst = dst;
  i.buf = buf;
  i.index = idx;
  return i;
}

Instruction mk_store(const std::string& buf, Operand idx, Operand src) {
  Instruction i;
  i.op = Op::Store;
  i.buf = buf;
  i.index = idx;
  i.b = src;
  return i;
}

Instruction mk_raw_load(const std::string& dst, Operand addr) {
  Instruction i;
  i.op = Op::Load;
  i.dst = dst;
  i.index = addr;
  return i;
}

Instruction mk_raw_store(Operand addr, Operand src) {
  Instruction i;
  i.op = Op::Store;
  i.index = addr;
  i.b = src;
  return i;
}

Instruction mk_call(const std::string& dst, const std::string& callee,
                    std::vector<Operand> args) {
  Instruction i;
  i.op = Op::Call;
  i.callee = callee;
  i.args = std::move(args);
  if (!dst.empty()) {
    i.dst = dst;
    i.has_dst = true;
  }
  return i;
}

Instruction mk_ret() {
  Instruction i;
  i.op = Op::Ret;
  return i;
}

Instruction mk_if(Operand cond, std::vector<Instruction> then_blk,
                  std::vector<Instruction> else_blk = {}) {
  Instruction i;
  i.op = Op::If;
  i.a = cond;
  i.blk_a = std::move(then_blk);
  i.blk_b = std::move(else_blk);
  return i;
}

Instruction mk_loop(const std::string& counter, uint64_t bound,
                    std::vector<Instruction> body) {
  Instruction i;
  i.op = Op::Loop;
  i.counter = counter;
  i.bound = bound;
  i.blk_a = std::move(body);
  return i;
}

std::string arg_buf_name(const std::string& fn, const std::string& param) {
  return "a_" + fn + "_" + param;
}

// Shared scaffolding: the attacker's own buffers (one per Γ buffer param,
// plus an output buffer) and locals.
Function make_main_shell(const Module& gd) {
  Function f;
  f.name = "main";
  f.label = FnLabel::App;
  f.buffers.push_back({"out", 8, ir::Region::Unprotected});
  for (const auto& [fn, sig] : gd.api)
    for (const auto& p : sig.params)
      if (p.is_buffer)
        f.buffers.push_back({arg_buf_name(fn, p.name), p.len,
                             ir::Region::Unprotected});
  f.locals = {"t", "u", "i"};
  return f;
}

std::vector<Operand> call_args_for(const Module& gd, const std::string& fn,
                                   SplitMix64& rng) {
  std::vector<Operand> args;
  for (const auto& p : gd.api.at(fn).params) {
    if (p.is_buffer)
      args.push_back(Operand::name(arg_buf_name(fn, p.name)));
    else
      args.push_back(Operand::literal(rng.below(16)));
  }
  return args;
}

// Value-to-trace sink: leak t through a branch or an address.
void append_sink(std::vector<Instruction>& body, SplitMix64& rng) {
  if (rng.chance(1, 2)) {
    body.push_back(mk_binop("u", ir::BinOp::And, Operand::name("t"),
                            Operand::literal(1)));
    body.push_back(mk_if(Operand::name("u"),
                         {mk_store("out", Operand::literal(0),
                                   Operand::name("t"))}));
  } else {
    body.push_back(mk_binop("u", ir::BinOp::And, Operand::name("t"),
                            Operand::literal(7)));
    body.push_back(mk_store("out", Operand::name("u"), Operand::literal(1)));
  }
}

// Targeted template: exercise the whole API, then dump the app-stack address
// range where lib frames (and their residue) live.
Module make_stack_sweep_attacker(const Module& gd) {
  Module m;
  m.api = gd.api;
  Function f = make_main_shell(gd);
  SplitMix64 rng(7);
  for (const auto& [fn, sig] : gd.api)
    for (const auto& p : sig.params)
      if (p.is_buffer)
        f.body.push_back(mk_loop(
            "i", p.len,
            {mk_store(arg_buf_name(fn, p.name), Operand::name("i"),
                      Operand::name("i"))}));
  for (const auto& [fn, sig] : gd.api)
    f.body.push_back(mk_call("t", fn, call_args_for(gd, fn, rng)));
  f.body.push_back(mk_loop(
      "i", 512,
      {mk_binop("u", ir::BinOp::Add, Operand::name("i"),
                Operand::literal(ir::kAppStackBase)),
       mk_raw_load("t", Operand::name("u"))}));
  f.body.push_back(mk_ret());
  m.functions.emplace("main", std::move(f));
  return m;
}

Module make_random_attacker(const Module& gd, AttackerClass cls, uint64_t idx,
                            SplitMix64& rng) {
  Module m;
  m.api = gd.api;
  Function f = make_main_shell(gd);
  auto& body = f.body;
  body.push_back(mk_const("t", idx));  // distinguishes same-shape programs

  bool raw_reads = cls != AttackerClass::MemorySafe;
  bool raw_writes = cls == AttackerClass::MemoryUnsafe;

  // Setup writes into own memory, including the argument buffers the library
  // will read.
  uint64_t setup = rng.below(3);
  for (uint64_t k = 0; k < setup; ++k)
    body.push_back(mk_store("out", Operand::literal(rng.below(8)),
                            Operand::literal(rng.below(64))));
  for (const auto& [fn, sig] : gd.api)
    for (const auto& p : sig.params)
      if (p.is_buffer && rng.chance(2, 3)) {
        uint64_t writes = 1 + rng.below(3);
        for (uint64_t k = 0; k < writes; ++k)
          body.push_back(mk_store(arg_buf_name(fn, p.name),
                                  Operand::literal(rng.below(p.len)),
                                  Operand::literal(rng.below(256))));
      }

  if (raw_writes && rng.chance(1, 2)) {
    // Corrupt some unprotected cell before the library ever runs.
    body.push_back(mk_raw_store(Operand::literal(rng.below(ir::kProtBase)),
                                Operand::literal(rng.next())));
  }

  std::vector<std::string> api_names;
  for (const auto& [fn, sig] : gd.api) api_names.push_back(fn);

  uint64_t calls = 1 + rng.below(std::min<uint64_t>(3, api_names.size() + 1));
  for (uint64_t c = 0; c < calls && !api_names.empty(); ++c) {
    const std::string& fn = api_names[rng.below(api_names.size())];
    body.push_back(mk_call("t", fn, call_args_for(gd, fn, rng)));
    append_sink(body, rng);  // the return value is observable
    if (rng.chance(1, 2)) {
      // Scratch-register residue left behind by the call.
      body.push_back(mk_binop("t", ir::BinOp::Or,
                              Operand::sreg((int)(1 + rng.below(7))),
                              Operand::literal(0)));
      append_sink(body, rng);
    }
    if (raw_reads) {
      uint64_t n = rng.below(3);
      for (uint64_t k = 0; k < n; ++k) {
        // OobRead carries the observed value; no sink needed.
        uint64_t addr = rng.chance(1, 8)
                            ? ir::kProtBase + rng.below(256)  // faults the run
                            : rng.below(4096);
        body.push_back(mk_raw_load("t", Operand::literal(addr)));
      }
      if (rng.chance(1, 2)) {
        // Short residue sweep above the app frame.
        body.push_back(mk_loop(
            "i", 32 + rng.below(96),
            {mk_binop("u", ir::BinOp::Add, Operand::name("i"),
                      Operand::literal(ir::kAppStackBase + rng.below(256))),
             mk_raw_load("t", Operand::name("u"))}));
        append_sink(body, rng);
      }
    }
    if (raw_writes && rng.chance(1, 3)) {
      body.push_back(mk_raw_store(Operand::literal(rng.below(ir::kProtBase)),
                                  Operand::name("t")));
    }
  }

  if (cls == AttackerClass::Speculative) {
    // A bounds-check gadget whose misprediction window the speculator can
    // open.
    body.push_back(mk_binop("u", ir::BinOp::And, Operand::name("t"),
                            Operand::literal(15)));
    body.push_back(mk_binop("i", ir::BinOp::Lt, Operand::name("u"),
                            Operand::literal(8)));
    body.push_back(mk_if(Operand::name("i"),
                         {mk_load("t", "out", Operand::name("u"))}));
  }
  body.push_back(mk_ret());
  m.functions.emplace("main", std::move(f));
  return m;
}

}  // namespace

Module make_identity_probe(const Module& gd) {
  Module m;
  m.api = gd.api;
  m.secrets = gd.secrets;
  for (const auto& [fn, sig] : gd.api) {
    Function f;
    f.name = fn;
    f.label = FnLabel::Lib;
    f.params = sig.params;
    f.declassified = sig.declassified;
    Instruction r;
    r.op = Op::Ret;
    r.has_ret_val = true;
    r.ret_val = Operand::literal(0);
    f.body.push_back(r);
    m.functions.emplace(fn, std::move(f));
  }
  return m;
}

Module make_touch_probe(const Module& gd) {
  Module m;
  m.api = gd.api;
  m.secrets = gd.secrets;
  for (const auto& [fn, sig] : gd.api) {
    Function f;
    f.name = fn;
    f.label = FnLabel::Lib;
    f.params = sig.params;
    f.declassified = sig.declassified;
    f.locals = {"pi", "pt"};
    for (const auto& [sec, len] : gd.secrets)
      f.body.push_back(mk_loop("pi", len, {mk_load("pt", sec, Operand::name("pi"))}));
    Instruction r;
    r.op = Op::Ret;
    r.has_ret_val = true;
    r.ret_val = Operand::literal(0);
    f.body.push_back(r);
    m.functions.emplace(fn, std::move(f));
  }
  return m;
}

std::vector<Module> generate_attackers(const Module& gd, AttackerClass cls,
                                       uint64_t budget, uint64_t seed) {
  if (budget < 1)
    throw Error(ErrKind::BudgetExceeded, "attacker budget must be >= 1");
  std::vector<Module> out;
  out.reserve(budget);
  SplitMix64 rng(seed ^ 0xa5a5a5a5deadbeefULL);
  if (cls != AttackerClass::MemorySafe) out.push_back(make_stack_sweep_attacker(gd));
  uint64_t idx = 0;
  while (out.size() < budget)
    out.push_back(make_random_attacker(gd, cls, idx++, rng));
  return out;
}

}  // namespace rct::atk
