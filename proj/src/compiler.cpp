#include "rct/compiler.hpp"

#include <functional>

#include "rct/checker.hpp"

namespace rct::cc {

using ir::Function;
using ir::Instruction;
using ir::Module;
using ir::Op;
using ir::Operand;

Taint TaintMap::of(const std::string& fn, const std::string& name) const {
  auto fit = per_fn.find(fn);
  if (fit == per_fn.end()) return Taint::Public;
  auto nit = fit->second.find(name);
  return nit == fit->second.end() ? Taint::Public : nit->second;
}

ordered_json TaintMap::to_json() const {
  ordered_json j = ordered_json::object();
  for (const auto& [fn, names] : per_fn) {
    ordered_json f = ordered_json::object();
    for (const auto& [n, t] : names)
      f[n] = t == Taint::Secret ? "secret" : "public";
    j[fn] = f;
  }
  return j;
}

namespace {

constexpr const char* kRet = "$ret";

struct TaintCtx {
  const Module& m;
  TaintMap& tm;
  bool changed = false;

  bool mark(const std::string& fn, const std::string& name) {
    Taint& t = tm.per_fn[fn].try_emplace(name, Taint::Public).first->second;
    if (t == Taint::Secret) return false;
    t = Taint::Secret;
    changed = true;
    return true;
  }
  bool secret_operand(const std::string& fn, const Operand& o) {
    switch (o.k) {
      case Operand::K::Lit:
        return false;
      case Operand::K::Reg:
        return true;  // registers may hold residue; no under-tainting
      case Operand::K::Var:
        return tm.of(fn, o.var) == Taint::Secret;
    }
    return true;
  }

  void block(const std::string& fn, const std::vector<Instruction>& blk) {
    for (const auto& ins : blk) instr(fn, ins);
  }

  void instr(const std::string& fn, const Instruction& ins) {
    switch (ins.op) {
      case Op::Const:
        break;
      case Op::Binop:
        if (secret_operand(fn, ins.a) || secret_operand(fn, ins.b))
          mark(fn, ins.dst);
        break;
      case Op::Load:
        if (ins.buf.empty()) {
          mark(fn, ins.dst);  // raw load: could alias anything
        } else if (tm.of(fn, ins.buf) == Taint::Secret ||
                   secret_operand(fn, ins.index)) {
          mark(fn, ins.dst);
        }
        break;
      case Op::Store:
        if (!ins.buf.empty() &&
            (secret_operand(fn, ins.b) || secret_operand(fn, ins.index)))
          mark(fn, ins.buf);
        break;
      case Op::If:
        block(fn, ins.blk_a);
        block(fn, ins.blk_b);
        break;
      case Op::Loop:
        block(fn, ins.blk_a);
        break;
      case Op::Call: {
        auto cit = m.functions.find(ins.callee);
        if (cit == m.functions.end()) break;
        const Function& callee = cit->second;
        for (size_t i = 0; i < ins.args.size() && i < callee.params.size();
             ++i) {
          const auto& p = callee.params[i];
          const auto& a = ins.args[i];
          if (secret_operand(fn, a)) mark(ins.callee, p.name);
          // Buffer arguments flow both ways through the call.
          if (p.is_buffer && a.k == Operand::K::Var &&
              tm.of(ins.callee, p.name) == Taint::Secret)
            mark(fn, a.var);
        }
        if (ins.has_dst && tm.of(ins.callee, kRet) == Taint::Secret)
          mark(fn, ins.dst);
        break;
      }
      case Op::Ret:
        if (ins.has_ret_val && secret_operand(fn, ins.ret_val)) mark(fn, kRet);
        break;
      case Op::Memzero:
      case Op::Fence:
      case Op::ClearScratch:
      case Op::Pkru:
      case Op::StackSwitch:
        break;
    }
  }
};

}  // namespace

TaintMap taint_analysis(const Module& lib) {
  TaintMap tm;
  for (const auto& [fn, f] : lib.functions) {
    auto& names = tm.per_fn[fn];
    for (const auto& p : f.params) names.emplace(p.name, Taint::Public);
    for (const auto& l : f.locals) names.emplace(l, Taint::Public);
    for (const auto& b : f.buffers) names.emplace(b.name, Taint::Public);
    // Δ buffers are secret wherever visible.
    for (const auto& [s, len] : lib.secrets) names[s] = Taint::Secret;
  }
  TaintCtx ctx{lib, tm};
  do {
    ctx.changed = false;
    for (const auto& [fn, f] : lib.functions) ctx.block(fn, f.body);
  } while (ctx.changed);
  return tm;
}

size_t MitigationPlan::action_count() const {
  return (clear_scratch ? 1 : 0) + (wrap ? 1 : 0) + (fence_boundary ? 1 : 0) +
         (fence_branches ? 1 : 0) + relocate.size() + zeroize.size() +
         copy_buffers.size();
}

ordered_json MitigationPlan::to_json() const {
  auto pairs = [](const std::set<std::pair<std::string, std::string>>& s) {
    ordered_json a = ordered_json::array();
    for (const auto& [fn, n] : s) a.push_back({fn, n});
    return a;
  };
  ordered_json j;
  j["model"] = atk::class_name(model);
  j["clear_scratch"] = clear_scratch;
  j["wrap"] = wrap;
  j["fence_boundary"] = fence_boundary;
  j["fence_branches"] = fence_branches;
  j["relocate"] = pairs(relocate);
  j["zeroize"] = pairs(zeroize);
  j["copy_buffers"] = pairs(copy_buffers);
  j["action_count"] = action_count();
  return j;
}

MitigationPlan plan(const Module& lib, const TaintMap& taint,
                    atk::AttackerClass model) {
  using C = atk::AttackerClass;
  MitigationPlan p;
  p.model = model;
  p.clear_scratch = true;
  if (model == C::MemorySafe) return p;

  p.wrap = true;
  for (const auto& [fn, f] : lib.functions) {
    for (const auto& b : f.buffers) {
      if (!taint.is_secret(fn, b.name)) continue;
      if (b.hint == ir::Region::Unprotected) p.relocate.emplace(fn, b.name);
      p.zeroize.emplace(fn, b.name);
    }
  }
  if (model == C::Speculative) {
    p.fence_boundary = true;
    p.fence_branches = true;
  }
  if (model == C::ParallelReadOnly) {
    for (const auto& [fn, sig] : lib.api)
      for (const auto& d : sig.declassified) p.copy_buffers.emplace(fn, d);
  }
  return p;
}

namespace {

// Ensures a trailing explicit return so before-return insertions apply.
void ensure_explicit_ret(Function& f) {
  if (f.body.empty() || f.body.back().op != Op::Ret) {
    Instruction r;
    r.op = Op::Ret;
    f.body.push_back(r);
  }
}

void insert_before_rets(std::vector<Instruction>& blk,
                        const std::vector<Instruction>& prefix) {
  for (size_t i = 0; i < blk.size(); ++i) {
    Instruction& ins = blk[i];
    if (ins.op == Op::If) {
      insert_before_rets(ins.blk_a, prefix);
      insert_before_rets(ins.blk_b, prefix);
    } else if (ins.op == Op::Loop) {
      insert_before_rets(ins.blk_a, prefix);
    } else if (ins.op == Op::Ret) {
      blk.insert(blk.begin() + (long)i, prefix.begin(), prefix.end());
      i += prefix.size();
    }
  }
}

void fence_arms(std::vector<Instruction>& blk) {
  for (auto& ins : blk) {
    if (ins.op == Op::If) {
      fence_arms(ins.blk_a);
      fence_arms(ins.blk_b);
      Instruction f;
      f.op = Op::Fence;
      ins.blk_a.insert(ins.blk_a.begin(), f);
      ins.blk_b.insert(ins.blk_b.begin(), f);
    } else if (ins.op == Op::Loop) {
      fence_arms(ins.blk_a);
    }
  }
}

void retarget_calls(std::vector<Instruction>& blk,
                    const std::map<std::string, std::string>& renames) {
  for (auto& ins : blk) {
    if (ins.op == Op::Call) {
      auto it = renames.find(ins.callee);
      if (it != renames.end()) ins.callee = it->second;
    } else if (ins.op == Op::If) {
      retarget_calls(ins.blk_a, renames);
      retarget_calls(ins.blk_b, renames);
    } else if (ins.op == Op::Loop) {
      retarget_calls(ins.blk_a, renames);
    }
  }
}

Instruction mk_simple(Op op, bool flag = false) {
  Instruction i;
  i.op = op;
  i.flag = flag;
  return i;
}

std::vector<Instruction> copy_loop(const std::string& from,
                                   const std::string& to, uint32_t len) {
  Instruction ld;
  ld.op = Op::Load;
  ld.dst = "wt";
  ld.buf = from;
  ld.index = Operand::name("wi");
  Instruction st;
  st.op = Op::Store;
  st.buf = to;
  st.index = Operand::name("wi");
  st.b = Operand::name("wt");
  Instruction lp;
  lp.op = Op::Loop;
  lp.counter = "wi";
  lp.bound = len;
  lp.blk_a = {ld, st};
  return {lp};
}

}  // namespace

Module relocate_and_zeroize(const Module& lib, const MitigationPlan& p) {
  Module out = lib;
  for (auto& [name, f] : out.functions) {
    for (auto& b : f.buffers)
      if (p.relocate.count({name, b.name})) b.hint = ir::Region::Protected;

    std::vector<Instruction> prefix;
    for (const auto& b : f.buffers) {
      if (!p.zeroize.count({name, b.name})) continue;
      Instruction mz;
      mz.op = Op::Memzero;
      mz.dst = b.name;
      prefix.push_back(mz);
    }
    if (!prefix.empty() && p.fence_branches)
      prefix.push_back(mk_simple(Op::Fence));
    if (p.clear_scratch && !p.wrap && lib.api.count(name))
      prefix.push_back(mk_simple(Op::ClearScratch));
    if (!prefix.empty()) {
      ensure_explicit_ret(f);
      insert_before_rets(f.body, prefix);
    }
    if (p.fence_branches) fence_arms(f.body);
  }
  return out;
}

Module wrap_api(const Module& lib, const MitigationPlan& p) {
  Module out = lib;
  std::map<std::string, std::string> renames;
  for (const auto& [fn, sig] : out.api) {
    if (out.functions.count(fn + "__clone"))
      throw ir::Error(ir::ErrKind::AlreadyWrapped,
                      "'" + fn + "' is already wrapped");
    renames[fn] = fn + "__clone";
  }
  // Move every Γ body into its clone; private functions keep their names but
  // their calls into Γ must hit the clones (no recursive domain switches).
  std::map<std::string, Function> wrapped;
  for (auto& [name, f] : out.functions) {
    auto rit = renames.find(name);
    if (rit == renames.end()) {
      retarget_calls(f.body, renames);
      wrapped.emplace(name, std::move(f));
      continue;
    }
    Function clone = std::move(f);
    clone.name = rit->second;
    clone.declassified.clear();
    retarget_calls(clone.body, renames);
    wrapped.emplace(rit->second, std::move(clone));

    Function w;
    w.name = name;
    w.label = ir::FnLabel::Lib;
    w.params = out.api.at(name).params;
    w.declassified = out.api.at(name).declassified;
    w.locals = {"wret", "wi", "wt"};
    std::vector<std::pair<std::string, uint32_t>> copies;
    for (const auto& prm : w.params)
      if (prm.is_buffer && p.copy_buffers.count({name, prm.name})) {
        w.buffers.push_back(
            {prm.name + "__copy", prm.len, ir::Region::Protected});
        copies.emplace_back(prm.name, prm.len);
      }

    auto& b = w.body;
    b.push_back(mk_simple(Op::Pkru, true));
    if (p.fence_boundary) b.push_back(mk_simple(Op::Fence));
    b.push_back(mk_simple(Op::StackSwitch, true));
    for (const auto& [prm, len] : copies)
      for (auto& ins : copy_loop(prm, prm + "__copy", len)) b.push_back(ins);
    Instruction call;
    call.op = Op::Call;
    call.callee = rit->second;
    call.has_dst = true;
    call.dst = "wret";
    for (const auto& prm : w.params) {
      bool copied = false;
      for (const auto& [cp, len] : copies) copied = copied || cp == prm.name;
      call.args.push_back(Operand::name(copied ? prm.name + "__copy" : prm.name));
    }
    b.push_back(call);
    for (const auto& [prm, len] : copies)
      for (auto& ins : copy_loop(prm + "__copy", prm, len)) b.push_back(ins);
    if (p.clear_scratch) b.push_back(mk_simple(Op::ClearScratch));
    b.push_back(mk_simple(Op::StackSwitch, false));
    if (p.fence_boundary) b.push_back(mk_simple(Op::Fence));
    b.push_back(mk_simple(Op::Pkru, false));
    Instruction ret;
    ret.op = Op::Ret;
    ret.has_ret_val = true;
    ret.ret_val = Operand::name("wret");
    b.push_back(ret);

    wrapped.emplace(name, std::move(w));
  }
  out.functions = std::move(wrapped);
  return out;
}

CompileResult compile(const Module& lib, atk::AttackerClass model) {
  ir::check_library(lib);

  Module gd;
  gd.api = lib.api;
  gd.secrets = lib.secrets;
  chk::Verdict ct =
      chk::classical_ct_check(lib, chk::make_benign_driver(gd), {0, 1, 2});
  if (!ct.secure) {
    std::string msg = "library is not classically constant-time";
    if (ct.witness)
      msg += ": divergence at event " +
             std::to_string(ct.witness->divergence.index) + " (" +
             ct.witness->divergence.lhs + " vs " + ct.witness->divergence.rhs +
             ")";
    throw ir::Error(ir::ErrKind::NotClassicallyCT, msg);
  }

  CompileResult r;
  r.taint = taint_analysis(lib);
  r.plan = plan(lib, r.taint, model);
  r.lib = relocate_and_zeroize(lib, r.plan);
  if (r.plan.wrap) r.lib = wrap_api(r.lib, r.plan);
  ir::check_library(r.lib);

  r.report = ordered_json();
  r.report["model"] = atk::class_name(model);
  r.report["plan"] = r.plan.to_json();
  r.report["taint"] = r.taint.to_json();
  return r;
}

}  // namespace rct::cc
