#include "rct/ir.hpp"

#include <algorithm>
#include <functional>

namespace rct::ir {

namespace {

struct Scope {
  const Function* fn;
  const Module* mod;
  bool is_lib;

  bool has_scalar(const std::string& n) const {
    for (const auto& p : fn->params)
      if (!p.is_buffer && p.name == n) return true;
    return std::find(fn->locals.begin(), fn->locals.end(), n) != fn->locals.end();
  }
  bool has_buffer(const std::string& n) const {
    for (const auto& p : fn->params)
      if (p.is_buffer && p.name == n) return true;
    for (const auto& b : fn->buffers)
      if (b.name == n) return true;
    return is_lib && mod->secrets.count(n) > 0;
  }
};

void check_operand(const Scope& sc, const Operand& o, int line) {
  switch (o.k) {
    case Operand::K::Lit:
      return;
    case Operand::K::Reg:
      if (o.reg < 0 || o.reg >= kNumScratchRegs)
        throw Error(ErrKind::Scope, "bad register index", line);
      return;
    case Operand::K::Var:
      if (sc.has_scalar(o.var) || sc.has_buffer(o.var)) return;
      throw Error(ErrKind::Scope,
                  "unknown name '" + o.var + "' in " + sc.fn->name, line);
  }
}

void check_dst(const Scope& sc, const std::string& dst, int line) {
  if (!sc.has_scalar(dst))
    throw Error(ErrKind::Scope,
                "'" + dst + "' is not a scalar local/param in " + sc.fn->name,
                line);
}

void check_block(const Scope& sc, const std::vector<Instruction>& blk);

void check_instr(const Scope& sc, const Instruction& ins) {
  switch (ins.op) {
    case Op::Const:
      check_dst(sc, ins.dst, ins.line);
      break;
    case Op::Binop:
      check_dst(sc, ins.dst, ins.line);
      check_operand(sc, ins.a, ins.line);
      check_operand(sc, ins.b, ins.line);
      break;
    case Op::Load:
      check_dst(sc, ins.dst, ins.line);
      [[fallthrough]];
    case Op::Store:
      if (ins.op == Op::Store) check_operand(sc, ins.b, ins.line);
      check_operand(sc, ins.index, ins.line);
      if (!ins.buf.empty() && !sc.has_buffer(ins.buf)) {
        if (sc.is_lib)
          throw Error(ErrKind::UnknownSecret,
                      "unknown buffer '" + ins.buf + "' in lib function " +
                          sc.fn->name,
                      ins.line);
        throw Error(ErrKind::Scope, "unknown buffer '" + ins.buf + "'",
                    ins.line);
      }
      break;
    case Op::If:
      check_operand(sc, ins.a, ins.line);
      check_block(sc, ins.blk_a);
      check_block(sc, ins.blk_b);
      break;
    case Op::Loop:
      if (!sc.has_scalar(ins.counter))
        throw Error(ErrKind::Scope,
                    "loop counter '" + ins.counter + "' is not a local",
                    ins.line);
      check_block(sc, ins.blk_a);
      break;
    case Op::Call: {
      if (ins.has_dst) check_dst(sc, ins.dst, ins.line);
      for (const auto& a : ins.args) check_operand(sc, a, ins.line);
      auto fit = sc.mod->functions.find(ins.callee);
      auto ait = sc.mod->api.find(ins.callee);
      size_t want;
      if (fit != sc.mod->functions.end())
        want = fit->second.params.size();
      else if (ait != sc.mod->api.end())
        want = ait->second.params.size();
      else
        throw Error(ErrKind::Scope, "call to undeclared '" + ins.callee + "'",
                    ins.line);
      if (ins.args.size() != want)
        throw Error(ErrKind::Scope,
                    "call to '" + ins.callee + "' with wrong arity", ins.line);
      if (want > (size_t)kNumScratchRegs)
        throw Error(ErrKind::Scope, "too many arguments", ins.line);
      break;
    }
    case Op::Ret:
      if (ins.has_ret_val) check_operand(sc, ins.ret_val, ins.line);
      break;
    case Op::Memzero:
      if (!sc.has_buffer(ins.dst))
        throw Error(sc.is_lib ? ErrKind::UnknownSecret : ErrKind::Scope,
                    "memzero of unknown buffer '" + ins.dst + "'", ins.line);
      break;
    case Op::Fence:
    case Op::ClearScratch:
    case Op::Pkru:
    case Op::StackSwitch:
      break;
  }
}

void check_block(const Scope& sc, const std::vector<Instruction>& blk) {
  for (const auto& ins : blk) check_instr(sc, ins);
}

void check_function(const Module& m, const Function& f) {
  std::set<std::string> names;
  auto add = [&](const std::string& n) {
    if (!names.insert(n).second)
      throw Error(ErrKind::Scope, "duplicate name '" + n + "' in " + f.name);
  };
  for (const auto& p : f.params) add(p.name);
  for (const auto& l : f.locals) add(l);
  for (const auto& b : f.buffers) {
    add(b.name);
    if (b.len == 0) throw Error(ErrKind::Scope, "zero-length buffer " + b.name);
  }
  for (const auto& d : f.declassified) {
    bool ok = false;
    for (const auto& p : f.params) ok = ok || (p.is_buffer && p.name == d);
    if (!ok)
      throw Error(ErrKind::Scope,
                  "declassified '" + d + "' is not a buffer param of " + f.name);
  }
  Scope sc{&f, &m, f.label == FnLabel::Lib};
  check_block(sc, f.body);
}

}  // namespace

void validate_module(const Module& m) {
  for (const auto& [name, len] : m.secrets)
    if (len == 0) throw Error(ErrKind::Scope, "zero-length secret " + name);
  for (const auto& [name, f] : m.functions) {
    if (f.name != name)
      throw Error(ErrKind::Scope, "function map key mismatch for " + name);
    check_function(m, f);
  }
}

Signature signature_of(const Function& f) {
  return Signature{f.params, f.declassified};
}

bool signatures_match(const Signature& a, const Signature& b) {
  if (a.params.size() != b.params.size()) return false;
  for (size_t i = 0; i < a.params.size(); ++i) {
    const auto& p = a.params[i];
    const auto& q = b.params[i];
    if (p.name != q.name || p.is_buffer != q.is_buffer || p.len != q.len)
      return false;
  }
  return a.declassified == b.declassified;
}

uint32_t buffer_param_len(const Function& f, const std::string& name) {
  for (const auto& p : f.params)
    if (p.is_buffer && p.name == name) return p.len;
  return 0;
}

void check_library(const Module& lib) {
  for (const auto& [name, f] : lib.functions)
    if (f.label != FnLabel::Lib)
      throw Error(ErrKind::NonLibLabel, "function '" + name + "' is not lib-labeled");
  validate_module(lib);
  for (const auto& [name, sig] : lib.api) {
    auto it = lib.functions.find(name);
    if (it == lib.functions.end())
      throw Error(ErrKind::MissingApiFunction,
                  "library does not implement api function '" + name + "'");
    if (!signatures_match(sig, signature_of(it->second)))
      throw Error(ErrKind::SignatureMismatch,
                  "signature mismatch for '" + name + "'");
  }
}

namespace {

void assign_sites(std::vector<Instruction>& blk, int& next) {
  for (auto& ins : blk) {
    if (ins.op == Op::If) {
      ins.site = next++;
      assign_sites(ins.blk_a, next);
      assign_sites(ins.blk_b, next);
    } else if (ins.op == Op::Loop) {
      assign_sites(ins.blk_a, next);
    }
  }
}

constexpr uint64_t kBoundCap = 1ull << 40;

uint64_t block_bound(const Module& m, const std::vector<Instruction>& blk,
                     std::map<std::string, uint64_t>& memo,
                     std::set<std::string>& visiting);

uint64_t fn_bound(const Module& m, const std::string& name,
                  std::map<std::string, uint64_t>& memo,
                  std::set<std::string>& visiting) {
  if (auto it = memo.find(name); it != memo.end()) return it->second;
  if (!visiting.insert(name).second)
    throw Error(ErrKind::LinkError, "recursive call cycle through '" + name + "'");
  const Function& f = m.functions.at(name);
  uint64_t b = 2 + block_bound(m, f.body, memo, visiting);
  visiting.erase(name);
  memo[name] = b;
  return b;
}

uint64_t block_bound(const Module& m, const std::vector<Instruction>& blk,
                     std::map<std::string, uint64_t>& memo,
                     std::set<std::string>& visiting) {
  uint64_t total = 0;
  for (const auto& ins : blk) {
    uint64_t c = 1;
    switch (ins.op) {
      case Op::If:
        c += std::max(block_bound(m, ins.blk_a, memo, visiting),
                      block_bound(m, ins.blk_b, memo, visiting));
        break;
      case Op::Loop:
        c += ins.bound * (1 + block_bound(m, ins.blk_a, memo, visiting));
        break;
      case Op::Call:
        c += fn_bound(m, ins.callee, memo, visiting);
        break;
      default:
        break;
    }
    total += c;
    if (total > kBoundCap) return kBoundCap;
  }
  return total;
}

}  // namespace

std::pair<Module, Module> split_lib_app(const Module& m) {
  Module lib, app;
  lib.api = m.api;
  lib.secrets = m.secrets;
  app.api = m.api;
  for (const auto& [name, f] : m.functions) {
    if (f.label == FnLabel::Lib)
      lib.functions.emplace(name, f);
    else
      app.functions.emplace(name, f);
  }
  return {std::move(lib), std::move(app)};
}

WholeProgram link(const Module& lib, const Module& app) {
  check_library(lib);
  validate_module(app);

  for (const auto& [name, f] : app.functions)
    if (f.label != FnLabel::App)
      throw Error(ErrKind::AppLabeledLib,
                  "application function '" + name + "' is lib-labeled");
  auto mit = app.functions.find("main");
  if (mit == app.functions.end())
    throw Error(ErrKind::LinkError, "application has no 'main'");
  if (!mit->second.params.empty())
    throw Error(ErrKind::LinkError, "'main' must take no parameters");

  // App external calls resolve exactly into Γ.
  std::function<void(const std::vector<Instruction>&)> walk =
      [&](const std::vector<Instruction>& blk) {
        for (const auto& ins : blk) {
          if (ins.op == Op::Call && !app.functions.count(ins.callee)) {
            if (lib.api.count(ins.callee)) continue;
            if (lib.functions.count(ins.callee))
              throw Error(ErrKind::AppCallsPrivate,
                          "application calls private function '" + ins.callee + "'");
            throw Error(ErrKind::UnresolvedCall,
                        "unresolved call '" + ins.callee + "'");
          }
          if (ins.op == Op::If) {
            walk(ins.blk_a);
            walk(ins.blk_b);
          } else if (ins.op == Op::Loop) {
            walk(ins.blk_a);
          }
        }
      };
  for (const auto& [name, f] : app.functions) walk(f.body);

  WholeProgram w;
  w.merged.api = lib.api;
  w.merged.secrets = lib.secrets;
  w.merged.functions = lib.functions;
  for (const auto& [name, f] : app.functions) {
    if (!w.merged.functions.emplace(name, f).second)
      throw Error(ErrKind::LinkError,
                  "function name '" + name + "' defined by both sides");
  }

  // Δ layout: protected region, sorted name order.
  uint64_t addr = kProtBase;
  for (const auto& [name, len] : w.merged.secrets) {
    w.secret_base[name] = addr;
    addr += len;
    if (addr > kMemCells)
      throw Error(ErrKind::LinkError, "secret context exceeds protected region");
  }
  w.prot_stack_base = addr;

  int next_site = 0;
  for (auto& [name, f] : w.merged.functions) assign_sites(f.body, next_site);
  w.num_branch_sites = next_site;

  std::map<std::string, uint64_t> memo;
  std::set<std::string> visiting;
  w.step_bound = fn_bound(w.merged, w.entry, memo, visiting);
  // Validate the merged module once more: app calls now resolve to lib impls.
  validate_module(w.merged);
  return w;
}

}  // namespace rct::ir
