#include "rct/checker.hpp"

#include <algorithm>

#include "rct/parser.hpp"

namespace rct::chk {

using ir::Module;
using ir::Operand;

std::optional<size_t> find_divergence(const sem::Trace& a, const sem::Trace& b) {
  size_t n = std::min(a.events.size(), b.events.size());
  for (size_t i = 0; i < n; ++i)
    if (a.events[i] != b.events[i]) return i;
  if (a.events.size() != b.events.size()) return n;
  return std::nullopt;
}

ordered_json Verdict::to_json() const {
  ordered_json j;
  j["result"] = secure ? "secure" : "violation";
  j["stats"] = {{"attackers", stats.attackers},
                {"seed_pairs", stats.seed_pairs},
                {"speculators", stats.speculators},
                {"runs", stats.runs}};
  if (witness) {
    ordered_json w;
    w["attacker_src"] = witness->attacker_src;
    w["seeds"] = {witness->seed_a, witness->seed_b};
    if (witness->speculator) {
      ordered_json sp = ordered_json::array();
      for (const auto& t : *witness->speculator)
        sp.push_back({t.site, t.occurrence, t.window});
      w["speculator"] = sp;
    } else {
      w["speculator"] = nullptr;
    }
    w["divergence"] = {{"index", witness->divergence.index},
                       {"lhs", witness->divergence.lhs},
                       {"rhs", witness->divergence.rhs}};
    j["witness"] = w;
  }
  return j;
}

namespace {

Divergence describe_divergence(const sem::Trace& a, const sem::Trace& b,
                               size_t idx) {
  Divergence d;
  d.index = idx;
  d.lhs = idx < a.events.size() ? a.events[idx].str() : "<end>";
  d.rhs = idx < b.events.size() ? b.events[idx].str() : "<end>";
  return d;
}

struct FoundDivergence {
  Divergence div;
  std::optional<std::vector<spec::Speculator::Trigger>> script;
};

// One attacker against one seed pair, across the model's speculators.
std::optional<FoundDivergence> check_one(const Module& lib, const Module& app,
                                         const atk::AttackerModel& model,
                                         uint64_t sa, uint64_t sb,
                                         Stats* stats) {
  ir::WholeProgram w = ir::link(lib, app);
  sem::RunConfig cfg;
  if (model.cls == atk::AttackerClass::ParallelReadOnly) {
    cfg.parallel_observer = true;
    cfg.snapshot_budget = model.schedule_budget;
  }
  std::vector<spec::Speculator> sps;
  if (model.cls == atk::AttackerClass::Speculative)
    sps = spec::enumerate_speculators(model.speculators, w);
  else
    sps.push_back(spec::Speculator::never());

  sem::Machine ma = sem::make_initial_state(w, sa);
  sem::Machine mb = sem::make_initial_state(w, sb);
  for (const auto& sp : sps) {
    sem::Runner ra(w, cfg, &sp), rb(w, cfg, &sp);
    sem::Trace ta = sem::observable_projection(ra.run(ma).trace);
    sem::Trace tb = sem::observable_projection(rb.run(mb).trace);
    if (stats) stats->runs += 2;
    if (auto idx = find_divergence(ta, tb)) {
      FoundDivergence f;
      f.div = describe_divergence(ta, tb, *idx);
      if (model.cls == atk::AttackerClass::Speculative)
        f.script = sp.script;
      return f;
    }
  }
  return std::nullopt;
}

// Greedy instruction deletion while the divergence persists.
Module minimize_attacker(const Module& lib, Module app,
                         const atk::AttackerModel& model, uint64_t sa,
                         uint64_t sb) {
  bool changed = true;
  while (changed) {
    changed = false;
    ir::Function& mainf = app.functions.at("main");
    for (size_t i = 0; i < mainf.body.size(); ++i) {
      Module candidate = app;
      auto& body = candidate.functions.at("main").body;
      body.erase(body.begin() + (long)i);
      try {
        ir::validate_module(candidate);
        if (check_one(lib, candidate, model, sa, sb, nullptr)) {
          app = std::move(candidate);
          changed = true;
          break;
        }
      } catch (const ir::Error&) {
        // deletion broke the program; keep the instruction
      }
    }
  }
  return app;
}

}  // namespace

ir::Module make_benign_driver(const Module& gd) {
  Module shell;
  shell.api = gd.api;
  ir::Function f;
  f.name = "main";
  f.label = ir::FnLabel::App;
  f.locals = {"t", "i"};
  f.buffers.push_back({"res", 8, ir::Region::Unprotected});
  for (const auto& [fn, sig] : gd.api)
    for (const auto& p : sig.params)
      if (p.is_buffer)
        f.buffers.push_back({"d_" + fn + "_" + p.name, p.len,
                             ir::Region::Unprotected});
  uint64_t slot = 0;
  for (const auto& [fn, sig] : gd.api) {
    // Deterministically initialize every argument buffer, then call.
    for (const auto& p : sig.params) {
      if (!p.is_buffer) continue;
      ir::Instruction fill;
      fill.op = ir::Op::Loop;
      fill.counter = "i";
      fill.bound = p.len;
      ir::Instruction st;
      st.op = ir::Op::Store;
      st.buf = "d_" + fn + "_" + p.name;
      st.index = Operand::name("i");
      st.b = Operand::name("i");
      fill.blk_a.push_back(st);
      f.body.push_back(fill);
    }
    ir::Instruction call;
    call.op = ir::Op::Call;
    call.callee = fn;
    call.has_dst = true;
    call.dst = "t";
    for (const auto& p : sig.params) {
      if (p.is_buffer)
        call.args.push_back(Operand::name("d_" + fn + "_" + p.name));
      else
        call.args.push_back(Operand::literal(3));
    }
    f.body.push_back(call);
    ir::Instruction st;
    st.op = ir::Op::Store;
    st.buf = "res";
    st.index = Operand::literal(slot++ % 8);
    st.b = Operand::name("t");
    f.body.push_back(st);
  }
  ir::Instruction ret;
  ret.op = ir::Op::Ret;
  f.body.push_back(ret);
  shell.functions.emplace("main", std::move(f));
  return shell;
}

Verdict classical_ct_check(const Module& lib, const Module& driver,
                           const std::vector<uint64_t>& secret_seeds) {
  Verdict v;
  ir::WholeProgram w = ir::link(lib, driver);
  std::vector<sem::Trace> ts;
  for (uint64_t s : secret_seeds) {
    ts.push_back(sem::observable_projection(
        sem::traces(w, sem::make_initial_state(w, s))));
    v.stats.runs++;
  }
  for (size_t i = 1; i < ts.size(); ++i) {
    if (auto idx = find_divergence(ts[0], ts[i])) {
      v.secure = false;
      Witness wit;
      wit.attacker_src = ir::print_module(driver);
      wit.seed_a = secret_seeds[0];
      wit.seed_b = secret_seeds[i];
      wit.divergence = describe_divergence(ts[0], ts[i], *idx);
      v.witness = std::move(wit);
      return v;
    }
  }
  v.stats.seed_pairs = ts.size() > 1 ? ts.size() - 1 : 0;
  return v;
}

Verdict robust_ct_check(const Module& lib_src, const atk::AttackerModel& model,
                        const CheckOptions& opts) {
  ir::Module lib = ir::split_lib_app(lib_src).first;
  ir::check_library(lib);
  Module gd;
  gd.api = lib.api;
  gd.secrets = lib.secrets;

  std::vector<Module> attackers = atk::generate_attackers(
      gd, model.cls, opts.attacker_budget, opts.generator_seed);

  Verdict v;
  v.stats.seed_pairs = opts.seed_pairs.size();
  for (const auto& attacker : attackers) {
    ++v.stats.attackers;
    for (const auto& [sa, sb] : opts.seed_pairs) {
      auto f = check_one(lib, attacker, model, sa, sb, &v.stats);
      if (!f) continue;
      v.secure = false;
      Module min = attacker;
      if (opts.minimize) {
        min = minimize_attacker(lib, attacker, model, sa, sb);
        f = check_one(lib, min, model, sa, sb, nullptr);
      }
      Witness wit;
      wit.attacker_src = ir::print_module(min);
      wit.seed_a = sa;
      wit.seed_b = sb;
      wit.speculator = f->script;
      wit.divergence = f->div;
      // Witness validity: the reported configuration must reproduce the
      // divergence at the reported index.
      auto again = check_one(lib, min, model, sa, sb, nullptr);
      if (!again || again->div.index != f->div.index)
        throw ir::Error(ir::ErrKind::IllegalInstruction,
                        "witness failed to reproduce");
      v.witness = std::move(wit);
      return v;
    }
  }
  if (model.cls == atk::AttackerClass::Speculative && !attackers.empty()) {
    ir::WholeProgram w = ir::link(lib, attackers.front());
    v.stats.speculators =
        spec::enumerate_speculators(model.speculators, w).size();
  }
  return v;
}

}  // namespace rct::chk
