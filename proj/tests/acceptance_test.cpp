// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rct/attackers.hpp"
#include "rct/checker.hpp"
#include "rct/compiler.hpp"
#include "rct/costbench.hpp"
#include "rct/parser.hpp"
#include "rct/rng.hpp"
#include "rct/semantics.hpp"
#include "rct/speculation.hpp"

using namespace rct;
using atk::AttackerClass;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int n, const std::string& name, bool ok, double secs) {
  std::printf("CRITERION %d %-28s %s (%.1fs)\n", n, name.c_str(),
              ok ? "PASS" : "FAIL", secs);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string corpus(const std::string& name) {
  return slurp(std::string(RCT_CORPUS_DIR) + "/" + name);
}

ir::Module load_lib(const std::string& name) {
  return ir::split_lib_app(ir::parse_module(corpus(name))).first;
}

ir::Module gamma_delta(const ir::Module& lib) {
  ir::Module gd;
  gd.api = lib.api;
  gd.secrets = lib.secrets;
  return gd;
}

const std::vector<std::string> kCorpus = {
    "kcopy.ir",   "kcopy_nomemzero.ir", "mac.ir",         "kex_declassify.ir",
    "multi.ir",   "regtrap.ir",         "spectre_table.ir"};

const std::vector<AttackerClass> kModels = {
    AttackerClass::MemorySafe, AttackerClass::ReadOnly,
    AttackerClass::MemoryUnsafe, AttackerClass::Speculative,
    AttackerClass::ParallelReadOnly};

chk::CheckOptions opts_with(uint64_t budget) {
  chk::CheckOptions o;
  o.attacker_budget = budget;
  o.seed_pairs = {{0, 1}, {0, 2}, {1, 2}};
  return o;
}

// ---------------------------------------------------------------------------
// 1. The key-staging example: leaky without zeroization, secure with it.

void criterion1() {
  auto t0 = Clock::now();
  bool ok = true;
  chk::CheckOptions opts = opts_with(500);
  atk::AttackerModel ro;
  ro.cls = AttackerClass::ReadOnly;

  chk::Verdict bad = chk::robust_ct_check(load_lib("kcopy_nomemzero.ir"), ro, opts);
  ok = ok && !bad.secure && bad.witness.has_value();
  if (bad.witness) {
    ok = ok && bad.witness->divergence.lhs.rfind("OOBREAD", 0) == 0;
    ok = ok && bad.witness->divergence.rhs.rfind("OOBREAD", 0) == 0;
    // The observation itself is key-dependent: the two seeds see different
    // values at the same point.
    ok = ok && bad.witness->divergence.lhs != bad.witness->divergence.rhs;
  }

  chk::Verdict good = chk::robust_ct_check(load_lib("kcopy.ir"), ro, opts);
  ok = ok && good.secure && good.stats.attackers == 500 &&
       good.stats.seed_pairs == 3;

  cc::CompileResult fixed =
      cc::compile(load_lib("kcopy_nomemzero.ir"), AttackerClass::ReadOnly);
  ok = ok && chk::robust_ct_check(fixed.lib, ro, opts).secure;

  double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  ok = ok && secs <= 60.0;
  report(1, "motivating-example", ok, secs);
}

// ---------------------------------------------------------------------------
// 2. Every corpus library compiled for a model passes that model's check;
//    several unmitigated libraries demonstrably fail.

void criterion2() {
  auto t0 = Clock::now();
  bool ok = true;
  chk::CheckOptions opts = opts_with(200);
  for (const auto& name : kCorpus) {
    ir::Module lib = load_lib(name);
    for (auto cls : kModels) {
      cc::CompileResult r = cc::compile(lib, cls);
      atk::AttackerModel m;
      m.cls = cls;
      chk::Verdict v = chk::robust_ct_check(r.lib, m, opts);
      if (!v.secure) {
        std::fprintf(stderr, "  mitigated %s under %s: violation\n",
                     name.c_str(), atk::class_name(cls).c_str());
        ok = false;
      }
    }
  }
  // Non-vacuity: at least three unmitigated libraries fail some model.
  int failures = 0;
  const std::vector<std::pair<std::string, AttackerClass>> expected_bad = {
      {"kcopy_nomemzero.ir", AttackerClass::ReadOnly},
      {"regtrap.ir", AttackerClass::MemorySafe},
      {"spectre_table.ir", AttackerClass::Speculative},
      {"kex_declassify.ir", AttackerClass::ParallelReadOnly}};
  for (const auto& [name, cls] : expected_bad) {
    atk::AttackerModel m;
    m.cls = cls;
    if (!chk::robust_ct_check(load_lib(name), m, opts).secure) ++failures;
  }
  ok = ok && failures >= 3;
  double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  ok = ok && secs <= 600.0;
  report(2, "theorem-property-suite", ok, secs);
}

// ---------------------------------------------------------------------------
// 3. Rollback correctness and span deletion over exhaustive speculators.

void criterion3() {
  auto t0 = Clock::now();
  bool ok = true;
  int programs = 0;
  auto model = spec::SpeculatorModel::exhaustive({1, 2}, 1);
  for (const auto& name : {"kcopy.ir", "mac.ir", "multi.ir", "spectre_table.ir"}) {
    ir::Module lib = load_lib(name);
    ir::Module gd = gamma_delta(lib);
    for (auto cls : {AttackerClass::MemorySafe, AttackerClass::ReadOnly,
                     AttackerClass::MemoryUnsafe}) {
      for (const auto& app :
           atk::generate_attackers(gd, cls, 12, 11 + (int)cls)) {
        if (programs >= 100) break;
        ir::WholeProgram w = ir::link(lib, app);
        if (w.num_branch_sites > 4) continue;
        ++programs;
        sem::Machine s = sem::make_initial_state(w, 2);
        sem::Runner seq(w);
        auto base = seq.run(s);
        sem::Trace seq_trace = sem::traces(w, s);
        for (const auto& sp : spec::enumerate_speculators(model, w)) {
          sem::Runner r(w, {}, &sp);
          auto rr = r.run(s);
          if (rr.final_state.mem != base.final_state.mem ||
              rr.final_state.sregs != base.final_state.sregs)
            ok = false;
          sem::Trace st = sem::spec_traces(w, s, sp);
          std::vector<sem::Event> pruned;
          int depth = 0;
          for (const auto& e : st.events) {
            if (e.kind == sem::Ev::SpecStart) { ++depth; continue; }
            if (e.kind == sem::Ev::Rollback) { --depth; continue; }
            if (depth == 0) pruned.push_back(e);
          }
          if (sem::Trace{pruned}.dump() != seq_trace.dump()) ok = false;
        }
      }
    }
  }
  ok = ok && programs == 100;
  report(3, "speculation-correctness", ok,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// ---------------------------------------------------------------------------
// 4. Bounds-checked table lookup: fences are the load-bearing mitigation.

void criterion4() {
  auto t0 = Clock::now();
  ir::Module lib = load_lib("spectre_table.ir");
  chk::CheckOptions opts = opts_with(120);
  atk::AttackerModel m;
  m.cls = AttackerClass::Speculative;

  // Compiled without fences (the read-only plan wraps and relocates but
  // inserts none): the misprediction window still reads secret-derived data.
  cc::CompileResult nofence = cc::compile(lib, AttackerClass::ReadOnly);
  chk::Verdict bad = chk::robust_ct_check(nofence.lib, m, opts);
  bool ok = !bad.secure && bad.witness.has_value();
  if (bad.witness) {
    ok = ok && bad.witness->divergence.lhs.rfind("OOBREAD", 0) == 0;
    ok = ok && bad.witness->speculator.has_value() &&
         !bad.witness->speculator->empty();
  }

  cc::CompileResult fenced = cc::compile(lib, AttackerClass::Speculative);
  ok = ok && chk::robust_ct_check(fenced.lib, m, opts).secure;
  report(4, "spectre-residue", ok,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// ---------------------------------------------------------------------------
// 5. Attacker-model monotonicity on random traces.

void criterion5() {
  auto t0 = Clock::now();
  bool ok = true;
  SplitMix64 rng(424242);
  for (int i = 0; i < 1000; ++i) {
    sem::Trace t;
    uint64_t n = rng.below(14);
    for (uint64_t j = 0; j < n; ++j) {
      sem::Event e;
      e.kind = static_cast<sem::Ev>(rng.below(10));
      e.domain = rng.chance(1, 2) ? sem::Domain::App : sem::Domain::Lib;
      e.addr = rng.below(2048);
      e.value = rng.next();
      t.events.push_back(e);
    }
    bool ms = atk::trace_satisfies(AttackerClass::MemorySafe, t);
    bool ro = atk::trace_satisfies(AttackerClass::ReadOnly, t);
    bool mu = atk::trace_satisfies(AttackerClass::MemoryUnsafe, t);
    if (ms && !ro) ok = false;
    if (ro && !mu) ok = false;
  }
  report(5, "monotonicity", ok,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// ---------------------------------------------------------------------------
// 6. Functional preservation over benign drivers.

// Returns (api return values at lib->app crossings, driver-frame memory).
std::pair<std::vector<uint64_t>, std::vector<uint64_t>> observe(
    const ir::Module& lib, const ir::Module& driver, uint64_t seed) {
  ir::WholeProgram w = ir::link(lib, driver);
  sem::Runner r(w);
  auto rr = r.run(sem::make_initial_state(w, seed));
  sem::Trace t = sem::traces(w, sem::make_initial_state(w, seed));
  std::vector<uint64_t> rets;
  for (const auto& e : t.events)
    if (e.kind == sem::Ev::Ret && e.has_value) rets.push_back(e.value);
  uint64_t frame_len = 0;
  for (const auto& b : driver.functions.at("main").buffers) frame_len += b.len;
  std::vector<uint64_t> frame(
      rr.final_state.mem.begin(),
      rr.final_state.mem.begin() + ir::kAppStackBase + frame_len);
  return {rets, frame};
}

void criterion6() {
  auto t0 = Clock::now();
  bool ok = true;
  for (const auto& name : kCorpus) {
    ir::Module lib = load_lib(name);
    ir::Module gd = gamma_delta(lib);
    // 50 distinct benign drivers per library: memory-safe programs that use
    // only the declared call contract. Programs peeking at scratch-register
    // residue are attackers, not clients — the mitigations change what they
    // see on purpose — so they are filtered out.
    std::vector<ir::Module> drivers;
    for (const auto& d :
         atk::generate_attackers(gd, AttackerClass::MemorySafe, 150, 5)) {
      if (ir::print_module(d).find("%s") != std::string::npos) continue;
      drivers.push_back(d);
      if (drivers.size() == 50) break;
    }
    if (drivers.size() != 50) ok = false;
    for (auto cls : kModels) {
      cc::CompileResult r = cc::compile(lib, cls);
      for (const auto& d : drivers) {
        if (observe(lib, d, 2) != observe(r.lib, d, 2)) {
          std::fprintf(stderr, "  %s under %s: driver output changed\n",
                       name.c_str(), atk::class_name(cls).c_str());
          ok = false;
          break;
        }
      }
    }
  }
  report(6, "functional-preservation", ok,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// ---------------------------------------------------------------------------
// 7. Amortization trend of the wrapper cost.

void criterion7() {
  auto t0 = Clock::now();
  bench::SuiteEntry entry{"stream", corpus("bench/stream.ir.tmpl")};
  std::vector<uint64_t> sizes = {1, 128, 256, 512, 1024, 2048, 4096};
  bool ok = true;
  std::vector<uint64_t> ro_oh, pr_oh;
  for (auto cls : {AttackerClass::ReadOnly, AttackerClass::ParallelReadOnly}) {
    bench::BenchReport rep = bench::run_bench({entry}, {cls}, sizes);
    if (rep.rows.size() != sizes.size()) { ok = false; continue; }
    std::vector<uint64_t> oh;
    for (size_t i = 0; i < rep.rows.size(); ++i) {
      oh.push_back(rep.rows[i].overhead_cost);
      if (i && rep.rows[i].overhead_pct >= rep.rows[i - 1].overhead_pct)
        ok = false;  // strictly decreasing overhead %
    }
    // Per-call overhead stays within 25% of its median across sizes.
    std::vector<uint64_t> sorted = oh;
    std::sort(sorted.begin(), sorted.end());
    double med = (double)sorted[sorted.size() / 2];
    for (uint64_t c : oh)
      if ((double)c < 0.75 * med || (double)c > 1.25 * med) ok = false;
    (cls == AttackerClass::ReadOnly ? ro_oh : pr_oh) = oh;
  }
  for (size_t i = 0; i < sizes.size() && ok; ++i)
    if (pr_oh[i] < ro_oh[i]) ok = false;  // declassify copies never free
  report(7, "overhead-trend", ok,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// ---------------------------------------------------------------------------
// 8. CLI determinism: identical invocations give byte-identical JSON.

std::string capture(const std::string& cmd) {
  FILE* p = popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!p) return {};
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  pclose(p);
  return out;
}

void criterion8() {
  auto t0 = Clock::now();
  std::string bin = std::string(RCT_BIN_DIR) + "/rct";
  std::string cd = std::string(RCT_CORPUS_DIR) + "/";
  // The trace command needs a whole program; stage one in /tmp.
  std::string demo = "/tmp/rct_trace_demo.ir";
  {
    std::ofstream f(demo);
    f << corpus("kcopy.ir")
      << "\nfn app main() { buf d[32]\n buf s[32]\n local t\n"
         " t = call kcopy(d, s)\n return }\n";
  }
  std::vector<std::string> cmds = {
      bin + " check " + cd + "kcopy_nomemzero.ir --model read-only --budget 30 --json",
      bin + " compile " + cd + "kcopy.ir --model speculative --json",
      bin + " bench " + cd + "bench/stream.ir.tmpl --sizes 1,64 --models read-only --json",
      bin + " gen-attackers " + cd + "mac.ir --model read-only --budget 5 --json",
      bin + " trace " + demo + " --seed 2 --json",
  };
  bool ok = true;
  for (const auto& cmd : cmds) {
    std::string a = capture(cmd), b = capture(cmd);
    if (a.empty() || a != b) {
      std::fprintf(stderr, "  nondeterministic or empty: %s\n", cmd.c_str());
      ok = false;
    }
  }
  report(8, "cli-determinism", ok,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  if (g_failures) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
