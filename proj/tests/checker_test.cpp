#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rct/checker.hpp"
#include "rct/parser.hpp"
#include "util.hpp"

using namespace rct;

static sem::Event branch_ev(bool taken) {
  sem::Event e;
  e.kind = sem::Ev::Branch;
  e.taken = taken;
  return e;
}

static sem::Event read_ev(uint64_t addr) {
  sem::Event e;
  e.kind = sem::Ev::Read;
  e.addr = addr;
  return e;
}

TEST_CASE("find_divergence") {
  sem::Trace a{{branch_ev(true), read_ev(3)}};
  CHECK_FALSE(chk::find_divergence(a, a).has_value());
  sem::Trace b{{branch_ev(false), read_ev(3)}};
  CHECK(chk::find_divergence(a, b) == 0);
  sem::Trace c{{branch_ev(true), read_ev(3), read_ev(4)}};
  CHECK(chk::find_divergence(a, c) == 2);  // prefix diverges at shorter length
}

static ir::Module load_lib(const std::string& file) {
  return ir::split_lib_app(ir::parse_module(corpus(file))).first;
}

TEST_CASE("benign driver exercises every api function in-bounds") {
  for (const char* f : {"kcopy.ir", "mac.ir", "multi.ir", "kex_declassify.ir"}) {
    CAPTURE(f);
    ir::Module lib = load_lib(f);
    ir::Module gd;
    gd.api = lib.api;
    gd.secrets = lib.secrets;
    ir::Module driver = chk::make_benign_driver(gd);
    ir::WholeProgram w = ir::link(lib, driver);
    sem::Trace t = sem::traces(w, sem::make_initial_state(w, 2));
    for (const auto& [fn, sig] : lib.api)
      CHECK(t.dump().find("CALL app " + fn) != std::string::npos);
    // Straight-line and in-bounds: no app branches, no Oob events, no fault.
    for (const auto& e : t.events) {
      CHECK(e.kind != sem::Ev::Branch);
      CHECK(e.kind != sem::Ev::OobRead);
      CHECK(e.kind != sem::Ev::OobWrite);
      CHECK(e.kind != sem::Ev::MemFault);
    }
  }
}

TEST_CASE("classical ct: secret branch is a violation at a Branch event") {
  ir::Module lib = ir::parse_module(
      "secret k[4]\napi f()\n"
      "fn lib f() { local t\n t = load k[0]\n"
      " if t { t = 1 } else { t = 2 }\n return 0 }");
  ir::Module gd;
  gd.api = lib.api;
  gd.secrets = lib.secrets;
  chk::Verdict v =
      chk::classical_ct_check(lib, chk::make_benign_driver(gd), {0, 1});
  CHECK_FALSE(v.secure);
  REQUIRE(v.witness.has_value());
  CHECK(v.witness->divergence.lhs.substr(0, 6) == "BRANCH");
  CHECK(v.exit_code() == 1);
}

TEST_CASE("classical ct: secret-indexed load is a violation at a Read event") {
  ir::Module lib = ir::parse_module(
      "secret k[4]\napi f()\n"
      "fn lib f() { buf b[8]\n local t\n t = load k[0]\n"
      " t = and t 7\n t = load b[t]\n return 0 }");
  ir::Module gd;
  gd.api = lib.api;
  gd.secrets = lib.secrets;
  chk::Verdict v =
      chk::classical_ct_check(lib, chk::make_benign_driver(gd), {0, 1});
  CHECK_FALSE(v.secure);
  REQUIRE(v.witness.has_value());
  CHECK(v.witness->divergence.lhs.substr(0, 4) == "READ");
}

TEST_CASE("classical ct: straight-line sum over secrets is secure") {
  ir::Module lib = ir::parse_module(
      "secret k[4]\napi f()\n"
      "fn lib f() { local t u i\n t = 0\n"
      " loop i 4 { u = load k[i]\n t = add t u }\n"
      " t = and t 0\n return t }");
  ir::Module gd;
  gd.api = lib.api;
  gd.secrets = lib.secrets;
  chk::Verdict v =
      chk::classical_ct_check(lib, chk::make_benign_driver(gd), {0, 1, 2});
  CHECK(v.secure);
  CHECK(v.exit_code() == 0);
}

TEST_CASE("kcopy without memzero fails read-only with an OobRead witness") {
  chk::CheckOptions opts;
  opts.attacker_budget = 40;
  atk::AttackerModel model;
  model.cls = atk::AttackerClass::ReadOnly;
  chk::Verdict v =
      chk::robust_ct_check(load_lib("kcopy_nomemzero.ir"), model, opts);
  REQUIRE_FALSE(v.secure);
  REQUIRE(v.witness.has_value());
  CHECK(v.witness->divergence.lhs.substr(0, 7) == "OOBREAD");
  CHECK(v.witness->divergence.rhs.substr(0, 7) == "OOBREAD");
  CHECK(v.witness->divergence.lhs != v.witness->divergence.rhs);
  // The minimized witness still parses and is a valid app module.
  ir::Module min = ir::parse_module(v.witness->attacker_src);
  CHECK(min.functions.count("main") == 1);
}

TEST_CASE("kcopy with memzero passes read-only") {
  chk::CheckOptions opts;
  opts.attacker_budget = 40;
  atk::AttackerModel model;
  model.cls = atk::AttackerClass::ReadOnly;
  chk::Verdict v = chk::robust_ct_check(load_lib("kcopy.ir"), model, opts);
  CHECK(v.secure);
  CHECK(v.stats.attackers == 40);
  CHECK_FALSE(v.witness.has_value());
}

TEST_CASE("library never touching secrets is secure under every model") {
  ir::Module lib = ir::parse_module(
      "secret k[4]\napi f(x: val)\n"
      "fn lib f(x: val) { local t\n t = add x 1\n return t }");
  chk::CheckOptions opts;
  opts.attacker_budget = 15;
  for (auto cls : {atk::AttackerClass::MemorySafe, atk::AttackerClass::ReadOnly,
                   atk::AttackerClass::MemoryUnsafe,
                   atk::AttackerClass::Speculative,
                   atk::AttackerClass::ParallelReadOnly}) {
    CAPTURE(atk::class_name(cls));
    atk::AttackerModel model;
    model.cls = cls;
    CHECK(chk::robust_ct_check(lib, model, opts).secure);
  }
}

TEST_CASE("anti-monotonicity: read-only failure persists upward") {
  ir::Module lib = load_lib("kcopy_nomemzero.ir");
  chk::CheckOptions opts;
  opts.attacker_budget = 40;
  for (auto cls :
       {atk::AttackerClass::ReadOnly, atk::AttackerClass::MemoryUnsafe,
        atk::AttackerClass::Speculative, atk::AttackerClass::ParallelReadOnly}) {
    CAPTURE(atk::class_name(cls));
    atk::AttackerModel model;
    model.cls = cls;
    CHECK_FALSE(chk::robust_ct_check(lib, model, opts).secure);
  }
}

TEST_CASE("verdict json is deterministic and carries the manifest fields") {
  chk::CheckOptions opts;
  opts.attacker_budget = 40;
  atk::AttackerModel model;
  model.cls = atk::AttackerClass::ReadOnly;
  ir::Module lib = load_lib("kcopy_nomemzero.ir");
  auto j1 = chk::robust_ct_check(lib, model, opts).to_json().dump();
  auto j2 = chk::robust_ct_check(lib, model, opts).to_json().dump();
  CHECK(j1 == j2);
  auto j = chk::robust_ct_check(lib, model, opts).to_json();
  CHECK(j["result"] == "violation");
  CHECK(j["witness"]["seeds"].size() == 2);
  CHECK(j["witness"]["divergence"].contains("index"));
}

TEST_CASE("speculative witness records its speculator script") {
  chk::CheckOptions opts;
  opts.attacker_budget = 60;
  atk::AttackerModel model;
  model.cls = atk::AttackerClass::Speculative;
  chk::Verdict v =
      chk::robust_ct_check(load_lib("spectre_table.ir"), model, opts);
  REQUIRE_FALSE(v.secure);
  REQUIRE(v.witness.has_value());
  REQUIRE(v.witness->speculator.has_value());
  CHECK_FALSE(v.witness->speculator->empty());
}
