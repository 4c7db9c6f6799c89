#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rct/costbench.hpp"
#include "rct/parser.hpp"
#include "util.hpp"

using namespace rct;
using atk::AttackerClass;

static bench::SuiteEntry stream_entry() {
  return {"stream", slurp(std::string(RCT_CORPUS_DIR) + "/bench/stream.ir.tmpl")};
}

TEST_CASE("instantiate substitutes every size placeholder") {
  bench::SuiteEntry e = stream_entry();
  ir::Module m = bench::instantiate(e, 64);
  std::string text = ir::print_module(m);
  CHECK(text.find("@N@") == std::string::npos);
  CHECK(text.find("[64]") != std::string::npos);
  CHECK_NOTHROW(ir::link(ir::split_lib_app(m).first, ir::split_lib_app(m).second));
}

TEST_CASE("overhead percentage decreases with data size") {
  bench::BenchReport rep = bench::run_bench(
      {stream_entry()}, {AttackerClass::ReadOnly}, {1, 64, 256});
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].overhead_pct > rep.rows[1].overhead_pct);
  CHECK(rep.rows[1].overhead_pct > rep.rows[2].overhead_pct);
  // Fixed per-call cost: the absolute overhead is size-independent.
  CHECK(rep.rows[0].overhead_cost == rep.rows[1].overhead_cost);
  CHECK(rep.rows[1].overhead_cost == rep.rows[2].overhead_cost);
  CHECK(rep.rows[0].overhead_cost > 0);
  for (const auto& r : rep.rows) {
    CHECK(r.mitigated_cost > r.baseline_cost);
    CHECK(r.model == "read-only");
  }
}

TEST_CASE("memory-safe mitigation is cheap; fences cost more") {
  bench::BenchReport rep = bench::run_bench(
      {stream_entry()},
      {AttackerClass::MemorySafe, AttackerClass::ReadOnly,
       AttackerClass::Speculative},
      {64});
  REQUIRE(rep.rows.size() == 3);
  uint64_t ms = rep.rows[0].overhead_cost;
  uint64_t ro = rep.rows[1].overhead_cost;
  uint64_t sp = rep.rows[2].overhead_cost;
  CHECK(ms < ro);
  CHECK(ro < sp);  // boundary fences add on top of the wrapper
}

TEST_CASE("parallel-read-only never costs less than read-only") {
  for (uint64_t size : {1ull, 32ull, 128ull}) {
    CAPTURE(size);
    bench::BenchReport rep = bench::run_bench(
        {stream_entry()},
        {AttackerClass::ReadOnly, AttackerClass::ParallelReadOnly}, {size});
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[1].overhead_cost >= rep.rows[0].overhead_cost);
  }
}

TEST_CASE("table output is aligned and covers every size") {
  bench::BenchReport rep = bench::run_bench(
      {stream_entry()}, {AttackerClass::ReadOnly}, {1, 64});
  std::string t = rep.table();
  CHECK(t.find("Data size") == 0);
  CHECK(t.find("Median overhead") != std::string::npos);
  CHECK(t.find("IQR") != std::string::npos);
  CHECK(t.find("\n1 ") != std::string::npos);
  CHECK(t.find("\n64 ") != std::string::npos);
  CHECK(t.find("%") != std::string::npos);
}

TEST_CASE("report json is deterministic and carries summary stats") {
  auto run = [] {
    return bench::run_bench({stream_entry()}, {AttackerClass::ReadOnly},
                            {1, 64})
        .to_json()
        .dump();
  };
  std::string j1 = run();
  CHECK(j1 == run());
  auto j = nlohmann::ordered_json::parse(j1);
  CHECK(j["rows"].size() == 2);
  CHECK(j["rows"][0]["library"] == "stream");
  CHECK(j.contains("median_overhead_pct"));
  CHECK(j.contains("iqr_overhead_pct"));
  CHECK(j["median_overhead_pct"].get<double>() > 0.0);
}

TEST_CASE("custom cost model scales the overhead") {
  sem::CostModel expensive;
  expensive.domain_switch = 500;
  bench::BenchReport cheap = bench::run_bench(
      {stream_entry()}, {AttackerClass::ReadOnly}, {64});
  bench::BenchReport dear = bench::run_bench(
      {stream_entry()}, {AttackerClass::ReadOnly}, {64}, expensive);
  CHECK(dear.rows[0].overhead_cost > cheap.rows[0].overhead_cost);
}
