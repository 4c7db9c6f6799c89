#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rct/attackers.hpp"
#include "rct/ir.hpp"
#include "rct/semantics.hpp"

namespace rct::bench {

using ordered_json = nlohmann::ordered_json;

// A size-parameterized library + driver source: `@N@` in the template text is
// replaced by the data size before parsing. The module must contain its own
// app `main` driver.
struct SuiteEntry {
  std::string name;
  std::string template_text;
};

struct Row {
  std::string library;
  std::string model;  // "baseline" rows carry model = "-"
  uint64_t size = 0;
  uint64_t baseline_cost = 0;
  uint64_t mitigated_cost = 0;
  double overhead_pct = 0.0;       // (mitigated - baseline) / baseline * 100
  uint64_t overhead_cost = 0;      // mitigated - baseline (per call constant)
};

struct BenchReport {
  std::vector<Row> rows;
  double median_overhead_pct = 0.0;
  double iqr_overhead_pct = 0.0;

  ordered_json to_json() const;
  std::string table() const;  // aligned columns: Data size / Median overhead / IQR
};

ir::Module instantiate(const SuiteEntry& e, uint64_t size);

BenchReport run_bench(const std::vector<SuiteEntry>& suite,
                      const std::vector<atk::AttackerClass>& models,
                      const std::vector<uint64_t>& sizes,
                      const sem::CostModel& cost = {});

}  // namespace rct::bench
