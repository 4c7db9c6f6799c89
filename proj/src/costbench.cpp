#include "rct/costbench.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "rct/compiler.hpp"
#include "rct/parser.hpp"

namespace rct::bench {

ir::Module instantiate(const SuiteEntry& e, uint64_t size) {
  std::string text = e.template_text;
  const std::string key = "@N@";
  const std::string val = std::to_string(size);
  size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), val);
    pos += val.size();
  }
  return ir::parse_module(text);
}

namespace {

uint64_t run_cost(const ir::Module& lib, const ir::Module& app,
                  const sem::CostModel& cost) {
  ir::WholeProgram w = ir::link(lib, app);
  sem::RunConfig cfg;
  cfg.cost = cost;
  sem::Runner r(w, cfg);
  return r.run(sem::make_initial_state(w, 2)).cost;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double idx = q * (double)(v.size() - 1);
  size_t lo = (size_t)idx;
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = idx - (double)lo;
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

ordered_json BenchReport::to_json() const {
  ordered_json j;
  ordered_json rs = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json row;
    row["library"] = r.library;
    row["model"] = r.model;
    row["size"] = r.size;
    row["baseline_cost"] = r.baseline_cost;
    row["mitigated_cost"] = r.mitigated_cost;
    row["overhead_cost"] = r.overhead_cost;
    row["overhead_pct"] = r.overhead_pct;
    rs.push_back(row);
  }
  j["rows"] = rs;
  j["median_overhead_pct"] = median_overhead_pct;
  j["iqr_overhead_pct"] = iqr_overhead_pct;
  return j;
}

std::string BenchReport::table() const {
  // Aggregate per size across libraries and models.
  std::map<uint64_t, std::vector<double>> by_size;
  for (const auto& r : rows) by_size[r.size].push_back(r.overhead_pct);
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s %-18s %-12s\n", "Data size",
                "Median overhead", "IQR");
  os << buf;
  for (const auto& [size, v] : by_size) {
    double med = percentile(v, 0.5);
    double iqr = percentile(v, 0.75) - percentile(v, 0.25);
    std::snprintf(buf, sizeof buf, "%-12llu %-17.2f%% %-11.2f%%\n",
                  (unsigned long long)size, med, iqr);
    os << buf;
  }
  return os.str();
}

BenchReport run_bench(const std::vector<SuiteEntry>& suite,
                      const std::vector<atk::AttackerClass>& models,
                      const std::vector<uint64_t>& sizes,
                      const sem::CostModel& cost) {
  BenchReport rep;
  std::vector<double> all;
  for (const auto& entry : suite) {
    for (uint64_t size : sizes) {
      ir::Module whole = instantiate(entry, size);
      auto [lib, app] = ir::split_lib_app(whole);
      uint64_t base = run_cost(lib, app, cost);
      for (auto model : models) {
        cc::CompileResult cr = cc::compile(lib, model);
        uint64_t mit = run_cost(cr.lib, app, cost);
        Row r;
        r.library = entry.name;
        r.model = atk::class_name(model);
        r.size = size;
        r.baseline_cost = base;
        r.mitigated_cost = mit;
        r.overhead_cost = mit >= base ? mit - base : 0;
        r.overhead_pct =
            base ? 100.0 * (double)(mit - base) / (double)base : 0.0;
        rep.rows.push_back(r);
        all.push_back(r.overhead_pct);
      }
    }
  }
  rep.median_overhead_pct = percentile(all, 0.5);
  rep.iqr_overhead_pct = percentile(all, 0.75) - percentile(all, 0.25);
  return rep;
}

}  // namespace rct::bench
