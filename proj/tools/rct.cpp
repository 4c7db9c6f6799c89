#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rct/attackers.hpp"
#include "rct/checker.hpp"
#include "rct/compiler.hpp"
#include "rct/costbench.hpp"
#include "rct/parser.hpp"
#include "rct/semantics.hpp"

using nlohmann::ordered_json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rct::ir::Error(rct::ir::ErrKind::Parse, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<uint64_t> parse_sizes(const std::string& s) {
  std::vector<uint64_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.push_back(std::stoull(part));
  return out;
}

ordered_json manifest(const std::string& command, ordered_json params) {
  ordered_json m;
  m["tool"] = "rct";
  m["version"] = "0.1.0";
  m["command"] = command;
  m["params"] = std::move(params);
  return m;
}

struct Options {
  std::string input;
  std::string model = "read-only";
  uint64_t budget = 100;
  uint64_t seed = 0;
  std::string speculator = "sweep:1|2";
  std::string sizes = "1,128,256,512,1024,2048,4096";
  std::string models = "read-only,speculative,parallel-read-only";
  std::string output;
  bool json = false;
};

int cmd_check(const Options& o) {
  rct::ir::Module m = rct::ir::parse_module(slurp(o.input));
  rct::atk::AttackerModel am;
  am.cls = rct::atk::parse_class(o.model);
  am.speculators = rct::spec::SpeculatorModel::parse(o.speculator);
  rct::chk::CheckOptions co;
  co.attacker_budget = o.budget;
  co.generator_seed = o.seed;
  rct::chk::Verdict v = rct::chk::robust_ct_check(m, am, co);
  if (o.json) {
    ordered_json j = v.to_json();
    j["manifest"] = manifest("check", {{"input", o.input},
                                       {"model", o.model},
                                       {"budget", o.budget},
                                       {"seed", o.seed},
                                       {"speculator", o.speculator}});
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << (v.secure ? "secure" : "violation") << "\n";
    if (v.witness) {
      std::cout << "seeds: " << v.witness->seed_a << " " << v.witness->seed_b
                << "\ndivergence at event " << v.witness->divergence.index
                << ": " << v.witness->divergence.lhs << " vs "
                << v.witness->divergence.rhs << "\nattacker:\n"
                << v.witness->attacker_src;
    }
  }
  return v.exit_code();
}

int cmd_compile(const Options& o) {
  rct::ir::Module m = rct::ir::parse_module(slurp(o.input));
  rct::ir::Module lib = rct::ir::split_lib_app(m).first;
  rct::cc::CompileResult r =
      rct::cc::compile(lib, rct::atk::parse_class(o.model));
  std::string text = rct::ir::print_module(r.lib);
  if (!o.output.empty()) {
    std::ofstream out(o.output);
    out << text;
  }
  if (o.json) {
    ordered_json j;
    j["manifest"] = manifest(
        "compile", {{"input", o.input}, {"model", o.model}});
    j["report"] = r.report;
    j["library"] = text;
    std::cout << j.dump(2) << "\n";
  } else if (o.output.empty()) {
    std::cout << text;
  }
  return 0;
}

int cmd_bench(const Options& o) {
  rct::bench::SuiteEntry entry{"stream", slurp(o.input)};
  std::vector<rct::atk::AttackerClass> models;
  {
    std::stringstream ss(o.models);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) models.push_back(rct::atk::parse_class(part));
  }
  rct::bench::BenchReport rep =
      rct::bench::run_bench({entry}, models, parse_sizes(o.sizes));
  if (o.json) {
    ordered_json j = rep.to_json();
    j["manifest"] = manifest("bench", {{"input", o.input},
                                       {"sizes", o.sizes},
                                       {"models", o.models}});
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << rep.table();
  }
  return 0;
}

int cmd_gen_attackers(const Options& o) {
  rct::ir::Module m = rct::ir::parse_module(slurp(o.input));
  rct::ir::Module gd;
  gd.api = m.api;
  gd.secrets = m.secrets;
  auto atks = rct::atk::generate_attackers(gd, rct::atk::parse_class(o.model),
                                           o.budget, o.seed);
  if (o.json) {
    ordered_json j;
    j["manifest"] = manifest("gen-attackers", {{"input", o.input},
                                               {"model", o.model},
                                               {"budget", o.budget},
                                               {"seed", o.seed}});
    ordered_json arr = ordered_json::array();
    for (const auto& a : atks) arr.push_back(rct::ir::print_module(a));
    j["attackers"] = arr;
    std::cout << j.dump(2) << "\n";
  } else {
    for (size_t i = 0; i < atks.size(); ++i) {
      std::cout << "# attacker " << i << "\n"
                << rct::ir::print_module(atks[i]) << "\n";
    }
  }
  return 0;
}

int cmd_trace(const Options& o) {
  rct::ir::Module m = rct::ir::parse_module(slurp(o.input));
  auto [lib, app] = rct::ir::split_lib_app(m);
  rct::ir::WholeProgram w = rct::ir::link(lib, app);
  rct::spec::SpeculatorModel sm = rct::spec::SpeculatorModel::parse(o.speculator);
  auto sps = rct::spec::enumerate_speculators(sm, w);
  // trace uses a single concrete speculator; models that enumerate use the
  // first entry (never-speculate for the sweep).
  rct::sem::Trace t = rct::sem::spec_traces(
      w, rct::sem::make_initial_state(w, o.seed), sps.front());
  if (o.json) {
    ordered_json j;
    j["manifest"] = manifest("trace", {{"input", o.input},
                                       {"seed", o.seed},
                                       {"speculator", o.speculator}});
    ordered_json arr = ordered_json::array();
    for (const auto& e : t.events) arr.push_back(e.str());
    j["events"] = arr;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << t.dump();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust constant-time toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_input = true) {
    if (needs_input) sub->add_option("input", o.input, "IR source file")->required();
    sub->add_flag("--json", o.json, "machine-readable output on stdout");
  };

  auto* check = app.add_subcommand("check", "robustness check of a library");
  add_common(check);
  check->add_option("--model", o.model, "attacker model");
  check->add_option("--budget", o.budget, "number of generated attackers");
  check->add_option("--seed", o.seed, "attacker generator seed");
  check->add_option("--speculator", o.speculator, "speculator model");

  auto* compile = app.add_subcommand("compile", "apply mitigations");
  add_common(compile);
  compile->add_option("--model", o.model, "attacker model");
  compile->add_option("-o,--output", o.output, "write mitigated library here");

  auto* bench = app.add_subcommand("bench", "mitigation cost amortization");
  add_common(bench);
  bench->add_option("--sizes", o.sizes, "comma-separated data sizes");
  bench->add_option("--models", o.models, "comma-separated attacker models");

  auto* gen = app.add_subcommand("gen-attackers", "emit generated attackers");
  add_common(gen);
  gen->add_option("--model", o.model, "attacker model");
  gen->add_option("--budget", o.budget, "number of attackers");
  gen->add_option("--seed", o.seed, "generator seed");

  auto* trace = app.add_subcommand("trace", "run a program, dump its trace");
  add_common(trace);
  trace->add_option("--seed", o.seed, "secret seed");
  trace->add_option("--speculator", o.speculator, "speculator model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (check->parsed()) return cmd_check(o);
    if (compile->parsed()) return cmd_compile(o);
    if (bench->parsed()) return cmd_bench(o);
    if (gen->parsed()) return cmd_gen_attackers(o);
    if (trace->parsed()) return cmd_trace(o);
  } catch (const rct::ir::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
