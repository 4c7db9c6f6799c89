#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rct/attackers.hpp"
#include "rct/checker.hpp"
#include "rct/compiler.hpp"
#include "rct/costbench.hpp"
#include "rct/parser.hpp"
#include "rct/semantics.hpp"

namespace py = pybind11;
using namespace rct;

namespace {

std::string parse_roundtrip(const std::string& text) {
  return ir::print_module(ir::parse_module(text));
}

std::string check_library_text(const std::string& text) {
  ir::check_library(ir::split_lib_app(ir::parse_module(text)).first);
  return "ok";
}

std::string robust_check(const std::string& text, const std::string& model,
                         uint64_t budget, uint64_t seed,
                         const std::string& speculator) {
  ir::Module lib = ir::split_lib_app(ir::parse_module(text)).first;
  atk::AttackerModel am;
  am.cls = atk::parse_class(model);
  am.speculators = spec::SpeculatorModel::parse(speculator);
  chk::CheckOptions opts;
  opts.attacker_budget = budget;
  opts.generator_seed = seed;
  return chk::robust_ct_check(lib, am, opts).to_json().dump();
}

std::pair<std::string, std::string> compile_library(const std::string& text,
                                                    const std::string& model) {
  ir::Module lib = ir::split_lib_app(ir::parse_module(text)).first;
  cc::CompileResult r = cc::compile(lib, atk::parse_class(model));
  return {ir::print_module(r.lib), r.report.dump()};
}

std::vector<std::string> trace_program(const std::string& text, uint64_t seed) {
  auto [lib, app] = ir::split_lib_app(ir::parse_module(text));
  ir::WholeProgram w = ir::link(lib, app);
  sem::Trace t = sem::traces(w, sem::make_initial_state(w, seed));
  std::vector<std::string> out;
  for (const auto& e : t.events) out.push_back(e.str());
  return out;
}

std::vector<std::string> gen_attackers(const std::string& text,
                                       const std::string& model,
                                       uint64_t budget, uint64_t seed) {
  ir::Module m = ir::parse_module(text);
  ir::Module gd;
  gd.api = m.api;
  gd.secrets = m.secrets;
  std::vector<std::string> out;
  for (const auto& a :
       atk::generate_attackers(gd, atk::parse_class(model), budget, seed))
    out.push_back(ir::print_module(a));
  return out;
}

std::string run_bench(const std::string& template_text,
                      const std::vector<std::string>& models,
                      const std::vector<uint64_t>& sizes) {
  std::vector<atk::AttackerClass> classes;
  for (const auto& m : models) classes.push_back(atk::parse_class(m));
  bench::SuiteEntry entry{"bench", template_text};
  return bench::run_bench({entry}, classes, sizes).to_json().dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "robust constant-time toolkit core bindings";
  py::register_exception<ir::Error>(m, "IrError");
  m.def("parse_roundtrip", &parse_roundtrip, py::arg("text"),
        "Parse IR text and print it back in canonical form.");
  m.def("check_library_text", &check_library_text, py::arg("text"),
        "Validate the library part of an IR module; raises IrError.");
  m.def("robust_check", &robust_check, py::arg("text"), py::arg("model"),
        py::arg("budget") = 100, py::arg("seed") = 0,
        py::arg("speculator") = "sweep:1|2",
        "Robust constant-time check; returns the verdict as a JSON string.");
  m.def("compile_library", &compile_library, py::arg("text"), py::arg("model"),
        "Apply mitigations; returns (library text, report JSON string).");
  m.def("trace_program", &trace_program, py::arg("text"), py::arg("seed") = 0,
        "Run a whole program and return its event trace.");
  m.def("gen_attackers", &gen_attackers, py::arg("text"), py::arg("model"),
        py::arg("budget") = 10, py::arg("seed") = 0,
        "Generate attacker application sources for a library's API.");
  m.def("run_bench", &run_bench, py::arg("template_text"), py::arg("models"),
        py::arg("sizes"),
        "Run the cost benchmark over a size-templated library.");
}
