#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rct/ir.hpp"

namespace rct::spec {

struct Decision {
  bool mispredict = false;
  uint64_t window = 0;
};

// An oracle deciding, per (static branch site, dynamic occurrence), whether
// to mispredict and for how many steps.
struct Speculator {
  enum class Kind : uint8_t { Never, OnceAll, Scripted };

  struct Trigger {
    int site = 0;
    int occurrence = -1;  // -1 matches every occurrence
    uint64_t window = 1;
  };

  Kind kind = Kind::Never;
  uint64_t window = 1;  // OnceAll
  std::vector<Trigger> script;
  int max_depth = 1;

  Decision decide(int site, int occurrence) const;
  bool is_never() const;
  std::string describe() const;

  static Speculator never() { return {}; }
  static Speculator once_all(uint64_t w);
  static Speculator scripted(std::vector<Trigger> triggers);
};

struct SpeculatorModel {
  enum class Kind : uint8_t { Never, OnceAll, Scripted, Exhaustive, SingleSiteSweep };

  Kind kind = Kind::Never;
  uint64_t window = 1;                     // OnceAll
  std::vector<uint64_t> windows = {1, 2};  // Exhaustive / SingleSiteSweep
  int depth = 1;
  uint64_t cap = 200000;  // Exhaustive enumeration budget
  std::vector<Speculator::Trigger> script;

  static SpeculatorModel never();
  static SpeculatorModel once_all(uint64_t w);
  static SpeculatorModel exhaustive(std::vector<uint64_t> windows, int depth);
  static SpeculatorModel single_site_sweep(std::vector<uint64_t> windows);
  static SpeculatorModel scripted(std::vector<Speculator::Trigger> triggers);

  // Parse CLI syntax: never | once:W | exhaustive:W1|W2,D | sweep:W1|W2 | script:FILE
  static SpeculatorModel parse(const std::string& text);
};

// Finite list of speculators for a linked program. Exhaustive covers every
// assignment of {follow} ∪ windows to the program's static branch sites, up
// to `depth` nesting; throws BudgetExceeded past the cap.
std::vector<Speculator> enumerate_speculators(const SpeculatorModel& model,
                                              const ir::WholeProgram& w);

}  // namespace rct::spec
