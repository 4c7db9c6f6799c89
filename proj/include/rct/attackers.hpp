#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rct/ir.hpp"
#include "rct/semantics.hpp"
#include "rct/speculation.hpp"

namespace rct::atk {

enum class AttackerClass : uint8_t {
  MemorySafe,
  ReadOnly,
  MemoryUnsafe,
  Speculative,
  ParallelReadOnly,
};

std::string class_name(AttackerClass c);
AttackerClass parse_class(const std::string& s);  // CLI spelling, e.g. "read-only"

struct AttackerModel {
  AttackerClass cls = AttackerClass::ReadOnly;
  spec::SpeculatorModel speculators = spec::SpeculatorModel::single_site_sweep({1, 2});
  uint64_t schedule_budget = UINT64_MAX;  // ParallelReadOnly snapshot cap
};

// Trace-safety predicate; evaluated over the app segments only (lib segments
// are never inspected).
bool trace_satisfies(AttackerClass cls, const sem::Trace& t);

// Finite approximation of the ∀L quantifier: e is run against each probe
// library under each seed; true iff trace_satisfies holds for every pair.
// The probe set should include make_identity_probe and make_touch_probe.
bool is_attacker(const ir::Module& e, AttackerClass cls,
                 const std::vector<ir::Module>& probes,
                 const std::vector<uint64_t>& seeds);

// API functions that immediately return.
ir::Module make_identity_probe(const ir::Module& gamma_delta);
// API functions that read every Δ buffer cell.
ir::Module make_touch_probe(const ir::Module& gamma_delta);

// Grammar-directed sampling of application contexts. Deterministic in seed.
// MemorySafe omits raw-address operations; ReadOnly adds raw loads;
// MemoryUnsafe adds raw stores; Speculative reuses the ReadOnly grammar.
// The first ReadOnly/MemoryUnsafe/Speculative attacker is always the targeted
// stack-sweep template (raw reads over the lib frame address range).
std::vector<ir::Module> generate_attackers(const ir::Module& gamma_delta,
                                           AttackerClass cls, uint64_t budget,
                                           uint64_t seed);

}  // namespace rct::atk
