#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rct/attackers.hpp"
#include "rct/ir.hpp"
#include "rct/semantics.hpp"

#include <nlohmann/json.hpp>

namespace rct::chk {

using ordered_json = nlohmann::ordered_json;

// Smallest index where the traces differ (length mismatch diverges at the
// shorter length), or nullopt when equal.
std::optional<size_t> find_divergence(const sem::Trace& a, const sem::Trace& b);

struct Divergence {
  size_t index = 0;
  std::string lhs, rhs;  // event dump forms ("<end>" past the shorter trace)
};

struct Witness {
  std::string attacker_src;
  uint64_t seed_a = 0, seed_b = 0;
  std::optional<std::vector<spec::Speculator::Trigger>> speculator;
  Divergence divergence;
};

struct Stats {
  uint64_t attackers = 0;
  uint64_t seed_pairs = 0;
  uint64_t speculators = 0;
  uint64_t runs = 0;
};

struct Verdict {
  bool secure = true;
  Stats stats;
  std::optional<Witness> witness;

  ordered_json to_json() const;
  int exit_code() const { return secure ? 0 : 1; }
};

struct CheckOptions {
  uint64_t attacker_budget = 100;
  uint64_t generator_seed = 0;
  std::vector<std::pair<uint64_t, uint64_t>> seed_pairs = {{0, 1}, {0, 2}};
  bool minimize = true;
};

// Classical constant-time: traces of a fixed benign driver agree pairwise
// across secret seeds.
Verdict classical_ct_check(const ir::Module& lib, const ir::Module& driver,
                           const std::vector<uint64_t>& secret_seeds);

// Straight-line in-bounds app exercising every Γ function (used as the
// default classical-CT driver and by the functional-preservation tests).
ir::Module make_benign_driver(const ir::Module& gamma_delta);

// Robust constant-time per attacker model: trace equality quantified over
// generated attackers × secret seed pairs × (for Speculative) speculators.
// Returns the first counterexample with a greedily minimized attacker.
Verdict robust_ct_check(const ir::Module& lib, const atk::AttackerModel& model,
                        const CheckOptions& opts = {});

}  // namespace rct::chk
