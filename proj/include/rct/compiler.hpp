#pragma once

#include <map>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "rct/attackers.hpp"
#include "rct/ir.hpp"

namespace rct::cc {

using ordered_json = nlohmann::ordered_json;

enum class Taint : uint8_t { Public, Secret };

// Per function: variable/buffer name -> taint. Flow-insensitive join
// fixpoint; Δ buffers are secret; no under-tainting.
struct TaintMap {
  std::map<std::string, std::map<std::string, Taint>> per_fn;

  Taint of(const std::string& fn, const std::string& name) const;
  bool is_secret(const std::string& fn, const std::string& name) const {
    return of(fn, name) == Taint::Secret;
  }
  ordered_json to_json() const;
};

TaintMap taint_analysis(const ir::Module& lib);

struct MitigationPlan {
  atk::AttackerClass model = atk::AttackerClass::MemorySafe;
  bool clear_scratch = false;
  bool wrap = false;
  bool fence_boundary = false;
  bool fence_branches = false;  // harden lib conditionals (Speculative)
  std::set<std::pair<std::string, std::string>> relocate;  // (fn, buffer)
  std::set<std::pair<std::string, std::string>> zeroize;   // (fn, buffer)
  std::set<std::pair<std::string, std::string>> copy_buffers;  // (fn, param)

  // Total number of distinct actions; grows along the model ordering.
  size_t action_count() const;
  ordered_json to_json() const;
};

MitigationPlan plan(const ir::Module& lib, const TaintMap& taint,
                    atk::AttackerClass model);

// Relocation flips region hints to protected; zeroize targets get memzero
// (plus a trailing fence for Speculative plans) before every return.
ir::Module relocate_and_zeroize(const ir::Module& lib,
                                const MitigationPlan& plan);

// The nine-step wrapper: for each Γ function F, the body moves to F__clone,
// internal calls retarget to the clone, and F becomes the domain-switching
// wrapper. Throws AlreadyWrapped on double application.
ir::Module wrap_api(const ir::Module& lib, const MitigationPlan& plan);

struct CompileResult {
  ir::Module lib;
  MitigationPlan plan;
  TaintMap taint;
  ordered_json report;
};

// taint_analysis -> plan -> relocate_and_zeroize -> wrap_api.
// Refuses to compile a library that is not classically constant-time
// (throws Error(NotClassicallyCT) carrying the violation summary).
CompileResult compile(const ir::Module& lib, atk::AttackerClass model);

}  // namespace rct::cc
