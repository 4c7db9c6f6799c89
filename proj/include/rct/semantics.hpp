#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rct/ir.hpp"
#include "rct/speculation.hpp"

namespace rct::sem {

enum class Ev : uint8_t {
  Branch,
  Read,
  Write,
  OobRead,
  OobWrite,
  Call,
  Ret,
  MemFault,
  SpecStart,
  Rollback,
};

enum class Domain : uint8_t { App, Lib };

// The leakage observations. In-bounds Read/Write carry only the address
// (standard constant-time observer); OobRead additionally carries the value
// read (the read-gadget observation); Ret carries a value only at lib->app
// crossings.
struct Event {
  Ev kind{};
  bool taken = false;                       // Branch
  ir::Region region = ir::Region::Unprotected;  // Read/Write
  uint64_t addr = 0;                        // Read/Write/OobRead/OobWrite
  uint64_t value = 0;                       // OobRead, Ret (when has_value)
  bool has_value = false;                   // Ret
  std::string name;                         // Call/Ret function name
  Domain caller = Domain::App;              // Call
  uint64_t id = 0;                          // SpecStart/Rollback
  Domain domain = Domain::App;  // emitting domain; derived, not part of equality

  bool operator==(const Event& o) const;
  bool operator!=(const Event& o) const { return !(*this == o); }
  std::string str() const;  // stable one-line dump form
};

struct Segment {
  Domain domain;
  size_t begin, end;  // [begin, end) into events
};

struct Trace {
  std::vector<Event> events;

  // Maximal same-domain runs; boundaries fall exactly at domain crossings.
  std::vector<Segment> segments() const;
  std::string dump() const;
  bool operator==(const Trace& o) const { return events == o.events; }
};

// Identity today: Event construction already grants exactly the payloads the
// observer model allows. Single place to adjust the observer.
Trace observable_projection(const Trace& t);

struct Frame {
  const ir::Function* fn = nullptr;
  std::map<std::string, uint64_t> vars;      // scalar params + locals
  std::map<std::string, uint64_t> buf_base;  // local buffer bases
  uint64_t app_alloc = 0, prot_alloc = 0;
  bool saved_stack_prot = false;
  std::string ret_dst;
  bool want_ret = false;
  // Control: stack of (block, next index, loop bookkeeping).
  struct BlockRef {
    const std::vector<ir::Instruction>* blk;
    size_t idx = 0;
    bool is_loop = false;
    uint64_t iters_left = 0;
    const ir::Instruction* loop = nullptr;
  };
  std::vector<BlockRef> blocks;
};

// Memory regions, two stacks, register file, control. Snapshot-copyable;
// speculation rollback restores a full copy.
struct Machine {
  std::vector<uint64_t> mem;  // kMemCells, flat
  uint64_t app_sp = ir::kAppStackBase;
  uint64_t prot_sp = 0;
  bool stack_prot = false;  // active stack
  std::array<uint64_t, ir::kNumScratchRegs> sregs{};
  std::vector<Frame> frames;
  std::map<int, int> branch_occ;  // per-site dynamic occurrence counters
  bool halted = false;
  bool faulted = false;
  uint64_t steps = 0;

  Domain domain() const {
    return (!frames.empty() && frames.back().fn->label == ir::FnLabel::Lib)
               ? Domain::Lib
               : Domain::App;
  }
};

// S ⊨ Δ: every Δ buffer allocated (in the protected region) and filled with
// seed-determined values; all non-secret memory identical across seeds.
// Seed 0 fills with zeros, seed 1 with ones, other seeds with a splitmix64
// stream.
Machine make_initial_state(const ir::WholeProgram& w, uint64_t seed);
std::vector<Machine> initial_states(const ir::WholeProgram& w,
                                    const std::vector<uint64_t>& seeds);

struct CostModel {
  uint64_t per_instruction = 1;
  uint64_t domain_switch = 50;  // charged on each pkru instruction
  uint64_t memzero_cell = 1;
  uint64_t fence = 4;
};

struct RunConfig {
  // ParallelReadOnly observer: emit a value-carrying OobRead after every lib
  // write to unprotected memory (adversarially best snapshot schedule).
  bool parallel_observer = false;
  uint64_t snapshot_budget = UINT64_MAX;
  // MPK holds under speculation: an app-domain speculative access to the
  // protected region faults the window instead of observing a value.
  bool mpk_speculative = true;
  uint64_t max_steps = 0;  // 0: use the program's static bound
  CostModel cost;
};

struct RunResult {
  Trace trace;
  Machine final_state;
  uint64_t cost = 0;
};

class Runner {
 public:
  Runner(const ir::WholeProgram& w, RunConfig cfg = {},
         const spec::Speculator* sp = nullptr);

  // Runs to halt from S; deterministic.
  RunResult run(Machine s);

 private:
  struct SpecCtx {
    Machine snapshot;
    uint64_t remaining = 0;
    uint64_t id = 0;
    const ir::Instruction* branch = nullptr;  // resume here on rollback
    bool correct_taken = false;
    size_t frame_depth = 0;
  };

  const ir::WholeProgram& w_;
  RunConfig cfg_;
  const spec::Speculator* sp_;
  Machine m_;
  Trace trace_;
  std::vector<SpecCtx> windows_;
  uint64_t next_spec_id_ = 1;
  uint64_t cost_ = 0;
  uint64_t snapshots_ = 0;

  void step();
  void exec(const ir::Instruction& ins);
  uint64_t eval(const ir::Operand& o) const;
  uint64_t resolve_var(const std::string& name) const;
  void enter_block(const std::vector<ir::Instruction>& blk);
  void enter_branch(const ir::Instruction& ins, bool taken);
  void do_call(const ir::Instruction& ins);
  void do_return(bool has_val, uint64_t val);
  void do_access(const ir::Instruction& ins, bool is_store);
  void fault();       // MemFault: halt, or roll back the active window
  void rollback();    // innermost window
  void emit(Event e);
  void charge(uint64_t c) { cost_ += c; }
  bool speculating() const { return !windows_.empty(); }
  struct BufRef {
    uint64_t base;
    uint64_t len;
  };
  std::optional<BufRef> resolve_buffer(const std::string& name) const;
};

// traces(⟨S, L(e)⟩): the unique complete event sequence of the run.
Trace traces(const ir::WholeProgram& w, const Machine& s);

// Speculative semantics under a speculator.
Trace spec_traces(const ir::WholeProgram& w, const Machine& s,
                  const spec::Speculator& sp);

}  // namespace rct::sem
