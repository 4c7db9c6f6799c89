#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace rct::ir {

// ---------------------------------------------------------------------------
// Memory geometry. One cell = one 64-bit value; a single flat address space
// split into an unprotected region (application-accessible) and a protected
// region (accessible only while executing lib code).
// ---------------------------------------------------------------------------
inline constexpr uint64_t kUnprotCells = 16384;
inline constexpr uint64_t kProtCells = 8192;
inline constexpr uint64_t kProtBase = kUnprotCells;
inline constexpr uint64_t kMemCells = kUnprotCells + kProtCells;
inline constexpr uint64_t kAppStackBase = 256;
inline constexpr int kNumScratchRegs = 8;

enum class Region : uint8_t { Unprotected, Protected };

inline Region region_of(uint64_t addr) {
  return addr < kProtBase ? Region::Unprotected : Region::Protected;
}

enum class FnLabel : uint8_t { Lib, App };

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------
enum class ErrKind {
  Parse,
  Scope,
  MissingApiFunction,
  SignatureMismatch,
  NonLibLabel,
  UnknownSecret,
  AppCallsPrivate,
  UnresolvedCall,
  AppLabeledLib,
  LinkError,
  IllegalInstruction,
  NotClassicallyCT,
  BudgetExceeded,
  NestingExceeded,
  AlreadyWrapped,
};

struct Error : std::runtime_error {
  ErrKind kind;
  int line = 0, col = 0;
  Error(ErrKind k, const std::string& msg, int ln = 0, int cl = 0)
      : std::runtime_error(msg), kind(k), line(ln), col(cl) {}
};

// ---------------------------------------------------------------------------
// Syntax
// ---------------------------------------------------------------------------
struct Operand {
  enum class K : uint8_t { Lit, Var, Reg };
  K k = K::Lit;
  uint64_t lit = 0;
  std::string var;
  int reg = 0;

  static Operand literal(uint64_t v) {
    Operand o;
    o.k = K::Lit;
    o.lit = v;
    return o;
  }
  static Operand name(std::string n) {
    Operand o;
    o.k = K::Var;
    o.var = std::move(n);
    return o;
  }
  static Operand sreg(int i) {
    Operand o;
    o.k = K::Reg;
    o.reg = i;
    return o;
  }
};

enum class BinOp : uint8_t { Add, Sub, Mul, And, Or, Xor, Shl, Shr, Lt, Eq };

enum class Op : uint8_t {
  Const,
  Binop,
  Load,
  Store,
  If,
  Loop,
  Call,
  Ret,
  Memzero,
  Fence,
  ClearScratch,
  Pkru,
  StackSwitch,
};

struct Instruction {
  Op op{};
  std::string dst;   // Const/Binop/Load/Call result; Memzero target buffer
  uint64_t lit = 0;  // Const
  BinOp bop{};
  Operand a, b;        // Binop operands; If condition in a; Store source in b
  std::string buf;     // Load/Store buffer name; empty means raw address
  Operand index;       // Load/Store index, or the raw address expression
  std::vector<Instruction> blk_a;  // If-then / Loop body
  std::vector<Instruction> blk_b;  // If-else
  std::string counter;             // Loop counter local
  uint64_t bound = 0;              // Loop literal bound
  std::string callee;
  std::vector<Operand> args;
  bool has_dst = false;      // Call captures result
  bool has_ret_val = false;  // Ret carries a value
  Operand ret_val;
  bool flag = false;  // Pkru on / StackSwitch protected
  int site = -1;      // static branch site id, assigned at link time
  int line = 0;
};

struct Param {
  std::string name;
  bool is_buffer = false;
  uint32_t len = 0;  // static length for buffer params
};

struct BufferDecl {
  std::string name;
  uint32_t len = 0;
  Region hint = Region::Unprotected;
};

struct Function {
  std::string name;
  FnLabel label = FnLabel::App;
  std::vector<Param> params;
  std::vector<std::string> locals;
  std::vector<BufferDecl> buffers;
  std::vector<Instruction> body;
  std::set<std::string> declassified;  // subset of buffer params
};

struct Signature {
  std::vector<Param> params;
  std::set<std::string> declassified;
};

// A parsed source file: Γ (api), Δ (secrets) and function definitions.
// A library is a Module whose functions are lib-labeled; an application is a
// Module whose functions are app-labeled with an entry `main`.
struct Module {
  std::map<std::string, Signature> api;      // Γ
  std::map<std::string, uint32_t> secrets;   // Δ: name -> length in cells
  std::map<std::string, Function> functions;
};

// ---------------------------------------------------------------------------
// Well-formedness, linking, layout
// ---------------------------------------------------------------------------

// Throws Error on the first violation; MissingApiFunction, SignatureMismatch,
// NonLibLabel, UnknownSecret.
void check_library(const Module& lib);

struct WholeProgram {
  Module merged;  // lib + app functions, api, secrets
  std::string entry = "main";
  std::map<std::string, uint64_t> secret_base;  // Δ name -> absolute address
  uint64_t prot_stack_base = kProtBase;
  int num_branch_sites = 0;
  uint64_t step_bound = 0;  // static totality bound
};

// Links a library with an application. Throws AppCallsPrivate, UnresolvedCall,
// AppLabeledLib, LinkError.
WholeProgram link(const Module& lib, const Module& app);

// Scope/structure validation run after parsing (per-module).
void validate_module(const Module& m);

Signature signature_of(const Function& f);
bool signatures_match(const Signature& a, const Signature& b);

uint32_t buffer_param_len(const Function& f, const std::string& name);

// Splits a mixed source file into (library, application) views: the library
// keeps Γ, Δ and the lib-labeled functions; the application keeps Γ and the
// app-labeled functions.
std::pair<Module, Module> split_lib_app(const Module& m);

}  // namespace rct::ir
