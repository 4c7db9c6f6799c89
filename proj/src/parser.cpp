#include "rct/parser.hpp"

#include <cctype>
#include <sstream>

namespace rct::ir {

namespace {

struct Token {
  std::string text;
  int line = 0, col = 0;
  bool is_number = false;
  uint64_t number = 0;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto bump = [&](char c) {
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') bump(text[i++]);
      continue;
    }
    if (std::isspace((unsigned char)c)) {
      bump(c);
      ++i;
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isdigit((unsigned char)c)) {
      size_t j = i;
      while (j < text.size() &&
             (std::isalnum((unsigned char)text[j]) || text[j] == 'x'))
        ++j;
      t.text = text.substr(i, j - i);
      t.is_number = true;
      try {
        t.number = std::stoull(t.text, nullptr, 0);
      } catch (...) {
        throw Error(ErrKind::Parse, "bad number '" + t.text + "'", line, col);
      }
      while (i < j) bump(text[i++]);
    } else if (std::isalpha((unsigned char)c) || c == '_') {
      size_t j = i;
      while (j < text.size() &&
             (std::isalnum((unsigned char)text[j]) || text[j] == '_'))
        ++j;
      t.text = text.substr(i, j - i);
      while (i < j) bump(text[i++]);
    } else if (c == '%') {
      size_t j = i + 1;
      while (j < text.size() && std::isalnum((unsigned char)text[j])) ++j;
      t.text = text.substr(i, j - i);
      while (i < j) bump(text[i++]);
    } else {
      t.text = std::string(1, c);
      bump(c);
      ++i;
    }
    out.push_back(std::move(t));
  }
  return out;
}

const std::map<std::string, BinOp> kBinops = {
    {"add", BinOp::Add}, {"sub", BinOp::Sub}, {"mul", BinOp::Mul},
    {"and", BinOp::And}, {"or", BinOp::Or},   {"xor", BinOp::Xor},
    {"shl", BinOp::Shl}, {"shr", BinOp::Shr}, {"lt", BinOp::Lt},
    {"eq", BinOp::Eq}};

struct Parser {
  std::vector<Token> toks;
  size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg, const std::string& expected) {
    const Token* t = pos < toks.size() ? &toks[pos] : nullptr;
    std::string where = t ? "'" + t->text + "'" : "end of input";
    throw Error(ErrKind::Parse,
                msg + " at " + where + " (expected " + expected + ")",
                t ? t->line : 0, t ? t->col : 0);
  }

  bool at(const std::string& s) const {
    return pos < toks.size() && toks[pos].text == s;
  }
  bool at_end() const { return pos >= toks.size(); }
  const Token& peek() {
    if (at_end()) fail("unexpected end", "more input");
    return toks[pos];
  }
  Token take() {
    Token t = peek();
    ++pos;
    return t;
  }
  void expect(const std::string& s) {
    if (!at(s)) fail("unexpected token", "'" + s + "'");
    ++pos;
  }
  std::string ident() {
    const Token& t = peek();
    if (t.is_number || !(std::isalpha((unsigned char)t.text[0]) || t.text[0] == '_'))
      fail("unexpected token", "identifier");
    return take().text;
  }
  uint64_t number() {
    if (!peek().is_number) fail("unexpected token", "number");
    return take().number;
  }

  Operand operand() {
    const Token& t = peek();
    if (t.is_number) return Operand::literal(take().number);
    if (t.text.size() > 1 && t.text[0] == '%') {
      std::string r = take().text;
      if (r.size() < 3 || r[1] != 's')
        throw Error(ErrKind::Parse, "bad register '" + r + "'", t.line, t.col);
      int idx = std::stoi(r.substr(2));
      if (idx < 0 || idx >= kNumScratchRegs)
        throw Error(ErrKind::Parse, "bad register '" + r + "'", t.line, t.col);
      return Operand::sreg(idx);
    }
    return Operand::name(ident());
  }

  Param param() {
    Param p;
    p.name = ident();
    expect(":");
    if (at("buf")) {
      take();
      expect("[");
      p.is_buffer = true;
      p.len = (uint32_t)number();
      expect("]");
    } else {
      expect("val");
    }
    return p;
  }

  std::vector<Param> param_list() {
    std::vector<Param> ps;
    expect("(");
    if (!at(")")) {
      ps.push_back(param());
      while (at(",")) {
        take();
        ps.push_back(param());
      }
    }
    expect(")");
    return ps;
  }

  std::set<std::string> declassify_clause() {
    std::set<std::string> d;
    if (at("declassify")) {
      take();
      expect("(");
      if (!at(")")) {
        d.insert(ident());
        while (at(",")) {
          take();
          d.insert(ident());
        }
      }
      expect(")");
    }
    return d;
  }

  std::vector<Instruction> block() {
    expect("{");
    std::vector<Instruction> blk;
    while (!at("}")) blk.push_back(instruction());
    expect("}");
    return blk;
  }

  Instruction instruction() {
    Instruction ins;
    ins.line = peek().line;
    const std::string& head = peek().text;
    if (head == "store") {
      take();
      ins.op = Op::Store;
      if (at("raw")) {
        take();
      } else {
        ins.buf = ident();
      }
      expect("[");
      ins.index = operand();
      expect("]");
      expect("=");
      ins.b = operand();
      return ins;
    }
    if (head == "if") {
      take();
      ins.op = Op::If;
      ins.a = operand();
      ins.blk_a = block();
      if (at("else")) {
        take();
        ins.blk_b = block();
      }
      return ins;
    }
    if (head == "loop") {
      take();
      ins.op = Op::Loop;
      ins.counter = ident();
      ins.bound = number();
      ins.blk_a = block();
      return ins;
    }
    if (head == "call") {
      take();
      ins.op = Op::Call;
      ins.callee = ident();
      call_args(ins);
      return ins;
    }
    if (head == "return") {
      take();
      ins.op = Op::Ret;
      // A value follows unless the next token starts a new statement/block.
      if (!at_end() && !at("}") && starts_operand()) {
        ins.has_ret_val = true;
        ins.ret_val = operand();
      }
      return ins;
    }
    if (head == "memzero") {
      take();
      ins.op = Op::Memzero;
      ins.dst = ident();
      return ins;
    }
    if (head == "fence") {
      take();
      ins.op = Op::Fence;
      return ins;
    }
    if (head == "clearscratch") {
      take();
      ins.op = Op::ClearScratch;
      return ins;
    }
    if (head == "pkru") {
      take();
      ins.op = Op::Pkru;
      std::string m = ident();
      if (m != "on" && m != "off") fail("bad pkru mode", "'on' or 'off'");
      ins.flag = (m == "on");
      return ins;
    }
    if (head == "stackswitch") {
      take();
      ins.op = Op::StackSwitch;
      std::string m = ident();
      if (m != "protected" && m != "app")
        fail("bad stackswitch target", "'protected' or 'app'");
      ins.flag = (m == "protected");
      return ins;
    }
    // Assignment forms: dst = <number> | load ... | call ... | binop a b
    std::string dst = ident();
    expect("=");
    ins.dst = dst;
    if (peek().is_number) {
      ins.op = Op::Const;
      ins.lit = number();
      return ins;
    }
    if (at("load")) {
      take();
      ins.op = Op::Load;
      if (at("raw")) {
        take();
      } else {
        ins.buf = ident();
      }
      expect("[");
      ins.index = operand();
      expect("]");
      return ins;
    }
    if (at("call")) {
      take();
      ins.op = Op::Call;
      ins.has_dst = true;
      ins.callee = ident();
      call_args(ins);
      return ins;
    }
    std::string opname = ident();
    auto it = kBinops.find(opname);
    if (it == kBinops.end()) fail("unknown operation '" + opname + "'", "binop");
    ins.op = Op::Binop;
    ins.bop = it->second;
    ins.a = operand();
    ins.b = operand();
    return ins;
  }

  bool starts_operand() {
    const Token& t = peek();
    if (t.is_number) return true;
    if (t.text[0] == '%') return true;
    if (!(std::isalpha((unsigned char)t.text[0]) || t.text[0] == '_')) return false;
    // Identifiers that begin a statement are not return values; a value
    // position is only valid when followed by something other than '='.
    static const std::set<std::string> stmt_heads = {
        "store", "if",      "loop",         "call", "return", "memzero",
        "fence", "pkru",    "clearscratch", "stackswitch"};
    if (stmt_heads.count(t.text)) return false;
    if (pos + 1 < toks.size() && toks[pos + 1].text == "=") return false;
    return true;
  }

  void call_args(Instruction& ins) {
    expect("(");
    if (!at(")")) {
      ins.args.push_back(operand());
      while (at(",")) {
        take();
        ins.args.push_back(operand());
      }
    }
    expect(")");
  }

  Function function() {
    Function f;
    expect("fn");
    std::string label = ident();
    if (label == "lib")
      f.label = FnLabel::Lib;
    else if (label == "app")
      f.label = FnLabel::App;
    else
      fail("bad function label '" + label + "'", "'lib' or 'app'");
    f.name = ident();
    f.params = param_list();
    f.declassified = declassify_clause();
    expect("{");
    // Declarations first: buf / local lines, then instructions.
    while (at("buf") || at("local")) {
      if (at("buf")) {
        take();
        BufferDecl b;
        b.name = ident();
        expect("[");
        b.len = (uint32_t)number();
        expect("]");
        if (at("protected")) {
          take();
          b.hint = Region::Protected;
        }
        f.buffers.push_back(b);
      } else {
        take();
        while (!at_end() && !peek().is_number && peek().text != "}" &&
               std::isalpha((unsigned char)peek().text[0])) {
          // `local a b c` up to end of the declaration run; stop at statement
          // heads that could start the body.
          if (pos + 1 < toks.size() && toks[pos + 1].text == "=") break;
          static const std::set<std::string> heads = {
              "buf",   "local", "store", "if",           "loop",
              "call",  "return", "memzero", "fence",     "pkru",
              "clearscratch", "stackswitch"};
          if (heads.count(peek().text)) break;
          f.locals.push_back(ident());
        }
      }
    }
    while (!at("}")) f.body.push_back(instruction());
    expect("}");
    return f;
  }

  Module module() {
    Module m;
    while (!at_end()) {
      if (at("secret")) {
        take();
        std::string name = ident();
        expect("[");
        uint64_t len = number();
        expect("]");
        if (!m.secrets.emplace(name, (uint32_t)len).second)
          fail("duplicate secret '" + name + "'", "distinct names");
        continue;
      }
      if (at("api")) {
        take();
        std::string name = ident();
        Signature sig;
        sig.params = param_list();
        sig.declassified = declassify_clause();
        if (!m.api.emplace(name, std::move(sig)).second)
          fail("duplicate api '" + name + "'", "distinct names");
        continue;
      }
      if (at("fn")) {
        Function f = function();
        std::string name = f.name;
        if (!m.functions.emplace(name, std::move(f)).second)
          fail("duplicate function '" + name + "'", "distinct names");
        continue;
      }
      fail("unexpected top-level token", "'secret', 'api' or 'fn'");
    }
    return m;
  }
};

std::string op_name(BinOp b) {
  switch (b) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Mul: return "mul";
    case BinOp::And: return "and";
    case BinOp::Or: return "or";
    case BinOp::Xor: return "xor";
    case BinOp::Shl: return "shl";
    case BinOp::Shr: return "shr";
    case BinOp::Lt: return "lt";
    case BinOp::Eq: return "eq";
  }
  return "?";
}

std::string operand_str(const Operand& o) {
  switch (o.k) {
    case Operand::K::Lit: return std::to_string(o.lit);
    case Operand::K::Var: return o.var;
    case Operand::K::Reg: return "%s" + std::to_string(o.reg);
  }
  return "?";
}

void print_params(std::ostringstream& os, const std::vector<Param>& ps) {
  os << "(";
  for (size_t i = 0; i < ps.size(); ++i) {
    if (i) os << ", ";
    os << ps[i].name << ": ";
    if (ps[i].is_buffer)
      os << "buf[" << ps[i].len << "]";
    else
      os << "val";
  }
  os << ")";
}

void print_declassify(std::ostringstream& os, const std::set<std::string>& d) {
  if (d.empty()) return;
  os << " declassify(";
  bool first = true;
  for (const auto& n : d) {
    if (!first) os << ", ";
    os << n;
    first = false;
  }
  os << ")";
}

void print_block(std::ostringstream& os, const std::vector<Instruction>& blk,
                 int indent);

void print_instr(std::ostringstream& os, const Instruction& ins, int indent) {
  std::string pad(indent, ' ');
  os << pad;
  switch (ins.op) {
    case Op::Const:
      os << ins.dst << " = " << ins.lit << "\n";
      break;
    case Op::Binop:
      os << ins.dst << " = " << op_name(ins.bop) << " " << operand_str(ins.a)
         << " " << operand_str(ins.b) << "\n";
      break;
    case Op::Load:
      os << ins.dst << " = load " << (ins.buf.empty() ? "raw" : ins.buf) << "["
         << operand_str(ins.index) << "]\n";
      break;
    case Op::Store:
      os << "store " << (ins.buf.empty() ? "raw" : ins.buf) << "["
         << operand_str(ins.index) << "] = " << operand_str(ins.b) << "\n";
      break;
    case Op::If:
      os << "if " << operand_str(ins.a) << " {\n";
      print_block(os, ins.blk_a, indent + 2);
      os << pad << "} else {\n";
      print_block(os, ins.blk_b, indent + 2);
      os << pad << "}\n";
      break;
    case Op::Loop:
      os << "loop " << ins.counter << " " << ins.bound << " {\n";
      print_block(os, ins.blk_a, indent + 2);
      os << pad << "}\n";
      break;
    case Op::Call:
      if (ins.has_dst) os << ins.dst << " = ";
      os << "call " << ins.callee << "(";
      for (size_t i = 0; i < ins.args.size(); ++i) {
        if (i) os << ", ";
        os << operand_str(ins.args[i]);
      }
      os << ")\n";
      break;
    case Op::Ret:
      os << "return";
      if (ins.has_ret_val) os << " " << operand_str(ins.ret_val);
      os << "\n";
      break;
    case Op::Memzero:
      os << "memzero " << ins.dst << "\n";
      break;
    case Op::Fence:
      os << "fence\n";
      break;
    case Op::ClearScratch:
      os << "clearscratch\n";
      break;
    case Op::Pkru:
      os << "pkru " << (ins.flag ? "on" : "off") << "\n";
      break;
    case Op::StackSwitch:
      os << "stackswitch " << (ins.flag ? "protected" : "app") << "\n";
      break;
  }
}

void print_block(std::ostringstream& os, const std::vector<Instruction>& blk,
                 int indent) {
  for (const auto& ins : blk) print_instr(os, ins, indent);
}

}  // namespace

Module parse_module(const std::string& text) {
  Parser p{tokenize(text)};
  Module m = p.module();
  validate_module(m);
  return m;
}

std::string print_function(const Function& f) {
  std::ostringstream os;
  os << "fn " << (f.label == FnLabel::Lib ? "lib" : "app") << " " << f.name;
  print_params(os, f.params);
  print_declassify(os, f.declassified);
  os << " {\n";
  for (const auto& b : f.buffers) {
    os << "  buf " << b.name << "[" << b.len << "]";
    if (b.hint == Region::Protected) os << " protected";
    os << "\n";
  }
  if (!f.locals.empty()) {
    os << "  local";
    for (const auto& l : f.locals) os << " " << l;
    os << "\n";
  }
  print_block(os, f.body, 2);
  os << "}\n";
  return os.str();
}

std::string print_module(const Module& m) {
  std::ostringstream os;
  for (const auto& [name, len] : m.secrets)
    os << "secret " << name << "[" << len << "]\n";
  for (const auto& [name, sig] : m.api) {
    os << "api " << name;
    print_params(os, sig.params);
    print_declassify(os, sig.declassified);
    os << "\n";
  }
  for (const auto& [name, f] : m.functions) {
    os << "\n" << print_function(f);
  }
  return os.str();
}

}  // namespace rct::ir
