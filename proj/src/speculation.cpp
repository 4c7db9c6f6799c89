#include "rct/speculation.hpp"

#include <sstream>

namespace rct::spec {

using ir::Error;
using ir::ErrKind;

Decision Speculator::decide(int site, int occurrence) const {
  switch (kind) {
    case Kind::Never:
      return {};
    case Kind::OnceAll:
      // First dynamic occurrence of every site mispredicts.
      if (occurrence == 0) return {true, window};
      return {};
    case Kind::Scripted:
      for (const auto& t : script) {
        if (t.site == site &&
            (t.occurrence < 0 || t.occurrence == occurrence)) {
          if (t.window < 1)
            throw Error(ErrKind::IllegalInstruction, "speculation window < 1");
          return {true, t.window};
        }
      }
      return {};
  }
  return {};
}

bool Speculator::is_never() const {
  return kind == Kind::Never || (kind == Kind::Scripted && script.empty());
}

std::string Speculator::describe() const {
  switch (kind) {
    case Kind::Never:
      return "never";
    case Kind::OnceAll:
      return "once:" + std::to_string(window);
    case Kind::Scripted: {
      std::ostringstream os;
      os << "script:";
      for (size_t i = 0; i < script.size(); ++i) {
        if (i) os << ";";
        os << script[i].site << "," << script[i].occurrence << ","
           << script[i].window;
      }
      return os.str();
    }
  }
  return "?";
}

Speculator Speculator::once_all(uint64_t w) {
  Speculator s;
  s.kind = Kind::OnceAll;
  s.window = w;
  return s;
}

Speculator Speculator::scripted(std::vector<Trigger> triggers) {
  Speculator s;
  s.kind = Kind::Scripted;
  s.script = std::move(triggers);
  return s;
}

SpeculatorModel SpeculatorModel::never() { return {}; }

SpeculatorModel SpeculatorModel::once_all(uint64_t w) {
  SpeculatorModel m;
  m.kind = Kind::OnceAll;
  m.window = w;
  return m;
}

SpeculatorModel SpeculatorModel::exhaustive(std::vector<uint64_t> windows,
                                            int depth) {
  SpeculatorModel m;
  m.kind = Kind::Exhaustive;
  m.windows = std::move(windows);
  m.depth = depth;
  return m;
}

SpeculatorModel SpeculatorModel::single_site_sweep(
    std::vector<uint64_t> windows) {
  SpeculatorModel m;
  m.kind = Kind::SingleSiteSweep;
  m.windows = std::move(windows);
  return m;
}

SpeculatorModel SpeculatorModel::scripted(
    std::vector<Speculator::Trigger> triggers) {
  SpeculatorModel m;
  m.kind = Kind::Scripted;
  m.script = std::move(triggers);
  return m;
}

namespace {

std::vector<uint64_t> parse_windows(const std::string& s) {
  std::vector<uint64_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, '|'))
    if (!part.empty()) out.push_back(std::stoull(part));
  if (out.empty()) throw Error(ErrKind::Parse, "empty window set");
  return out;
}

}  // namespace

SpeculatorModel SpeculatorModel::parse(const std::string& text) {
  if (text == "never") return never();
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "once") return once_all(std::stoull(rest));
  if (head == "sweep") return single_site_sweep(parse_windows(rest));
  if (head == "exhaustive") {
    auto comma = rest.rfind(',');
    if (comma == std::string::npos)
      throw Error(ErrKind::Parse, "exhaustive:W1|W2,DEPTH");
    return exhaustive(parse_windows(rest.substr(0, comma)),
                      std::stoi(rest.substr(comma + 1)));
  }
  if (head == "script") {
    // site,occurrence,window triples separated by ';'
    std::vector<Speculator::Trigger> trig;
    std::stringstream ss(rest);
    std::string part;
    while (std::getline(ss, part, ';')) {
      if (part.empty()) continue;
      Speculator::Trigger t;
      if (sscanf(part.c_str(), "%d,%d,%llu", &t.site, &t.occurrence,
                 (unsigned long long*)&t.window) != 3)
        throw Error(ErrKind::Parse, "bad script triple '" + part + "'");
      trig.push_back(t);
    }
    return scripted(std::move(trig));
  }
  throw Error(ErrKind::Parse, "unknown speculator model '" + text + "'");
}

std::vector<Speculator> enumerate_speculators(const SpeculatorModel& model,
                                              const ir::WholeProgram& w) {
  int sites = w.num_branch_sites;
  std::vector<Speculator> out;
  switch (model.kind) {
    case SpeculatorModel::Kind::Never:
      out.push_back(Speculator::never());
      return out;
    case SpeculatorModel::Kind::OnceAll:
      out.push_back(Speculator::once_all(model.window));
      return out;
    case SpeculatorModel::Kind::Scripted:
      out.push_back(Speculator::scripted(model.script));
      return out;
    case SpeculatorModel::Kind::SingleSiteSweep: {
      out.push_back(Speculator::never());
      for (int s = 0; s < sites; ++s)
        for (int occ = 0; occ < 2; ++occ)
          for (uint64_t win : model.windows)
            out.push_back(Speculator::scripted({{s, occ, win}}));
      return out;
    }
    case SpeculatorModel::Kind::Exhaustive: {
      // Every assignment of {follow} ∪ windows to the static branch sites:
      // (|windows|+1)^sites speculators.
      uint64_t choices = model.windows.size() + 1;
      uint64_t total = 1;
      for (int s = 0; s < sites; ++s) {
        total *= choices;
        if (total > model.cap)
          throw Error(ErrKind::BudgetExceeded,
                      "exhaustive speculator enumeration exceeds cap");
      }
      for (uint64_t code = 0; code < total; ++code) {
        uint64_t c = code;
        std::vector<Speculator::Trigger> trig;
        for (int s = 0; s < sites; ++s) {
          uint64_t pick = c % choices;
          c /= choices;
          if (pick > 0) trig.push_back({s, -1, model.windows[pick - 1]});
        }
        Speculator sp = Speculator::scripted(std::move(trig));
        sp.max_depth = model.depth;
        out.push_back(std::move(sp));
      }
      return out;
    }
  }
  return out;
}

}  // namespace rct::spec
