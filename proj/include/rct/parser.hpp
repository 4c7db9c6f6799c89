#pragma once

#include <string>

#include "rct/ir.hpp"

namespace rct::ir {

// Parses the textual IR (one instruction per line, `{}` blocks, `#` comments).
// Throws Error(ErrKind::Parse) with line/column, or ErrKind::Scope for
// unresolved names. parse(print(m)) is the identity.
Module parse_module(const std::string& text);

std::string print_module(const Module& m);
std::string print_function(const Function& f);

}  // namespace rct::ir
