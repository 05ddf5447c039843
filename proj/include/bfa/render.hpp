#pragma once

// Canonical text renderer. Round-trips with the parser: for any parsed
// instruction i, parse(render(i)) reproduces i exactly.

#include <string>

#include "bfa/isa.hpp"

namespace bfa {

std::string render_instruction(const Instruction& in);
std::string render_mem(const MemExpr& m, bool with_prefix);

// Whole-program listing in the input format. with_addrs prints the explicit
// "hexaddr:" prefix on every instruction line.
std::string render_program(const Program& prog, bool with_addrs);

}  // namespace bfa
