#pragma once

// Text format for programs, shared by the generator output, bundled test
// inputs, and the command-line tools. One instruction per line, Intel
// operand order. Labels sit on their own line; a label referenced by a
// branch is local to the enclosing function, any other label starts a new
// function. Lines may carry an explicit hex address ("bb8e: mov ...");
// addresses must be strictly increasing. Globals are declared with
// ".global name addr size". Comments run from ';' or '#' to end of line.

#include <string_view>

#include "bfa/isa.hpp"

namespace bfa {

enum class ParseErrorKind { Syntax, DuplicateLabel, UnknownMnemonic };

struct ParseError : std::runtime_error {
    ParseError(ParseErrorKind k, int line_no, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg),
          kind(k),
          line(line_no) {}
    ParseErrorKind kind;
    int line;
};

Program parse_program(std::string_view text);

// Parses a single instruction line (no label, optional leading address).
Instruction parse_instruction(std::string_view line);

}  // namespace bfa
