#pragma once

// Per-function control-flow graph. ret and jmp end a block; call does not.
// Conditional branches fall through. Branch targets must land on an
// instruction of the same function.

#include <map>

#include "bfa/isa.hpp"

namespace bfa {

struct BasicBlock {
    uint64_t leader = 0;
    std::vector<uint64_t> insns;  // instruction addresses in order
    std::vector<uint64_t> succs;  // leader addresses of successor blocks
};

struct Cfg {
    uint64_t entry = 0;
    std::map<uint64_t, BasicBlock> blocks;  // keyed by leader address
};

struct CfgError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resolves the target of jmp/jz/jnz/call to an address: either an immediate
// address or a label/function name. Returns nullopt for indirect or
// unresolvable symbolic targets (external callees).
std::optional<uint64_t> branch_target(const Program& prog, const Function& fn,
                                      const Instruction& in);

Cfg build_cfg(const Program& prog, const Function& fn);

}  // namespace bfa
