#pragma once

// Flow-sensitive abstract interpretation over the symbolic domain.
// Produces a register/memory def-use graph for one function without
// executing it. Precision is controlled by AnalysisConfig:
//   default     every call wipes register and memory state
//   c1          calls leave non-returned state alone
//   c2          rsp is restored by calls and stack slots survive them
//   f           region offsets are kept, so distinct fields don't alias

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "bfa/dfg.hpp"
#include "bfa/isa.hpp"
#include "bfa/symdom.hpp"

namespace bfa {

struct StaticError : std::runtime_error {
    explicit StaticError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MemDef {
    uint64_t instr = 0;
    AbsAddress addr{};

    auto operator<=>(const MemDef&) const = default;
};

using DefSet = std::set<uint64_t>;

struct AbsState {
    std::array<SymValue, kRegCount> reg_val{};
    std::array<std::array<DefSet, 8>, kRegCount> reg_def{};
    std::set<MemDef> mem_defs;
    std::map<AbsAddress, SymValue> mem_vals;  // exact addresses only

    bool operator==(const AbsState&) const = default;
};

// Registers hold their entry symbols (rsp included); memory is unknown.
AbsState entry_state();

AbsState join_states(const AbsState& a, const AbsState& b);

// Evaluates one instruction. When `out` is non-null, def-use edges the
// instruction exercises are added to it (channel = register name or "mem").
void eval_instruction(AbsState& st, const Program& prog, const Instruction& in,
                      const AnalysisConfig& cfg, DataFlowGraph* out);

// Abstract address of a memory operand under `st`; registers read while
// forming the address contribute use edges when `out` is non-null.
AbsAddress resolve_address(const AbsState& st, const Instruction& in,
                           const MemExpr& m, const AnalysisConfig& cfg,
                           DataFlowGraph* out);

// Effect of `call` at `in` on everything but control flow.
void apply_call(AbsState& st, const Program& prog, const Instruction& in,
                const AnalysisConfig& cfg);

// Runs to a fixpoint over the function's CFG (visit budget
// fixpoint_k * |blocks|, StaticError beyond it), then replays one pass to
// collect edges. Scope of every edge is Intra.
DataFlowGraph analyze_function(const Program& prog, const Function& fn,
                               const AnalysisConfig& cfg);

}  // namespace bfa
