#pragma once

// Dynamic data-flow graph construction from execution traces, plus the
// normalizations that make the per-function view comparable to a static
// result: save/restore reconnection, clear-idiom elimination, and pointer
// origin identification. Both normalizations are idempotent.

#include <vector>

#include "bfa/dfg.hpp"
#include "bfa/interp.hpp"

namespace bfa {

// Byte-granular last-writer replay over every trace. An edge (w -> r, ch)
// means some byte written by w was read by r before being overwritten;
// its scope is Intra when that happened inside one activation, Inter when
// it crossed activations, Both when both were observed.
DataFlowGraph build_interprocedural_dfg(const std::vector<Trace>& traces);

// Keeps the flows of one function: edges with both endpoints inside fn
// whose scope includes Intra. Throws DfgError when the program has no such
// function.
DataFlowGraph extract_intraprocedural(const DataFlowGraph& g, const Program& prog,
                                      std::string_view function);

// Rewires register values that ride through a spill slot: when an
// activation saves a register (push, or a full-width store) and later
// restores the same register from the same untouched slot, readers of the
// restored value are connected straight to the original definition and the
// through-stack chain is dropped. Applies to the interprocedural graph so
// per-function extraction sees the direct edges.
void reconnect_save_restore(DataFlowGraph& g, const std::vector<Trace>& traces,
                            const Program& prog);

// xor r, r and sub r, r produce a constant; the apparent read of r is not a
// dependency. Removes incoming edges on r's channel at such instructions.
void eliminate_clear_idioms(DataFlowGraph& g, const Program& prog);

// Classifies the pointer each endpoint dereferences by walking value
// sources backwards through the graph: stack and frame pointers map to
// Stack, allocator results to Heap, argument registers to Foreign, constant
// addresses to Global, anything mixed to Unknown.
std::pair<Origin, Origin> identify_alias_class(const DataFlowGraph& g,
                                               const Program& prog,
                                               uint64_t write_addr,
                                               uint64_t read_addr);

}  // namespace bfa
