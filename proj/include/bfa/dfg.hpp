#pragma once

// Data-flow graphs over instruction addresses. Nodes are instructions,
// edges connect a write to a later read of the same channel (a canonical
// register name or "mem"). Scope records whether the flow was observed
// within one activation, across activations, or both.

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "bfa/isa.hpp"

namespace bfa {

enum class Scope : uint8_t { Intra = 1, Inter = 2, Both = 3 };

inline Scope scope_union(Scope a, Scope b) {
    return static_cast<Scope>(static_cast<uint8_t>(a) | static_cast<uint8_t>(b));
}
inline bool scope_has_intra(Scope s) {
    return static_cast<uint8_t>(s) & static_cast<uint8_t>(Scope::Intra);
}
const std::string& scope_name(Scope s);
Scope scope_from_name(std::string_view name);

struct Edge {
    uint64_t src = 0;
    uint64_t dst = 0;
    std::string channel;

    auto operator<=>(const Edge&) const = default;
};

struct DataFlowGraph {
    std::set<uint64_t> nodes;
    std::map<Edge, Scope> edges;

    void add_edge(uint64_t src, uint64_t dst, const std::string& channel, Scope sc);
    bool has_edge(uint64_t src, uint64_t dst, std::string_view channel) const;
    const Scope* edge_scope(uint64_t src, uint64_t dst, std::string_view channel) const;

    bool operator==(const DataFlowGraph&) const = default;
};

// Alias classes: where a pointer's value came from.
enum class Origin : uint8_t { Stack, Heap, Foreign, Global, Unknown };

const std::string& origin_name(Origin o);  // "stack", "heap", ...
char origin_letter(Origin o);              // 'S', 'H', 'F', 'G', 'U'
Origin origin_from_name(std::string_view name);

struct DfgError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string dfg_to_json(const DataFlowGraph& g);
DataFlowGraph dfg_from_json(std::string_view text);

}  // namespace bfa
