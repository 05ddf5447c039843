#include "bfa/dfg.hpp"

#include <array>

#include <json.hpp>

namespace bfa {

namespace {
using ordered_json = nlohmann::ordered_json;

const std::array<std::string, 4> kScopeNames = {"?", "intra", "inter", "both"};
const std::array<std::string, 5> kOriginNames = {"stack", "heap", "foreign",
                                                 "global", "unknown"};
constexpr char kOriginLetters[] = {'S', 'H', 'F', 'G', 'U'};
}  // namespace

const std::string& scope_name(Scope s) {
    return kScopeNames[static_cast<uint8_t>(s)];
}

Scope scope_from_name(std::string_view name) {
    for (uint8_t i = 1; i <= 3; ++i)
        if (name == kScopeNames[i]) return static_cast<Scope>(i);
    throw DfgError("unknown scope '" + std::string(name) + "'");
}

const std::string& origin_name(Origin o) {
    return kOriginNames[static_cast<uint8_t>(o)];
}

char origin_letter(Origin o) { return kOriginLetters[static_cast<uint8_t>(o)]; }

Origin origin_from_name(std::string_view name) {
    for (uint8_t i = 0; i < kOriginNames.size(); ++i)
        if (name == kOriginNames[i]) return static_cast<Origin>(i);
    throw DfgError("unknown alias origin '" + std::string(name) + "'");
}

void DataFlowGraph::add_edge(uint64_t src, uint64_t dst, const std::string& channel,
                             Scope sc) {
    nodes.insert(src);
    nodes.insert(dst);
    auto [it, fresh] = edges.emplace(Edge{src, dst, channel}, sc);
    if (!fresh) it->second = scope_union(it->second, sc);
}

bool DataFlowGraph::has_edge(uint64_t src, uint64_t dst,
                             std::string_view channel) const {
    return edge_scope(src, dst, channel) != nullptr;
}

const Scope* DataFlowGraph::edge_scope(uint64_t src, uint64_t dst,
                                       std::string_view channel) const {
    auto it = edges.find(Edge{src, dst, std::string(channel)});
    return it == edges.end() ? nullptr : &it->second;
}

std::string dfg_to_json(const DataFlowGraph& g) {
    ordered_json j;
    j["nodes"] = ordered_json::array();
    for (uint64_t n : g.nodes) j["nodes"].push_back(n);
    j["edges"] = ordered_json::array();
    for (const auto& [e, sc] : g.edges) {
        j["edges"].push_back(ordered_json{{"src", e.src},
                                          {"dst", e.dst},
                                          {"channel", e.channel},
                                          {"scope", scope_name(sc)}});
    }
    return j.dump(2) + "\n";
}

DataFlowGraph dfg_from_json(std::string_view text) {
    DataFlowGraph g;
    ordered_json j = ordered_json::parse(text);
    for (const auto& n : j.at("nodes")) g.nodes.insert(n.get<uint64_t>());
    for (const auto& e : j.at("edges")) {
        g.add_edge(e.at("src").get<uint64_t>(), e.at("dst").get<uint64_t>(),
                   e.at("channel").get<std::string>(),
                   scope_from_name(e.at("scope").get<std::string>()));
    }
    return g;
}

}  // namespace bfa
