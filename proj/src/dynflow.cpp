#include "bfa/dynflow.hpp"

#include <array>
#include <optional>
#include <unordered_map>

namespace bfa {

namespace {

struct Writer {
    uint64_t instr = 0;
    uint32_t ctx = 0;
};

Scope scope_of(uint32_t wctx, uint32_t rctx) {
    return wctx == rctx ? Scope::Intra : Scope::Inter;
}

// Full-width register spills and reloads.
std::optional<Reg> save_source(const Instruction& in) {
    if (in.mn == Mn::push) {
        if (const auto* r = std::get_if<RegRef>(&in.ops[0]); r && r->width == 8)
            return r->base;
    }
    if (in.mn == Mn::mov && in.ops.size() == 2 &&
        std::holds_alternative<MemExpr>(in.ops[0])) {
        if (const auto* r = std::get_if<RegRef>(&in.ops[1]); r && r->width == 8)
            return r->base;
    }
    return std::nullopt;
}

std::optional<Reg> restore_target(const Instruction& in) {
    if (in.mn == Mn::pop) {
        if (const auto* r = std::get_if<RegRef>(&in.ops[0]); r && r->width == 8)
            return r->base;
    }
    if (in.mn == Mn::mov && in.ops.size() == 2 &&
        std::holds_alternative<MemExpr>(in.ops[1])) {
        if (const auto* r = std::get_if<RegRef>(&in.ops[0]); r && r->width == 8)
            return r->base;
    }
    return std::nullopt;
}

// Which channels feed the value that `w` wrote on channel `ch`. Address
// registers never count: they select where, not what.
std::vector<std::string> value_sources(const Instruction& w, const std::string& ch) {
    auto src_channels = [](const Operand& op) -> std::vector<std::string> {
        if (const auto* r = std::get_if<RegRef>(&op)) return {reg_name(r->base)};
        if (std::holds_alternative<MemExpr>(op)) return {"mem"};
        return {};
    };
    switch (w.mn) {
        case Mn::push:
        case Mn::pop:
        case Mn::call:
        case Mn::ret:
            if (ch == "rsp") return {"rsp"};
            if (w.mn == Mn::push && ch == "mem") return src_channels(w.ops[0]);
            if (w.mn == Mn::pop) return {"mem"};
            return {};
        case Mn::mov:
            return src_channels(w.ops[1]);
        case Mn::lea: {
            std::vector<std::string> out;
            const auto& m = std::get<MemExpr>(w.ops[1]);
            if (m.base && *m.base != Reg::rip) out.push_back(reg_name(*m.base));
            if (m.index) out.push_back(reg_name(*m.index));
            return out;
        }
        case Mn::add:
        case Mn::sub:
        case Mn::shl:
        case Mn::shr:
        case Mn::bor:
        case Mn::band:
        case Mn::bxor: {
            if (is_clear_idiom(w)) return {};
            std::vector<std::string> out;
            if (std::holds_alternative<MemExpr>(w.ops[0]))
                out.push_back("mem");
            else
                out.push_back(reg_name(std::get<RegRef>(w.ops[0]).base));
            for (const auto& c : src_channels(w.ops[1])) out.push_back(c);
            return out;
        }
        default:
            return {};
    }
}

}  // namespace

DataFlowGraph build_interprocedural_dfg(const std::vector<Trace>& traces) {
    DataFlowGraph g;
    for (const Trace& t : traces) {
        std::array<std::array<std::optional<Writer>, 8>, kRegCount> rw{};
        std::unordered_map<uint64_t, Writer> mw;
        for (const TraceEvent& e : t.events) {
            g.nodes.insert(e.instr);
            if (e.channel == "mem") {
                if (e.access == Access::Read) {
                    for (uint64_t b = e.location; b < e.location + e.size; ++b) {
                        auto it = mw.find(b);
                        if (it != mw.end())
                            g.add_edge(it->second.instr, e.instr, "mem",
                                       scope_of(it->second.ctx, e.context));
                    }
                } else {
                    for (uint64_t b = e.location; b < e.location + e.size; ++b)
                        mw[b] = Writer{e.instr, e.context};
                }
            } else {
                size_t idx = e.location / 8;
                size_t off = e.location % 8;
                if (e.access == Access::Read) {
                    for (size_t b = off; b < off + e.size && b < 8; ++b) {
                        const auto& w = rw[idx][b];
                        if (w)
                            g.add_edge(w->instr, e.instr, e.channel,
                                       scope_of(w->ctx, e.context));
                    }
                } else {
                    for (size_t b = off; b < off + e.size && b < 8; ++b)
                        rw[idx][b] = Writer{e.instr, e.context};
                }
            }
        }
    }
    return g;
}

DataFlowGraph extract_intraprocedural(const DataFlowGraph& g, const Program& prog,
                                      std::string_view function) {
    const Function* fn = prog.function(function);
    if (!fn)
        throw DfgError("no function named '" + std::string(function) +
                       "' to extract");
    DataFlowGraph out;
    for (uint64_t n : g.nodes)
        if (fn->contains(n)) out.nodes.insert(n);
    for (const auto& [e, sc] : g.edges) {
        if (!scope_has_intra(sc)) continue;
        if (!fn->contains(e.src) || !fn->contains(e.dst)) continue;
        out.add_edge(e.src, e.dst, e.channel, Scope::Intra);
    }
    return out;
}

void reconnect_save_restore(DataFlowGraph& g, const std::vector<Trace>& traces,
                            const Program& prog) {
    struct SaveRec {
        uint64_t save_instr = 0;
        uint32_t ctx = 0;
        Reg reg = Reg::rax;
        std::optional<Writer> value_writer;  // same writer across all 8 bytes
    };
    struct Pending {
        uint64_t restore_instr = 0;
        Writer orig;
        bool armed = false;
    };

    std::set<Edge> removable, must_keep;
    std::map<Edge, Scope> additions;

    for (const Trace& t : traces) {
        std::array<std::array<std::optional<Writer>, 8>, kRegCount> rw{};
        std::unordered_map<uint64_t, SaveRec> saves;  // slot -> active save
        std::array<std::optional<Pending>, kRegCount> pending{};
        // Armed by a matching slot load, consumed by the write that follows.
        std::optional<std::pair<Reg, SaveRec>> hit;

        std::unordered_map<uint64_t, Writer> mw;
        for (const TraceEvent& e : t.events) {
            const Instruction* in = prog.instruction(e.instr);
            if (e.channel == "mem") {
                if (e.access == Access::Write) {
                    // Any overlapping store breaks an active save.
                    for (auto it = saves.begin(); it != saves.end();) {
                        if (e.location < it->first + 8 &&
                            e.location + e.size > it->first)
                            it = saves.erase(it);
                        else
                            ++it;
                    }
                    for (uint64_t b = e.location; b < e.location + e.size; ++b)
                        mw[b] = Writer{e.instr, e.context};
                    if (in && e.size == 8) {
                        if (auto reg = save_source(*in)) {
                            SaveRec rec{e.instr, e.context, *reg, std::nullopt};
                            const auto& bytes = rw[static_cast<size_t>(*reg)];
                            if (bytes[0]) {
                                bool same = true;
                                for (int b = 1; b < 8; ++b)
                                    if (!bytes[b] || bytes[b]->instr != bytes[0]->instr ||
                                        bytes[b]->ctx != bytes[0]->ctx)
                                        same = false;
                                if (same) rec.value_writer = *bytes[0];
                            }
                            saves[e.location] = rec;
                        }
                    }
                } else {
                    bool paired = false;
                    if (in && e.size == 8) {
                        if (auto reg = restore_target(*in)) {
                            auto it = saves.find(e.location);
                            if (it != saves.end() && it->second.reg == *reg &&
                                it->second.ctx == e.context &&
                                it->second.value_writer.has_value()) {
                                hit = {*reg, it->second};
                                removable.insert(
                                    Edge{it->second.save_instr, e.instr, "mem"});
                                paired = true;
                            }
                        }
                    }
                    if (!paired) {
                        // Ordinary load: whatever feeds it must survive.
                        for (uint64_t b = e.location; b < e.location + e.size; ++b) {
                            auto it = mw.find(b);
                            if (it != mw.end())
                                must_keep.insert(
                                    Edge{it->second.instr, e.instr, "mem"});
                        }
                    }
                }
            } else {
                size_t idx = e.location / 8;
                size_t off = e.location % 8;
                if (e.access == Access::Write) {
                    for (size_t b = off; b < off + e.size && b < 8; ++b)
                        rw[idx][b] = Writer{e.instr, e.context};
                    auto& p = pending[idx];
                    if (hit && static_cast<size_t>(hit->first) == idx && in &&
                        restore_target(*in)) {
                        p = Pending{e.instr, *hit->second.value_writer, true};
                        hit.reset();
                    } else {
                        p.reset();
                    }
                } else {
                    const auto& p = pending[idx];
                    if (p && p->armed) {
                        removable.insert(Edge{p->restore_instr, e.instr, e.channel});
                        Edge direct{p->orig.instr, e.instr, e.channel};
                        Scope sc = scope_of(p->orig.ctx, e.context);
                        auto [it, fresh] = additions.emplace(direct, sc);
                        if (!fresh) it->second = scope_union(it->second, sc);
                    } else {
                        for (size_t b = off; b < off + e.size && b < 8; ++b) {
                            const auto& w = rw[idx][b];
                            if (w) must_keep.insert(Edge{w->instr, e.instr, e.channel});
                        }
                    }
                }
            }
        }
    }

    for (const Edge& e : removable)
        if (!must_keep.count(e)) g.edges.erase(e);
    for (const auto& [e, sc] : additions) g.add_edge(e.src, e.dst, e.channel, sc);
}

void eliminate_clear_idioms(DataFlowGraph& g, const Program& prog) {
    for (uint64_t n : g.nodes) {
        const Instruction* in = prog.instruction(n);
        Reg reg;
        if (!in || !is_clear_idiom(*in, &reg)) continue;
        const std::string& ch = reg_name(reg);
        for (auto it = g.edges.begin(); it != g.edges.end();) {
            if (it->first.dst == n && it->first.channel == ch)
                it = g.edges.erase(it);
            else
                ++it;
        }
    }
}

namespace {

constexpr uint32_t kHeapTag = 1u << 16;

uint32_t reg_tag(Reg r) { return 1u << static_cast<unsigned>(r); }

uint32_t arg_tags() {
    return reg_tag(Reg::rdi) | reg_tag(Reg::rsi) | reg_tag(Reg::rdx) |
           reg_tag(Reg::rcx) | reg_tag(Reg::r8) | reg_tag(Reg::r9);
}

Origin origin_from_tags(uint32_t tags) {
    if (tags == 0) return Origin::Global;
    if (tags == kHeapTag) return Origin::Heap;
    if (tags == reg_tag(Reg::rsp)) return Origin::Stack;
    if ((tags & ~arg_tags()) == 0) return Origin::Foreign;
    return Origin::Unknown;
}

Origin classify_endpoint(const DataFlowGraph& g, const Program& prog,
                         uint64_t addr) {
    const Instruction* in = prog.instruction(addr);
    if (!in) throw DfgError("no instruction at the requested address");
    if (in->mn == Mn::push || in->mn == Mn::pop || in->mn == Mn::call ||
        in->mn == Mn::ret)
        return Origin::Stack;
    const MemExpr* m = in->mem_operand();
    if (!m) throw DfgError("instruction does not access memory");
    if (!m->base || *m->base == Reg::rip) return Origin::Global;

    std::map<std::pair<uint64_t, std::string>, std::vector<uint64_t>> incoming;
    for (const auto& [e, sc] : g.edges)
        incoming[{e.dst, e.channel}].push_back(e.src);

    uint32_t tags = 0;
    std::set<std::pair<uint64_t, std::string>> seen;
    std::vector<std::pair<uint64_t, std::string>> work{{addr, reg_name(*m->base)}};
    while (!work.empty()) {
        auto [n, ch] = work.back();
        work.pop_back();
        if (!seen.insert({n, ch}).second) continue;
        auto it = incoming.find({n, ch});
        if (it == incoming.end() || it->second.empty()) {
            if (ch != "mem") {
                auto rr = lookup_reg(ch);
                if (rr && rr->base != Reg::rip) tags |= reg_tag(rr->base);
            }
            continue;
        }
        for (uint64_t src : it->second) {
            const Instruction* wi = prog.instruction(src);
            if (!wi) continue;
            if (wi->mn == Mn::call && ch == "rax") {
                // The external model wrote rax at the call site.
                const auto* sym = std::get_if<SymbolRef>(&wi->ops[0]);
                bool alloc = sym && prog.allocator_symbols.count(sym->name) &&
                             !prog.function(sym->name);
                if (alloc) tags |= kHeapTag;
                continue;
            }
            for (const auto& vc : value_sources(*wi, ch)) work.push_back({src, vc});
        }
    }
    return origin_from_tags(tags);
}

}  // namespace

std::pair<Origin, Origin> identify_alias_class(const DataFlowGraph& g,
                                               const Program& prog,
                                               uint64_t write_addr,
                                               uint64_t read_addr) {
    return {classify_endpoint(g, prog, write_addr),
            classify_endpoint(g, prog, read_addr)};
}

}  // namespace bfa
