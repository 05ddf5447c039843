#include "bfa/staticflow.hpp"

#include <variant>

#include "bfa/cfg.hpp"

namespace bfa {

namespace {

size_t ridx(Reg r) { return static_cast<size_t>(r); }

bool covers_register(const RegRef& ref) {
    return ref.width == 8 || (ref.width == 4 && ref.off == 0);
}

// Value visible through a register window. Constants narrow bit-exactly;
// a 32-bit view keeps a symbol's identity (pointers never live there in
// narrower slices).
SymValue read_reg_value(const AbsState& st, const RegRef& ref) {
    const SymValue& v = st.reg_val[ridx(ref.base)];
    if (ref.width == 8) return v;
    if (v.kind == SVKind::Const) {
        uint64_t mask = ref.width == 4 ? 0xffffffffu
                        : ref.width == 2
                            ? 0xffffu
                            : 0xffu;
        return sv_const((v.c >> (ref.off * 8)) & mask);
    }
    if (ref.width == 4 && ref.off == 0) return v;
    return sv_top();
}

void write_reg(AbsState& st, const RegRef& ref, const SymValue& v,
               uint64_t site) {
    if (covers_register(ref)) {
        SymValue stored = v;
        if (ref.width == 4 && v.kind == SVKind::Const)
            stored = sv_const(v.c & 0xffffffffu);
        st.reg_val[ridx(ref.base)] = stored;
        for (auto& d : st.reg_def[ridx(ref.base)]) d = {site};
    } else {
        st.reg_val[ridx(ref.base)] = sv_top();
        for (unsigned b = ref.off; b < unsigned(ref.off) + ref.width; ++b)
            st.reg_def[ridx(ref.base)][b] = {site};
    }
}

void use_reg(const AbsState& st, Reg r, unsigned off, unsigned width,
             uint64_t at, DataFlowGraph* out) {
    if (!out) return;
    for (unsigned b = off; b < off + width; ++b)
        for (uint64_t def : st.reg_def[ridx(r)][b])
            out->add_edge(def, at, reg_name(r), Scope::Intra);
}

void use_reg(const AbsState& st, const RegRef& ref, uint64_t at,
             DataFlowGraph* out) {
    use_reg(st, ref.base, ref.off, ref.width, at, out);
}

// Symbolic value of a base+index*scale+disp expression, recording the
// address-register reads. Affine in at most one symbol; anything richer
// degrades to Top.
SymValue address_value(const AbsState& st, const Instruction& in,
                       const MemExpr& m, DataFlowGraph* out) {
    SymValue v = sv_const(0);
    if (m.base) {
        if (*m.base == Reg::rip) {
            // Good enough for aliasing: rip-relative targets are keyed by
            // displacement alone, consistently across sites.
            v = sv_const(0);
        } else {
            use_reg(st, *m.base, 0, 8, in.addr, out);
            v = st.reg_val[ridx(*m.base)];
        }
    }
    if (m.index) {
        use_reg(st, *m.index, 0, 8, in.addr, out);
        const SymValue iv = st.reg_val[ridx(*m.index)];
        if (iv.kind == SVKind::Const) {
            v = sv_add(v, static_cast<int64_t>(iv.c) * m.scale);
        } else if (iv.kind == SVKind::Sym && m.scale == 1 &&
                   v.kind == SVKind::Const) {
            v = sv_add(iv, static_cast<int64_t>(v.c));
        } else {
            v = sv_top();
        }
    }
    return sv_add(v, m.disp);
}

AbsAddress address_of(const SymValue& v, unsigned width,
                      const AnalysisConfig& cfg) {
    switch (v.kind) {
        case SVKind::Const:
            return aa_concrete(v.c, width);
        case SVKind::Sym:
            if (is_stack_root(v.base) || cfg.f)
                return aa_region(v.base, v.off, width);
            return aa_region_cell(v.base, width);
        case SVKind::Top:
            break;
    }
    return cfg.f ? aa_top(width) : aa_collapsed(width);
}

// Memory read: edges from every definition the address may alias. Exact
// cells remember their contents; a first load of an untouched exact cell
// mints a MemInit symbol and memoizes it so later loads agree.
SymValue load_mem(AbsState& st, const AbsAddress& addr, uint64_t at,
                  DataFlowGraph* out) {
    if (out) {
        for (const MemDef& d : st.mem_defs)
            if (alias(addr, d.addr) != AliasVerdict::No)
                out->add_edge(d.instr, at, "mem", Scope::Intra);
    }
    if (!aa_exact(addr)) return sv_top();
    auto it = st.mem_vals.find(addr);
    if (it != st.mem_vals.end()) return it->second;
    SymValue fresh = sv_sym(sym_mem_init(at));
    st.mem_vals.emplace(addr, fresh);
    return fresh;
}

// Memory write. Exact stores strongly kill definitions they fully cover
// and displace overlapping cells; imprecise stores only accumulate.
void store_mem(AbsState& st, const AbsAddress& addr, const SymValue& v,
               uint64_t at) {
    if (aa_exact(addr)) {
        std::erase_if(st.mem_defs, [&](const MemDef& d) {
            return must_cover(addr, d.addr);
        });
        for (auto it = st.mem_vals.begin(); it != st.mem_vals.end();) {
            if (!(it->first == addr) &&
                alias(addr, it->first) != AliasVerdict::No)
                it = st.mem_vals.erase(it);
            else
                ++it;
        }
        st.mem_vals[addr] = v;
    }
    st.mem_defs.insert(MemDef{at, addr});
}

SymValue operand_value(AbsState& st, const Instruction& in, const Operand& op,
                       const AnalysisConfig& cfg, DataFlowGraph* out) {
    if (const auto* r = std::get_if<RegRef>(&op)) {
        use_reg(st, *r, in.addr, out);
        return read_reg_value(st, *r);
    }
    if (const auto* imm = std::get_if<Immediate>(&op))
        return sv_const(static_cast<uint64_t>(imm->value));
    if (const auto* m = std::get_if<MemExpr>(&op)) {
        AbsAddress a =
            address_of(address_value(st, in, *m, out), access_width(in), cfg);
        return load_mem(st, a, in.addr, out);
    }
    return sv_top();
}

SymValue alu_value(Mn mn, const SymValue& lhs, const SymValue& rhs) {
    if (lhs.kind == SVKind::Const && rhs.kind == SVKind::Const) {
        uint64_t a = lhs.c, b = rhs.c;
        switch (mn) {
            case Mn::add: return sv_const(a + b);
            case Mn::sub: return sv_const(a - b);
            case Mn::shl: return sv_const(a << (b & 0x3f));
            case Mn::shr: return sv_const(a >> (b & 0x3f));
            case Mn::bor: return sv_const(a | b);
            case Mn::band: return sv_const(a & b);
            case Mn::bxor: return sv_const(a ^ b);
            default: return sv_top();
        }
    }
    if (mn == Mn::add) {
        if (rhs.kind == SVKind::Const) return sv_add(lhs, static_cast<int64_t>(rhs.c));
        if (lhs.kind == SVKind::Const) return sv_add(rhs, static_cast<int64_t>(lhs.c));
    }
    if (mn == Mn::sub) {
        if (rhs.kind == SVKind::Const) return sv_add(lhs, -static_cast<int64_t>(rhs.c));
        if (lhs.kind == SVKind::Sym && rhs.kind == SVKind::Sym &&
            lhs.base == rhs.base)
            return sv_const(static_cast<uint64_t>(lhs.off - rhs.off));
    }
    return sv_top();
}

}  // namespace

AbsState entry_state() {
    AbsState st;
    for (size_t i = 0; i < kRegCount; ++i)
        st.reg_val[i] = sv_sym(sym_reg0(static_cast<Reg>(i)));
    return st;
}

AbsState join_states(const AbsState& a, const AbsState& b) {
    AbsState r;
    for (size_t i = 0; i < kRegCount; ++i) {
        r.reg_val[i] = sv_join(a.reg_val[i], b.reg_val[i]);
        for (size_t byte = 0; byte < 8; ++byte) {
            r.reg_def[i][byte] = a.reg_def[i][byte];
            r.reg_def[i][byte].insert(b.reg_def[i][byte].begin(),
                                      b.reg_def[i][byte].end());
        }
    }
    r.mem_defs = a.mem_defs;
    r.mem_defs.insert(b.mem_defs.begin(), b.mem_defs.end());
    for (const auto& [addr, val] : a.mem_vals) {
        auto it = b.mem_vals.find(addr);
        if (it != b.mem_vals.end() && it->second == val)
            r.mem_vals.emplace(addr, val);
    }
    return r;
}

AbsAddress resolve_address(const AbsState& st, const Instruction& in,
                           const MemExpr& m, const AnalysisConfig& cfg,
                           DataFlowGraph* out) {
    return address_of(address_value(st, in, m, out), access_width(in), cfg);
}

void apply_call(AbsState& st, const Program& prog, const Instruction& in,
                const AnalysisConfig& cfg) {
    bool internal = false;
    bool allocator = false;
    if (!in.ops.empty()) {
        if (const auto* s = std::get_if<SymbolRef>(&in.ops[0])) {
            internal = prog.function(s->name) != nullptr;
            allocator = !internal && prog.allocator_symbols.count(s->name) > 0;
        } else if (const auto* imm = std::get_if<Immediate>(&in.ops[0])) {
            internal = prog.function_containing(
                           static_cast<uint64_t>(imm->value)) != nullptr;
        }
    }
    const uint64_t site = in.addr;
    auto clobber = [&](Reg r, const SymValue& v) {
        st.reg_val[ridx(r)] = v;
        for (auto& d : st.reg_def[ridx(r)]) d = {site};
    };

    // The returned value is always new state when we model the callee as an
    // allocator; otherwise c1 assumes the callee put everything back.
    if (allocator || !cfg.c1) clobber(Reg::rax, sv_sym(sym_call_ret(site)));
    if (!cfg.c1) {
        for (Reg r : {Reg::rdi, Reg::rsi, Reg::rdx, Reg::rcx, Reg::r8, Reg::r9,
                      Reg::r10, Reg::r11})
            clobber(r, sv_sym(sym_call_clobber(site, r)));
    }
    if (!cfg.c2) clobber(Reg::rsp, sv_top());

    if (!cfg.c1) {
        if (cfg.c2) {
            auto on_stack = [](const AbsAddress& a) {
                return (a.kind == AAKind::Region ||
                        a.kind == AAKind::RegionCell) &&
                       is_stack_root(a.region);
            };
            std::erase_if(st.mem_defs,
                          [&](const MemDef& d) { return !on_stack(d.addr); });
            std::erase_if(st.mem_vals,
                          [&](const auto& kv) { return !on_stack(kv.first); });
        } else {
            st.mem_defs.clear();
            st.mem_vals.clear();
        }
    }
}

void eval_instruction(AbsState& st, const Program& prog, const Instruction& in,
                      const AnalysisConfig& cfg, DataFlowGraph* out) {
    switch (in.mn) {
        case Mn::nop:
        case Mn::jmp:
        case Mn::jz:
        case Mn::jnz:
            return;

        case Mn::cmp:
        case Mn::test:
            operand_value(st, in, in.ops[0], cfg, out);
            operand_value(st, in, in.ops[1], cfg, out);
            return;

        case Mn::mov: {
            if (const auto* dst = std::get_if<RegRef>(&in.ops[0])) {
                SymValue v = operand_value(st, in, in.ops[1], cfg, out);
                write_reg(st, *dst, v, in.addr);
            } else {
                const auto& m = std::get<MemExpr>(in.ops[0]);
                SymValue v = operand_value(st, in, in.ops[1], cfg, out);
                AbsAddress a = address_of(address_value(st, in, m, out),
                                          access_width(in), cfg);
                store_mem(st, a, v, in.addr);
            }
            return;
        }

        case Mn::lea: {
            const auto& dst = std::get<RegRef>(in.ops[0]);
            const auto& m = std::get<MemExpr>(in.ops[1]);
            write_reg(st, dst, address_value(st, in, m, out), in.addr);
            return;
        }

        case Mn::add:
        case Mn::sub:
        case Mn::shl:
        case Mn::shr:
        case Mn::bor:
        case Mn::band:
        case Mn::bxor: {
            if (is_clear_idiom(in)) {
                const auto& dst = std::get<RegRef>(in.ops[0]);
                write_reg(st, dst, sv_const(0), in.addr);
                return;
            }
            if (const auto* dst = std::get_if<RegRef>(&in.ops[0])) {
                SymValue rhs = operand_value(st, in, in.ops[1], cfg, out);
                use_reg(st, *dst, in.addr, out);
                SymValue lhs = read_reg_value(st, *dst);
                write_reg(st, *dst, alu_value(in.mn, lhs, rhs), in.addr);
            } else {
                const auto& m = std::get<MemExpr>(in.ops[0]);
                SymValue rhs = operand_value(st, in, in.ops[1], cfg, out);
                AbsAddress a = address_of(address_value(st, in, m, out),
                                          access_width(in), cfg);
                SymValue lhs = load_mem(st, a, in.addr, out);
                store_mem(st, a, alu_value(in.mn, lhs, rhs), in.addr);
            }
            return;
        }

        case Mn::push: {
            SymValue v = operand_value(st, in, in.ops[0], cfg, out);
            use_reg(st, Reg::rsp, 0, 8, in.addr, out);
            SymValue nsp = sv_add(st.reg_val[ridx(Reg::rsp)], -8);
            st.reg_val[ridx(Reg::rsp)] = nsp;
            for (auto& d : st.reg_def[ridx(Reg::rsp)]) d = {in.addr};
            store_mem(st, address_of(nsp, 8, cfg), v, in.addr);
            return;
        }

        case Mn::pop: {
            use_reg(st, Reg::rsp, 0, 8, in.addr, out);
            AbsAddress slot = address_of(st.reg_val[ridx(Reg::rsp)], 8, cfg);
            SymValue v = load_mem(st, slot, in.addr, out);
            const auto& dst = std::get<RegRef>(in.ops[0]);
            write_reg(st, dst, v, in.addr);
            st.reg_val[ridx(Reg::rsp)] =
                sv_add(st.reg_val[ridx(Reg::rsp)], 8);
            for (auto& d : st.reg_def[ridx(Reg::rsp)]) d = {in.addr};
            return;
        }

        case Mn::call: {
            if (!in.ops.empty())
                if (const auto* r = std::get_if<RegRef>(&in.ops[0]))
                    use_reg(st, *r, in.addr, out);
            use_reg(st, Reg::rsp, 0, 8, in.addr, out);
            apply_call(st, prog, in, cfg);
            return;
        }

        case Mn::ret: {
            use_reg(st, Reg::rsp, 0, 8, in.addr, out);
            AbsAddress slot = address_of(st.reg_val[ridx(Reg::rsp)], 8, cfg);
            load_mem(st, slot, in.addr, out);
            st.reg_val[ridx(Reg::rsp)] =
                sv_add(st.reg_val[ridx(Reg::rsp)], 8);
            for (auto& d : st.reg_def[ridx(Reg::rsp)]) d = {in.addr};
            return;
        }
    }
}

DataFlowGraph analyze_function(const Program& prog, const Function& fn,
                               const AnalysisConfig& cfg) {
    Cfg g = build_cfg(prog, fn);
    const size_t budget =
        static_cast<size_t>(cfg.fixpoint_k) * g.blocks.size();

    std::map<uint64_t, AbsState> in_state;
    in_state.emplace(g.entry, entry_state());
    std::set<uint64_t> work{g.entry};
    size_t visits = 0;

    while (!work.empty()) {
        if (++visits > budget)
            throw StaticError("abstract interpretation of '" + fn.name +
                              "' did not stabilize within " +
                              std::to_string(budget) + " block visits");
        uint64_t leader = *work.begin();
        work.erase(work.begin());
        AbsState st = in_state.at(leader);
        const BasicBlock& bb = g.blocks.at(leader);
        for (uint64_t a : bb.insns)
            eval_instruction(st, prog, *fn.at(a), cfg, nullptr);
        for (uint64_t s : bb.succs) {
            auto it = in_state.find(s);
            if (it == in_state.end()) {
                in_state.emplace(s, st);
                work.insert(s);
            } else {
                AbsState joined = join_states(it->second, st);
                if (!(joined == it->second)) {
                    it->second = std::move(joined);
                    work.insert(s);
                }
            }
        }
    }

    DataFlowGraph out;
    for (const auto& [leader, bb] : g.blocks) {
        auto it = in_state.find(leader);
        if (it == in_state.end()) continue;  // unreachable from entry
        AbsState st = it->second;
        for (uint64_t a : bb.insns) {
            out.nodes.insert(a);
            eval_instruction(st, prog, *fn.at(a), cfg, &out);
        }
    }
    return out;
}

}  // namespace bfa
