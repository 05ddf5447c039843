#include "bfa/symdom.hpp"

namespace bfa {

AnalysisConfig preset_baseline() { return AnalysisConfig{}; }

AnalysisConfig preset_angr_cf() {
    AnalysisConfig cfg;
    cfg.c1 = cfg.c2 = cfg.f = true;
    return cfg;
}

std::optional<AnalysisConfig> preset_by_name(std::string_view name) {
    if (name == "baseline") return preset_baseline();
    if (name == "angr-cf") return preset_angr_cf();
    return std::nullopt;
}

std::string preset_name(const AnalysisConfig& cfg) {
    if (!cfg.c1 && !cfg.c2 && !cfg.f) return "baseline";
    if (cfg.c1 && cfg.c2 && cfg.f) return "angr-cf";
    std::string s;
    if (cfg.c1) s += "c1";
    if (cfg.c2) s += "c2";
    if (cfg.f) s += "f";
    return s;
}

SymId sym_reg0(Reg r) {
    return SymId{SymKind::Reg0, 0, static_cast<uint8_t>(r)};
}

SymId sym_call_ret(uint64_t site) { return SymId{SymKind::CallRet, site, 0}; }

SymId sym_call_clobber(uint64_t site, Reg r) {
    return SymId{SymKind::CallClobber, site, static_cast<uint8_t>(r)};
}

SymId sym_mem_init(uint64_t site) { return SymId{SymKind::MemInit, site, 0}; }

bool is_stack_root(const SymId& s) {
    return s.kind == SymKind::Reg0 && (static_cast<Reg>(s.reg) == Reg::rsp ||
                                       static_cast<Reg>(s.reg) == Reg::rbp);
}

SymValue sv_const(uint64_t v) {
    SymValue s;
    s.kind = SVKind::Const;
    s.c = v;
    return s;
}

SymValue sv_sym(SymId base, int64_t off) {
    SymValue s;
    s.kind = SVKind::Sym;
    s.base = base;
    s.off = off;
    return s;
}

SymValue sv_top() { return SymValue{}; }

SymValue sv_add(const SymValue& v, int64_t k) {
    switch (v.kind) {
        case SVKind::Const:
            return sv_const(v.c + static_cast<uint64_t>(k));
        case SVKind::Sym:
            return sv_sym(v.base, v.off + k);
        case SVKind::Top:
            return sv_top();
    }
    return sv_top();
}

SymValue sv_join(const SymValue& a, const SymValue& b) {
    return a == b ? a : sv_top();
}

AbsAddress aa_concrete(uint64_t addr, unsigned width) {
    AbsAddress a;
    a.kind = AAKind::Concrete;
    a.conc = addr;
    a.width = width;
    return a;
}

AbsAddress aa_region(SymId region, int64_t off, unsigned width) {
    AbsAddress a;
    a.kind = AAKind::Region;
    a.region = region;
    a.off = off;
    a.width = width;
    return a;
}

AbsAddress aa_region_cell(SymId region, unsigned width) {
    AbsAddress a;
    a.kind = AAKind::RegionCell;
    a.region = region;
    a.width = width;
    return a;
}

AbsAddress aa_collapsed(unsigned width) {
    AbsAddress a;
    a.kind = AAKind::Collapsed;
    a.conc = kCollapsedAddr;
    a.width = width;
    return a;
}

AbsAddress aa_top(unsigned width) {
    AbsAddress a;
    a.width = width;
    return a;
}

bool aa_exact(const AbsAddress& a) {
    return a.kind == AAKind::Concrete || a.kind == AAKind::Region;
}

namespace {

bool ranges_intersect(int64_t a, unsigned aw, int64_t b, unsigned bw) {
    return a < b + static_cast<int64_t>(bw) && b < a + static_cast<int64_t>(aw);
}

}  // namespace

AliasVerdict alias(const AbsAddress& a, const AbsAddress& b) {
    if (a.kind == AAKind::TopRegion || b.kind == AAKind::TopRegion)
        return AliasVerdict::May;
    if (a.kind == AAKind::Collapsed || b.kind == AAKind::Collapsed)
        return a.kind == b.kind ? AliasVerdict::Must : AliasVerdict::No;
    if (a.kind == AAKind::RegionCell || b.kind == AAKind::RegionCell) {
        if (a.kind == b.kind)
            return a.region == b.region ? AliasVerdict::Must : AliasVerdict::No;
        const AbsAddress& cell = a.kind == AAKind::RegionCell ? a : b;
        const AbsAddress& other = a.kind == AAKind::RegionCell ? b : a;
        if (other.kind == AAKind::Region && other.region == cell.region)
            return AliasVerdict::May;
        return AliasVerdict::No;
    }
    if (a.kind == AAKind::Concrete && b.kind == AAKind::Concrete) {
        return ranges_intersect(static_cast<int64_t>(a.conc), a.width,
                                static_cast<int64_t>(b.conc), b.width)
                   ? AliasVerdict::Must
                   : AliasVerdict::No;
    }
    if (a.kind == AAKind::Region && b.kind == AAKind::Region) {
        if (a.region != b.region) return AliasVerdict::No;
        return ranges_intersect(a.off, a.width, b.off, b.width)
                   ? AliasVerdict::Must
                   : AliasVerdict::No;
    }
    return AliasVerdict::No;  // concrete vs. symbolic region
}

bool must_cover(const AbsAddress& a, const AbsAddress& b) {
    if (!aa_exact(a) || !aa_exact(b) || a.kind != b.kind) return false;
    if (a.kind == AAKind::Concrete) {
        return a.conc <= b.conc && b.conc + b.width <= a.conc + a.width;
    }
    if (a.region != b.region) return false;
    return a.off <= b.off &&
           b.off + static_cast<int64_t>(b.width) <=
               a.off + static_cast<int64_t>(a.width);
}

}  // namespace bfa
