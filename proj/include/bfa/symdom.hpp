#pragma once

// Symbolic value and address domain for the static analysis. Values are
// affine: a constant, or one symbol plus a constant offset; anything else
// is Top. Symbols are keyed by their creation site so repeated abstract
// interpretation passes mint identical symbols and the fixpoint is stable.

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include "bfa/isa.hpp"

namespace bfa {

struct AnalysisConfig {
    bool c1 = false;  // treat calls as transparent for live state
    bool c2 = false;  // callees restore rsp; stack memory survives calls
    bool f = false;   // distinguish fields: keep offsets within a region
    unsigned fixpoint_k = 4;  // visit budget multiplier per block
};

AnalysisConfig preset_baseline();
AnalysisConfig preset_angr_cf();  // c1, c2 and f together
std::optional<AnalysisConfig> preset_by_name(std::string_view name);
std::string preset_name(const AnalysisConfig& cfg);  // "baseline", "angr-cf", "c1c2", ...

enum class SymKind : uint8_t { Reg0, CallRet, CallClobber, MemInit };

struct SymId {
    SymKind kind = SymKind::Reg0;
    uint64_t site = 0;  // creating instruction (0 for entry values)
    uint8_t reg = 0;    // Reg index for Reg0 / CallClobber

    auto operator<=>(const SymId&) const = default;
};

SymId sym_reg0(Reg r);
SymId sym_call_ret(uint64_t site);
SymId sym_call_clobber(uint64_t site, Reg r);
SymId sym_mem_init(uint64_t site);

// The stack is rooted at the entry rsp (and a conventional frame pointer).
bool is_stack_root(const SymId& s);

enum class SVKind : uint8_t { Const, Sym, Top };

struct SymValue {
    SVKind kind = SVKind::Top;
    uint64_t c = 0;    // Const payload
    SymId base{};      // Sym payload
    int64_t off = 0;   // Sym payload

    bool operator==(const SymValue&) const = default;
};

SymValue sv_const(uint64_t v);
SymValue sv_sym(SymId base, int64_t off = 0);
SymValue sv_top();
SymValue sv_add(const SymValue& v, int64_t k);
SymValue sv_join(const SymValue& a, const SymValue& b);  // equal or Top

// Where a collapsed (unknown, field-insensitive) pointer is assumed to
// point. One shared cell, disjoint from every real region.
inline constexpr uint64_t kCollapsedAddr = 0x0dead000;

enum class AAKind : uint8_t {
    Concrete,    // exact numeric range
    Region,      // exact offset within a symbolic region
    RegionCell,  // somewhere in a symbolic region, offsets conflated
    Collapsed,   // the shared unknown-pointer cell
    TopRegion,   // no idea: may alias anything
};

struct AbsAddress {
    AAKind kind = AAKind::TopRegion;
    uint64_t conc = 0;   // Concrete
    SymId region{};      // Region / RegionCell
    int64_t off = 0;     // Region
    unsigned width = 0;

    auto operator<=>(const AbsAddress&) const = default;
};

AbsAddress aa_concrete(uint64_t addr, unsigned width);
AbsAddress aa_region(SymId region, int64_t off, unsigned width);
AbsAddress aa_region_cell(SymId region, unsigned width);
AbsAddress aa_collapsed(unsigned width);
AbsAddress aa_top(unsigned width);

// True for addresses precise enough to kill shadowed definitions.
bool aa_exact(const AbsAddress& a);

enum class AliasVerdict : uint8_t { Must, May, No };

AliasVerdict alias(const AbsAddress& a, const AbsAddress& b);

// a certainly overwrites every byte of b (both exact, same basis).
bool must_cover(const AbsAddress& a, const AbsAddress& b);

}  // namespace bfa
