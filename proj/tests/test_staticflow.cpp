#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfa/parse.hpp"
#include "bfa/staticflow.hpp"

using namespace bfa;

namespace {

AnalysisConfig cfg_c1c2() {
    AnalysisConfig cfg;
    cfg.c1 = cfg.c2 = true;
    return cfg;
}

const Function& only_fn(const Program& p, std::string_view name) {
    const Function* f = p.function(name);
    REQUIRE(f != nullptr);
    return *f;
}

}  // namespace

TEST_CASE("presets") {
    AnalysisConfig base = preset_baseline();
    CHECK_FALSE(base.c1);
    CHECK_FALSE(base.c2);
    CHECK_FALSE(base.f);
    CHECK(base.fixpoint_k == 4);

    AnalysisConfig cf = preset_angr_cf();
    CHECK(cf.c1);
    CHECK(cf.c2);
    CHECK(cf.f);

    CHECK(preset_by_name("baseline").has_value());
    CHECK(preset_by_name("angr-cf").has_value());
    CHECK(preset_by_name("angr-cf")->f);
    CHECK_FALSE(preset_by_name("bogus").has_value());
    CHECK(preset_name(base) == "baseline");
    CHECK(preset_name(cf) == "angr-cf");
    CHECK(preset_name(cfg_c1c2()) == "c1c2");
}

TEST_CASE("symbolic values are affine") {
    SymValue v = sv_sym(sym_reg0(Reg::rdi));
    v = sv_add(v, 0x10);
    CHECK(v.kind == SVKind::Sym);
    CHECK(v.off == 0x10);
    v = sv_add(v, -0x18);
    CHECK(v.off == -0x8);

    CHECK(sv_add(sv_const(0x100), 0x20) == sv_const(0x120));
    CHECK(sv_add(sv_top(), 4) == sv_top());

    CHECK(sv_join(sv_const(1), sv_const(1)) == sv_const(1));
    CHECK(sv_join(sv_const(1), sv_const(2)) == sv_top());
    CHECK(sv_join(v, v) == v);
}

TEST_CASE("alias verdicts") {
    SymId rsp0 = sym_reg0(Reg::rsp);
    SymId rdi0 = sym_reg0(Reg::rdi);

    // Exact numeric ranges.
    CHECK(alias(aa_concrete(0x601000, 4), aa_concrete(0x601000, 4)) ==
          AliasVerdict::Must);
    CHECK(alias(aa_concrete(0x601000, 4), aa_concrete(0x601002, 4)) ==
          AliasVerdict::Must);
    CHECK(alias(aa_concrete(0x601000, 4), aa_concrete(0x601004, 4)) ==
          AliasVerdict::No);

    // Exact offsets within a region.
    CHECK(alias(aa_region(rsp0, -8, 8), aa_region(rsp0, -8, 8)) ==
          AliasVerdict::Must);
    CHECK(alias(aa_region(rsp0, -8, 8), aa_region(rsp0, -4, 8)) ==
          AliasVerdict::Must);
    CHECK(alias(aa_region(rsp0, -8, 8), aa_region(rsp0, 0, 8)) ==
          AliasVerdict::No);
    CHECK(alias(aa_region(rsp0, 0, 8), aa_region(rdi0, 0, 8)) ==
          AliasVerdict::No);

    // Field-insensitive cells conflate a whole region.
    CHECK(alias(aa_region_cell(rdi0, 4), aa_region_cell(rdi0, 4)) ==
          AliasVerdict::Must);
    CHECK(alias(aa_region_cell(rdi0, 4), aa_region_cell(rsp0, 4)) ==
          AliasVerdict::No);
    CHECK(alias(aa_region_cell(rdi0, 4), aa_region(rdi0, 8, 4)) ==
          AliasVerdict::May);

    // The collapsed cell aliases only itself; Top may alias anything.
    CHECK(alias(aa_collapsed(8), aa_collapsed(1)) == AliasVerdict::Must);
    CHECK(alias(aa_collapsed(8), aa_region(rsp0, -8, 8)) == AliasVerdict::No);
    CHECK(alias(aa_collapsed(8), aa_concrete(0x601000, 8)) == AliasVerdict::No);
    CHECK(alias(aa_top(8), aa_region(rsp0, -8, 8)) == AliasVerdict::May);
    CHECK(alias(aa_top(8), aa_collapsed(8)) == AliasVerdict::May);

    // Symbolic regions never alias concrete ranges.
    CHECK(alias(aa_region(rdi0, 0, 8), aa_concrete(0x601000, 8)) ==
          AliasVerdict::No);
}

TEST_CASE("must_cover needs exact full-width overlap") {
    SymId rsp0 = sym_reg0(Reg::rsp);
    CHECK(must_cover(aa_region(rsp0, -16, 8), aa_region(rsp0, -16, 8)));
    CHECK(must_cover(aa_region(rsp0, -16, 8), aa_region(rsp0, -12, 4)));
    CHECK_FALSE(must_cover(aa_region(rsp0, -16, 4), aa_region(rsp0, -16, 8)));
    CHECK_FALSE(must_cover(aa_region(rsp0, -16, 8), aa_region(rsp0, -12, 8)));
    CHECK(must_cover(aa_concrete(0x601000, 8), aa_concrete(0x601004, 4)));
    CHECK_FALSE(must_cover(aa_region_cell(rsp0, 8), aa_region_cell(rsp0, 8)));
    CHECK_FALSE(must_cover(aa_top(8), aa_region(rsp0, 0, 8)));
}

TEST_CASE("entry state and joins") {
    AbsState a = entry_state();
    CHECK(a.reg_val[size_t(Reg::rsp)] == sv_sym(sym_reg0(Reg::rsp)));
    CHECK(a.reg_val[size_t(Reg::rdi)] == sv_sym(sym_reg0(Reg::rdi)));
    CHECK(a.reg_def[size_t(Reg::rdi)][0].empty());

    AbsState b = a;
    a.reg_val[size_t(Reg::rax)] = sv_const(5);
    b.reg_val[size_t(Reg::rax)] = sv_const(5);
    a.reg_def[size_t(Reg::rax)][0] = {0x1000};
    b.reg_def[size_t(Reg::rax)][0] = {0x2000};
    SymId rsp0 = sym_reg0(Reg::rsp);
    a.mem_vals[aa_region(rsp0, -8, 8)] = sv_const(1);
    b.mem_vals[aa_region(rsp0, -8, 8)] = sv_const(1);
    a.mem_vals[aa_region(rsp0, -16, 8)] = sv_const(2);
    b.mem_vals[aa_region(rsp0, -16, 8)] = sv_const(3);
    a.mem_defs.insert(MemDef{0x1000, aa_region(rsp0, -8, 8)});
    b.mem_defs.insert(MemDef{0x2000, aa_region(rsp0, -8, 8)});

    AbsState j = join_states(a, b);
    CHECK(j.reg_val[size_t(Reg::rax)] == sv_const(5));
    CHECK(j.reg_def[size_t(Reg::rax)][0] == DefSet{0x1000, 0x2000});
    CHECK(j.mem_vals.count(aa_region(rsp0, -8, 8)) == 1);
    CHECK(j.mem_vals.count(aa_region(rsp0, -16, 8)) == 0);
    CHECK(j.mem_defs.size() == 2);

    b.reg_val[size_t(Reg::rax)] = sv_const(6);
    CHECK(join_states(a, b).reg_val[size_t(Reg::rax)] == sv_top());
}

TEST_CASE("red-zone store/load gives one mem edge") {
    Program p = parse_program(R"(
f:
mov qword ptr [rsp-0x8], rdi
mov rax, qword ptr [rsp-0x8]
ret
)");
    for (const AnalysisConfig& cfg : {preset_baseline(), preset_angr_cf()}) {
        DataFlowGraph g = analyze_function(p, only_fn(p, "f"), cfg);
        CHECK(g.has_edge(0x1000, 0x1004, "mem"));
        CHECK(g.edges.size() == 1);
        CHECK(g.nodes.size() == 3);
    }
}

TEST_CASE("register def-use and clear idioms") {
    Program p = parse_program(R"(
f:
mov rbx, 0x10
add rbx, 0x1
mov rax, rbx
xor rbx, rbx
mov rcx, rbx
ret
)");
    DataFlowGraph g = analyze_function(p, only_fn(p, "f"), preset_baseline());
    CHECK(g.has_edge(0x1000, 0x1004, "rbx"));
    CHECK(g.has_edge(0x1004, 0x1008, "rbx"));
    CHECK_FALSE(g.has_edge(0x1004, 0x100c, "rbx"));  // xor rbx,rbx reads nothing
    CHECK(g.has_edge(0x100c, 0x1010, "rbx"));
    CHECK(g.edges.size() == 3);
}

TEST_CASE("field sensitivity splits a region") {
    Program p = parse_program(R"(
f:
mov dword ptr [rdi], esi
mov eax, dword ptr [rdi+0x8]
mov ebx, dword ptr [rdi]
mov ecx, dword ptr [rdi+0x2]
ret
)");
    const Function& f = only_fn(p, "f");

    DataFlowGraph base = analyze_function(p, f, preset_baseline());
    CHECK(base.has_edge(0x1000, 0x1004, "mem"));  // offsets conflated
    CHECK(base.has_edge(0x1000, 0x1008, "mem"));
    CHECK(base.has_edge(0x1000, 0x100c, "mem"));

    DataFlowGraph cf = analyze_function(p, f, preset_angr_cf());
    CHECK_FALSE(cf.has_edge(0x1000, 0x1004, "mem"));  // disjoint ranges
    CHECK(cf.has_edge(0x1000, 0x1008, "mem"));        // same range
    CHECK(cf.has_edge(0x1000, 0x100c, "mem"));        // overlapping ranges
}

TEST_CASE("exact overwrite kills, partial overwrite does not") {
    Program p = parse_program(R"(
f:
mov qword ptr [rsp-0x10], rdi
mov qword ptr [rsp-0x10], rsi
mov rax, qword ptr [rsp-0x10]
ret
)");
    DataFlowGraph g = analyze_function(p, only_fn(p, "f"), preset_angr_cf());
    CHECK_FALSE(g.has_edge(0x1000, 0x1008, "mem"));
    CHECK(g.has_edge(0x1004, 0x1008, "mem"));

    Program q = parse_program(R"(
f:
mov qword ptr [rsp-0x10], rdi
mov byte ptr [rsp-0x10], sil
mov rax, qword ptr [rsp-0x10]
ret
)");
    DataFlowGraph h = analyze_function(q, only_fn(q, "f"), preset_angr_cf());
    CHECK(h.has_edge(0x1000, 0x1008, "mem"));
    CHECK(h.has_edge(0x1004, 0x1008, "mem"));
}

TEST_CASE("calls wipe the baseline but not the extensions") {
    Program p = parse_program(R"(
f:
sub rsp, 0x10
mov qword ptr [rsp+0x8], rdi
call g
mov rax, qword ptr [rsp+0x8]
add rsp, 0x10
ret
g:
ret
)");
    const Function& f = only_fn(p, "f");

    DataFlowGraph base = analyze_function(p, f, preset_baseline());
    CHECK_FALSE(base.has_edge(0x1004, 0x100c, "mem"));
    CHECK(base.has_edge(0x1000, 0x1004, "rsp"));
    CHECK(base.has_edge(0x1000, 0x1008, "rsp"));
    CHECK(base.has_edge(0x1008, 0x100c, "rsp"));  // the call redefines rsp

    DataFlowGraph cf = analyze_function(p, f, preset_angr_cf());
    CHECK(cf.has_edge(0x1004, 0x100c, "mem"));
    CHECK(cf.has_edge(0x1000, 0x100c, "rsp"));  // rsp survives the call
}

TEST_CASE("foreign pointer across a call") {
    Program p = parse_program(R"(
f:
mov dword ptr [rdi], esi
call g
mov eax, dword ptr [rdi]
ret
g:
ret
)");
    const Function& f = only_fn(p, "f");

    CHECK_FALSE(analyze_function(p, f, preset_baseline())
                    .has_edge(0x1000, 0x1008, "mem"));
    CHECK(analyze_function(p, f, cfg_c1c2()).has_edge(0x1000, 0x1008, "mem"));
    CHECK(analyze_function(p, f, preset_angr_cf())
              .has_edge(0x1000, 0x1008, "mem"));
}

TEST_CASE("allocator result survives a later call only under c1") {
    Program p = parse_program(R"(
f:
mov edi, 0x20
call malloc
mov dword ptr [rax], esi
call g
mov ecx, dword ptr [rax]
ret
g:
ret
)");
    const Function& f = only_fn(p, "f");

    DataFlowGraph cf = analyze_function(p, f, preset_angr_cf());
    CHECK(cf.has_edge(0x1008, 0x1010, "mem"));
    CHECK(cf.has_edge(0x1004, 0x1008, "rax"));  // malloc's result feeds the store
    CHECK(cf.has_edge(0x1004, 0x1010, "rax"));

    DataFlowGraph base = analyze_function(p, f, preset_baseline());
    CHECK_FALSE(base.has_edge(0x1008, 0x1010, "mem"));
    CHECK(base.has_edge(0x1004, 0x1008, "rax"));
    CHECK(base.has_edge(0x100c, 0x1010, "rax"));  // call g re-clobbers rax
}

TEST_CASE("loads through a remembered pointer agree") {
    Program p = parse_program(R"(
f:
mov rax, qword ptr [rbp-0x18]
mov dword ptr [rax+0x28], esi
mov rax, qword ptr [rbp-0x18]
mov ebx, dword ptr [rax+0x28]
ret
)");
    const Function& f = only_fn(p, "f");
    for (const AnalysisConfig& cfg : {preset_baseline(), preset_angr_cf()}) {
        DataFlowGraph g = analyze_function(p, f, cfg);
        CHECK(g.has_edge(0x1004, 0x100c, "mem"));
        CHECK(g.has_edge(0x1000, 0x1004, "rax"));
        CHECK(g.has_edge(0x1008, 0x100c, "rax"));
        CHECK_FALSE(g.has_edge(0x1000, 0x100c, "rax"));
    }
}

TEST_CASE("loop-carried pointers converge and keep the flow") {
    Program p = parse_program(R"(
f:
mov rax, rdi
mov rcx, 0x0
top:
mov byte ptr [rax], dl
add rax, 0x1
add rcx, 0x1
cmp rcx, rsi
jnz top
mov bl, byte ptr [rdi]
ret
)");
    const Function& f = only_fn(p, "f");

    DataFlowGraph cf = analyze_function(p, f, preset_angr_cf());
    CHECK(cf.has_edge(0x1008, 0x101c, "mem"));  // store via advanced pointer
    CHECK(cf.has_edge(0x1000, 0x1008, "rax"));
    CHECK(cf.has_edge(0x100c, 0x1008, "rax"));  // loop-carried definition
    CHECK(cf.has_edge(0x1004, 0x1010, "rcx"));  // first iteration
    CHECK(cf.has_edge(0x1010, 0x1010, "rcx"));  // later iterations
    CHECK(cf.has_edge(0x1010, 0x1014, "rcx"));

    AnalysisConfig starved = preset_angr_cf();
    starved.fixpoint_k = 0;
    CHECK_THROWS_AS(analyze_function(p, f, starved), StaticError);
}

TEST_CASE("push/pop spill restores the saved value") {
    Program p = parse_program(R"(
f:
push rbx
mov rbx, rdi
pop rbx
ret
)");
    const Function& f = only_fn(p, "f");

    DataFlowGraph g = analyze_function(p, f, preset_angr_cf());
    CHECK(g.has_edge(0x1000, 0x1008, "mem"));  // saved slot feeds the reload
    CHECK(g.has_edge(0x1000, 0x1008, "rsp"));
    CHECK(g.has_edge(0x1008, 0x100c, "rsp"));

    AbsState st = entry_state();
    for (const Instruction& in : f.insns) {
        if (in.mn == Mn::ret) break;
        eval_instruction(st, p, in, preset_angr_cf(), nullptr);
    }
    CHECK(st.reg_val[size_t(Reg::rbx)] == sv_sym(sym_reg0(Reg::rbx)));
    CHECK(st.reg_def[size_t(Reg::rbx)][0] == DefSet{0x1008});
}

TEST_CASE("resolve_address maps values to regions") {
    Program p = parse_program(R"(
f:
mov rax, qword ptr [rsp+0x8]
mov eax, dword ptr [rdi+0x8]
mov al, byte ptr [rcx*1+0x601000]
mov rbx, qword ptr [rdi+rcx]
ret
)");
    const Function& f = only_fn(p, "f");
    AbsState st = entry_state();
    st.reg_val[size_t(Reg::rsp)] = sv_add(st.reg_val[size_t(Reg::rsp)], -0x10);

    auto addr_of = [&](const Instruction& in, const AnalysisConfig& cfg) {
        return resolve_address(st, in, *in.mem_operand(), cfg, nullptr);
    };

    CHECK(addr_of(f.insns[0], preset_baseline()) ==
          aa_region(sym_reg0(Reg::rsp), -0x8, 8));
    CHECK(addr_of(f.insns[1], preset_baseline()) ==
          aa_region_cell(sym_reg0(Reg::rdi), 4));
    CHECK(addr_of(f.insns[1], preset_angr_cf()) ==
          aa_region(sym_reg0(Reg::rdi), 0x8, 4));
    CHECK(addr_of(f.insns[2], preset_angr_cf()) ==
          aa_region(sym_reg0(Reg::rcx), 0x601000, 1));
    CHECK(addr_of(f.insns[3], preset_baseline()) == aa_collapsed(8));
    CHECK(addr_of(f.insns[3], preset_angr_cf()) == aa_top(8));

    st.reg_val[size_t(Reg::rcx)] = sv_const(4);
    CHECK(addr_of(f.insns[3], preset_angr_cf()) ==
          aa_region(sym_reg0(Reg::rdi), 4, 8));
    CHECK(addr_of(f.insns[2], preset_angr_cf()) == aa_concrete(0x601004, 1));
}

TEST_CASE("apply_call clobbers by configuration") {
    Program p = parse_program(R"(
f:
call malloc
call getenv
ret
g:
ret
)");
    const Function& f = only_fn(p, "f");
    const Instruction& call_malloc = f.insns[0];
    const Instruction& call_getenv = f.insns[1];
    SymId rsp0 = sym_reg0(Reg::rsp);

    AbsState st = entry_state();
    st.reg_val[size_t(Reg::rdi)] = sv_const(9);
    st.reg_def[size_t(Reg::rdi)][0] = {0x900};
    st.mem_defs.insert(MemDef{0x910, aa_region(rsp0, -8, 8)});
    st.mem_defs.insert(MemDef{0x920, aa_concrete(0x601000, 4)});
    AbsState pristine = st;

    apply_call(st, p, call_malloc, preset_baseline());
    CHECK(st.reg_val[size_t(Reg::rax)] == sv_sym(sym_call_ret(0x1000)));
    CHECK(st.reg_val[size_t(Reg::rdi)] ==
          sv_sym(sym_call_clobber(0x1000, Reg::rdi)));
    CHECK(st.reg_def[size_t(Reg::rdi)][0] == DefSet{0x1000});
    CHECK(st.reg_val[size_t(Reg::rsp)] == sv_top());
    CHECK(st.mem_defs.empty());

    st = pristine;
    apply_call(st, p, call_malloc, preset_angr_cf());
    CHECK(st.reg_val[size_t(Reg::rax)] ==
          sv_sym(sym_call_ret(0x1000)));  // allocation is always fresh
    CHECK(st.reg_val[size_t(Reg::rdi)] == sv_const(9));
    CHECK(st.reg_val[size_t(Reg::rsp)] == sv_sym(rsp0));
    CHECK(st.mem_defs.size() == 2);

    st = pristine;
    apply_call(st, p, call_getenv, preset_angr_cf());
    CHECK(st.reg_val[size_t(Reg::rax)] ==
          sv_sym(sym_reg0(Reg::rax)));  // transparent non-allocator call

    st = pristine;
    AnalysisConfig c2only;
    c2only.c2 = true;
    apply_call(st, p, call_getenv, c2only);
    CHECK(st.reg_val[size_t(Reg::rsp)] == sv_sym(rsp0));
    REQUIRE(st.mem_defs.size() == 1);
    CHECK(st.mem_defs.begin()->instr == 0x910);  // stack slots survive
}
