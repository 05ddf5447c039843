#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfa/dynflow.hpp"
#include "bfa/parse.hpp"

using namespace bfa;

namespace {

struct Run {
    Program prog;
    std::vector<Trace> traces;
    DataFlowGraph graph;
};

Run run_and_build(const char* text, std::vector<Environment> envs,
                  const std::string& entry = "f") {
    Run r;
    r.prog = parse_program(text);
    for (const auto& e : envs) {
        ExecResult res = execute(r.prog, entry, e);
        REQUIRE(res.ok());
        r.traces.push_back(std::move(res.trace));
    }
    r.graph = build_interprocedural_dfg(r.traces);
    return r;
}

Environment env_with(std::map<std::string, uint64_t> regs) {
    Environment e;
    e.regs = std::move(regs);
    return e;
}

}  // namespace

TEST_CASE("store-load pairs become mem edges with intra scope") {
    Run r = run_and_build(
        "f:\n"
        "1000: mov BYTE PTR [rsp-0x1], dil\n"
        "1004: mov al, BYTE PTR [rsp-0x1]\n"
        "1008: ret\n",
        {env_with({{"rdi", 0x41}})});
    REQUIRE(r.graph.has_edge(0x1000, 0x1004, "mem"));
    CHECK(*r.graph.edge_scope(0x1000, 0x1004, "mem") == Scope::Intra);
    // dil flowed into the store too.
    CHECK(!r.graph.has_edge(0x1000, 0x1004, "rdi"));
}

TEST_CASE("register defs connect to uses per byte") {
    Run r = run_and_build(
        "f:\n"
        "1000: mov bl, 0x1\n"
        "1004: mov bh, 0x2\n"
        "1008: mov cl, bl\n"
        "100c: mov dl, bh\n"
        "1010: ret\n",
        {{}});
    CHECK(r.graph.has_edge(0x1000, 0x1008, "rbx"));
    CHECK(r.graph.has_edge(0x1004, 0x100c, "rbx"));
    CHECK(!r.graph.has_edge(0x1000, 0x100c, "rbx"));
    CHECK(!r.graph.has_edge(0x1004, 0x1008, "rbx"));
}

TEST_CASE("cross-activation flows are inter scope and extraction drops them") {
    const char* text =
        "f:\n"
        "1000: mov rbx, 0x7\n"
        "1004: call g\n"
        "1008: mov rcx, rax\n"
        "100c: ret\n"
        "\n"
        "g:\n"
        "1010: mov rax, rbx\n"
        "1014: ret\n";
    Run r = run_and_build(text, {{}});
    REQUIRE(r.graph.has_edge(0x1000, 0x1010, "rbx"));
    CHECK(*r.graph.edge_scope(0x1000, 0x1010, "rbx") == Scope::Inter);
    REQUIRE(r.graph.has_edge(0x1010, 0x1008, "rax"));
    CHECK(*r.graph.edge_scope(0x1010, 0x1008, "rax") == Scope::Inter);
    // The return-address slot flows from call to ret across contexts.
    REQUIRE(r.graph.has_edge(0x1004, 0x1014, "mem"));
    CHECK(*r.graph.edge_scope(0x1004, 0x1014, "mem") == Scope::Inter);

    DataFlowGraph f = extract_intraprocedural(r.graph, r.prog, "f");
    CHECK(!f.has_edge(0x1000, 0x1010, "rbx"));
    CHECK(!f.has_edge(0x1010, 0x1008, "rax"));
    CHECK(f.nodes.count(0x1000));
    CHECK(!f.nodes.count(0x1010));

    DataFlowGraph g2 = extract_intraprocedural(r.graph, r.prog, "g");
    CHECK(g2.nodes.count(0x1010));
    CHECK(g2.edges.empty());

    CHECK_THROWS_AS(extract_intraprocedural(r.graph, r.prog, "missing"), DfgError);
}

TEST_CASE("same function, different activations: scope is inter") {
    const char* text =
        "f:\n"
        "1000: test rdi, rdi\n"
        "1004: jz base\n"
        "1008: mov rbx, rdi\n"
        "100c: sub rdi, 0x1\n"
        "1010: call f\n"
        "1014: mov rax, rbx\n"
        "1018: ret\n"
        "base:\n"
        "101c: mov rbx, 0x0\n"
        "1020: ret\n";
    Run r = run_and_build(text, {env_with({{"rdi", 1}})});
    // Recursive activation's write of rbx reaches the outer read of rbx.
    REQUIRE(r.graph.has_edge(0x101c, 0x1014, "rbx"));
    CHECK(*r.graph.edge_scope(0x101c, 0x1014, "rbx") == Scope::Inter);
}

TEST_CASE("caller-side save/restore is reconnected around the call") {
    const char* text =
        "f:\n"
        "1000: mov rbx, 0x1\n"
        "1004: push rbx\n"
        "1008: call g\n"
        "100c: pop rbx\n"
        "1010: mov rax, rbx\n"
        "1014: ret\n"
        "\n"
        "g:\n"
        "1018: mov rbx, 0x9\n"
        "101c: ret\n";
    Run r = run_and_build(text, {{}});
    REQUIRE(r.graph.has_edge(0x1004, 0x100c, "mem"));
    REQUIRE(r.graph.has_edge(0x100c, 0x1010, "rbx"));
    REQUIRE(r.graph.has_edge(0x1000, 0x1004, "rbx"));

    reconnect_save_restore(r.graph, r.traces, r.prog);
    CHECK(!r.graph.has_edge(0x1004, 0x100c, "mem"));
    CHECK(!r.graph.has_edge(0x100c, 0x1010, "rbx"));
    REQUIRE(r.graph.has_edge(0x1000, 0x1010, "rbx"));
    CHECK(*r.graph.edge_scope(0x1000, 0x1010, "rbx") == Scope::Intra);
    // The save still reads the original definition.
    CHECK(r.graph.has_edge(0x1000, 0x1004, "rbx"));

    DataFlowGraph before = r.graph;
    reconnect_save_restore(r.graph, r.traces, r.prog);
    CHECK(r.graph == before);
}

TEST_CASE("callee-side save/restore reconnects the caller's value") {
    const char* text =
        "f:\n"
        "1000: mov rbx, 0x5\n"
        "1004: call g\n"
        "1008: mov rax, rbx\n"
        "100c: ret\n"
        "\n"
        "g:\n"
        "1010: push rbx\n"
        "1014: mov rbx, 0x7\n"
        "1018: mov rdx, rbx\n"
        "101c: pop rbx\n"
        "1020: ret\n";
    Run r = run_and_build(text, {{}});
    reconnect_save_restore(r.graph, r.traces, r.prog);

    REQUIRE(r.graph.has_edge(0x1000, 0x1008, "rbx"));
    CHECK(*r.graph.edge_scope(0x1000, 0x1008, "rbx") == Scope::Intra);
    CHECK(!r.graph.has_edge(0x1010, 0x101c, "mem"));
    CHECK(!r.graph.has_edge(0x101c, 0x1008, "rbx"));
    // g's private flow is untouched.
    CHECK(r.graph.has_edge(0x1014, 0x1018, "rbx"));

    DataFlowGraph f = extract_intraprocedural(r.graph, r.prog, "f");
    CHECK(f.has_edge(0x1000, 0x1008, "rbx"));
}

TEST_CASE("save/restore through full-width mov pairs also reconnects") {
    const char* text =
        "f:\n"
        "1000: mov rbx, 0x3\n"
        "1004: mov QWORD PTR [rsp-0x10], rbx\n"
        "1008: call g\n"
        "100c: mov rbx, QWORD PTR [rsp-0x10]\n"
        "1010: mov rax, rbx\n"
        "1014: ret\n"
        "\n"
        "g:\n"
        "1018: ret\n";
    Run r = run_and_build(text, {{}});
    reconnect_save_restore(r.graph, r.traces, r.prog);
    CHECK(r.graph.has_edge(0x1000, 0x1010, "rbx"));
    CHECK(!r.graph.has_edge(0x100c, 0x1010, "rbx"));
    CHECK(!r.graph.has_edge(0x1004, 0x100c, "mem"));
}

TEST_CASE("a clobbered slot is not reconnected") {
    const char* text =
        "f:\n"
        "1000: mov rbx, 0x3\n"
        "1004: mov QWORD PTR [rsp-0x8], rbx\n"
        "1008: mov QWORD PTR [rsp-0x8], rdi\n"
        "100c: mov rbx, QWORD PTR [rsp-0x8]\n"
        "1010: mov rax, rbx\n"
        "1014: ret\n";
    Run r = run_and_build(text, {env_with({{"rdi", 0x11}})});
    reconnect_save_restore(r.graph, r.traces, r.prog);
    // The reload reads the second store, so the chain must survive.
    CHECK(r.graph.has_edge(0x1008, 0x100c, "mem"));
    CHECK(r.graph.has_edge(0x100c, 0x1010, "rbx"));
    CHECK(!r.graph.has_edge(0x1000, 0x1010, "rbx"));
}

TEST_CASE("clear idioms lose their incoming register dependency") {
    const char* text =
        "f:\n"
        "1000: mov rbx, 0x1\n"
        "1004: xor rbx, rbx\n"
        "1008: mov rax, rbx\n"
        "100c: sub rcx, rcx\n"
        "1010: mov rdx, rcx\n"
        "1014: ret\n";
    Run r = run_and_build(text, {env_with({{"rcx", 5}})});
    REQUIRE(r.graph.has_edge(0x1000, 0x1004, "rbx"));
    eliminate_clear_idioms(r.graph, r.prog);
    CHECK(!r.graph.has_edge(0x1000, 0x1004, "rbx"));
    CHECK(r.graph.has_edge(0x1004, 0x1008, "rbx"));
    CHECK(r.graph.has_edge(0x100c, 0x1010, "rcx"));

    DataFlowGraph before = r.graph;
    eliminate_clear_idioms(r.graph, r.prog);
    CHECK(r.graph == before);
}

TEST_CASE("32-bit clear forms count") {
    const char* text =
        "f:\n"
        "1000: mov eax, 0x1\n"
        "1004: xor eax, eax\n"
        "1008: mov rbx, rax\n"
        "100c: ret\n";
    Run r = run_and_build(text, {{}});
    eliminate_clear_idioms(r.graph, r.prog);
    CHECK(!r.graph.has_edge(0x1000, 0x1004, "rax"));
    CHECK(r.graph.has_edge(0x1004, 0x1008, "rax"));
}

TEST_CASE("alias classes: stack, heap, foreign, global") {
    SUBCASE("stack through rsp") {
        Run r = run_and_build(
            "f:\n"
            "1000: mov BYTE PTR [rsp-0x1], dil\n"
            "1004: mov al, BYTE PTR [rsp-0x1]\n"
            "1008: ret\n",
            {env_with({{"rdi", 1}})});
        auto [w, rr] = identify_alias_class(r.graph, r.prog, 0x1000, 0x1004);
        CHECK(w == Origin::Stack);
        CHECK(rr == Origin::Stack);
    }
    SUBCASE("stack through a frame pointer") {
        Run r = run_and_build(
            "f:\n"
            "1000: push rbp\n"
            "1004: mov rbp, rsp\n"
            "1008: mov BYTE PTR [rbp-0x1], dil\n"
            "100c: mov al, BYTE PTR [rbp-0x1]\n"
            "1010: pop rbp\n"
            "1014: ret\n",
            {env_with({{"rdi", 1}, {"rbp", kStackInit}})});
        auto [w, rr] = identify_alias_class(r.graph, r.prog, 0x1008, 0x100c);
        CHECK(w == Origin::Stack);
        CHECK(rr == Origin::Stack);
    }
    SUBCASE("heap through allocator results and copies") {
        Run r = run_and_build(
            "f:\n"
            "1000: mov edi, 0x10\n"
            "1004: call malloc\n"
            "1008: mov r10, rax\n"
            "100c: mov edi, 0x10\n"
            "1010: call malloc\n"
            "1014: mov BYTE PTR [r10], dl\n"
            "1018: mov al, BYTE PTR [rax]\n"
            "101c: ret\n",
            {env_with({{"rdx", 9}})});
        auto [w, rr] = identify_alias_class(r.graph, r.prog, 0x1014, 0x1018);
        CHECK(w == Origin::Heap);
        CHECK(rr == Origin::Heap);
    }
    SUBCASE("foreign argument pointers") {
        Run r = run_and_build(
            "f:\n"
            "1000: mov BYTE PTR [rdi], dl\n"
            "1004: mov al, BYTE PTR [rsi]\n"
            "1008: ret\n",
            {env_with({{"rdi", kArenaBase}, {"rsi", kArenaBase}, {"rdx", 9}})});
        auto [w, rr] = identify_alias_class(r.graph, r.prog, 0x1000, 0x1004);
        CHECK(w == Origin::Foreign);
        CHECK(rr == Origin::Foreign);
    }
    SUBCASE("global constant addresses") {
        Run r = run_and_build(
            "f:\n"
            "1000: mov BYTE PTR [0x601000], dl\n"
            "1004: mov al, BYTE PTR [0x601000]\n"
            "1008: ret\n",
            {env_with({{"rdx", 9}})});
        auto [w, rr] = identify_alias_class(r.graph, r.prog, 0x1000, 0x1004);
        CHECK(w == Origin::Global);
        CHECK(rr == Origin::Global);
    }
    SUBCASE("global base with a variable index stays global") {
        Run r = run_and_build(
            "f:\n"
            "1000: mov BYTE PTR [r8*1+0x601000], dl\n"
            "1004: mov al, BYTE PTR [r8*1+0x601000]\n"
            "1008: ret\n",
            {env_with({{"r8", 4}, {"rdx", 9}})});
        // r8 is an index over a constant base; the pointer itself is global.
        auto [w, rr] = identify_alias_class(r.graph, r.prog, 0x1000, 0x1004);
        CHECK(w == Origin::Global);
        CHECK(rr == Origin::Global);
    }
    SUBCASE("mixed sources are unknown") {
        Run r = run_and_build(
            "f:\n"
            "1000: lea rax, [rsp+rdi]\n"
            "1004: mov BYTE PTR [rax], dl\n"
            "1008: mov bl, BYTE PTR [rax]\n"
            "100c: ret\n",
            {env_with({{"rdi", 0xffffffffffff0100ull}, {"rdx", 9}})});
        auto [w, rr] = identify_alias_class(r.graph, r.prog, 0x1004, 0x1008);
        CHECK(w == Origin::Unknown);
        CHECK(rr == Origin::Unknown);
    }
    SUBCASE("pointer advanced in a loop keeps its origin") {
        Run r = run_and_build(
            "f:\n"
            "1000: mov rax, rdi\n"
            "1004: test rsi, rsi\n"
            "1008: jz done\n"
            "top:\n"
            "100c: mov BYTE PTR [rax], dl\n"
            "1010: mov bl, BYTE PTR [rax]\n"
            "1014: add rax, 0x1\n"
            "1018: sub rsi, 0x1\n"
            "101c: jnz top\n"
            "done:\n"
            "1020: ret\n",
            {env_with({{"rdi", kArenaBase}, {"rsi", 3}, {"rdx", 9}})});
        auto [w, rr] = identify_alias_class(r.graph, r.prog, 0x100c, 0x1010);
        CHECK(w == Origin::Foreign);
        CHECK(rr == Origin::Foreign);
    }
}

TEST_CASE("dfg json round-trips") {
    Run r = run_and_build(
        "f:\n"
        "1000: mov BYTE PTR [rsp-0x1], dil\n"
        "1004: mov al, BYTE PTR [rsp-0x1]\n"
        "1008: ret\n",
        {env_with({{"rdi", 1}})});
    std::string text = dfg_to_json(r.graph);
    DataFlowGraph back = dfg_from_json(text);
    CHECK(back == r.graph);
    CHECK(dfg_to_json(back) == text);
}
