#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bfa/interp.hpp"
#include "bfa/parse.hpp"

using namespace bfa;

namespace {

Environment env_with(std::map<std::string, uint64_t> regs) {
    Environment e;
    e.regs = std::move(regs);
    return e;
}

}  // namespace

TEST_CASE("byte store and load through the red zone") {
    Program p = parse_program(
        "f:\n"
        "1000: mov BYTE PTR [rsp-0x1], dil\n"
        "1004: mov dl, BYTE PTR [rsp-0x1]\n"
        "1008: ret\n");
    ExecResult r = execute(p, "f", env_with({{"rdi", 0x41}}));
    REQUIRE(r.ok());
    REQUIRE(r.trace.contexts.size() == 1);
    CHECK(r.trace.contexts[0].function == "f");
    CHECK(r.trace.contexts[0].allocator == false);

    const auto& ev = r.trace.events;
    REQUIRE(ev.size() == 9);
    // store: source read, address read, memory write
    CHECK(ev[0] == TraceEvent{0x1000, Access::Read, "rdi", reg_byte_id(Reg::rdi, 0), 1, 0});
    CHECK(ev[1] == TraceEvent{0x1000, Access::Read, "rsp", reg_byte_id(Reg::rsp, 0), 8, 0});
    CHECK(ev[2] == TraceEvent{0x1000, Access::Write, "mem", kStackInit - 1, 1, 0});
    // load: address read, memory read, register write
    CHECK(ev[3] == TraceEvent{0x1004, Access::Read, "rsp", reg_byte_id(Reg::rsp, 0), 8, 0});
    CHECK(ev[4] == TraceEvent{0x1004, Access::Read, "mem", kStackInit - 1, 1, 0});
    CHECK(ev[5] == TraceEvent{0x1004, Access::Write, "rdx", reg_byte_id(Reg::rdx, 0), 1, 0});
    // ret: rsp read, return slot read, rsp write
    CHECK(ev[6] == TraceEvent{0x1008, Access::Read, "rsp", reg_byte_id(Reg::rsp, 0), 8, 0});
    CHECK(ev[7] == TraceEvent{0x1008, Access::Read, "mem", kStackInit, 8, 0});
    CHECK(ev[8] == TraceEvent{0x1008, Access::Write, "rsp", reg_byte_id(Reg::rsp, 0), 8, 0});
}

TEST_CASE("32-bit destinations write the full register") {
    Program p = parse_program("f:\nmov eax, 0x7\nret\n");
    ExecResult r = execute(p, "f", {});
    REQUIRE(r.ok());
    CHECK(r.trace.events[0] ==
          TraceEvent{0x1000, Access::Write, "rax", reg_byte_id(Reg::rax, 0), 8, 0});
}

TEST_CASE("reading an undefined register faults") {
    Program p = parse_program("f:\nmov rax, rbx\nret\n");
    ExecResult r = execute(p, "f", {});
    REQUIRE(!r.ok());
    CHECK(*r.error == InterpErrorKind::UndefinedRegisterRead);
    CHECK(r.trace.events.empty());
}

TEST_CASE("partially defined registers fault only on undefined bytes") {
    Program p = parse_program("f:\nmov bl, 0x1\nmov al, bl\nmov rax, rbx\nret\n");
    ExecResult r = execute(p, "f", {});
    REQUIRE(!r.ok());
    CHECK(*r.error == InterpErrorKind::UndefinedRegisterRead);
    // mov al, bl succeeded; the full-width read is what faulted.
    CHECK(r.trace.events.size() == 3);
}

TEST_CASE("step limit faults") {
    Program p = parse_program("f:\nspin:\njmp spin\n");
    Environment e;
    e.step_limit = 50;
    ExecResult r = execute(p, "f", e);
    REQUIRE(!r.ok());
    CHECK(*r.error == InterpErrorKind::StepLimit);
    CHECK(r.steps == 51);
}

TEST_CASE("accesses outside every region fault") {
    Program p = parse_program("f:\nmov rax, 0x999\nmov BYTE PTR [rax], dil\nret\n");
    ExecResult r = execute(p, "f", env_with({{"rdi", 1}}));
    REQUIRE(!r.ok());
    CHECK(*r.error == InterpErrorKind::OutOfRegion);
}

TEST_CASE("conditional branches need defined flags") {
    Program p = parse_program("f:\njz out\nout:\nret\n");
    ExecResult r = execute(p, "f", {});
    REQUIRE(!r.ok());
    CHECK(*r.error == InterpErrorKind::UndefinedFlagBranch);
}

TEST_CASE("allocator calls reserve fresh heap in a synthetic activation") {
    Program p = parse_program(
        "f:\n"
        "1000: mov edi, 0x10\n"
        "1004: call malloc\n"
        "1008: mov rbx, rax\n"
        "100c: mov edi, 0x10\n"
        "1010: call malloc\n"
        "1014: mov BYTE PTR [rax], dl\n"
        "1018: mov BYTE PTR [rbx], dl\n"
        "101c: ret\n");
    ExecResult r = execute(p, "f", env_with({{"rdx", 0x55}}));
    REQUIRE(r.ok());
    REQUIRE(r.trace.contexts.size() == 3);
    CHECK(r.trace.contexts[1].function == "malloc");
    CHECK(r.trace.contexts[1].allocator == true);
    CHECK(r.trace.contexts[1].parent == 0);
    CHECK(r.trace.contexts[2].allocator == true);

    // First allocation starts the heap; the second is separated by a guard gap.
    std::vector<uint64_t> heap_writes;
    for (const auto& e : r.trace.events)
        if (e.access == Access::Write && e.channel == "mem" &&
            e.location >= kHeapBase && e.location < kHeapBase + kHeapSize)
            heap_writes.push_back(e.location);
    REQUIRE(heap_writes.size() == 2);
    CHECK(heap_writes[0] == kHeapBase + 0x20);  // second allocation, used first
    CHECK(heap_writes[1] == kHeapBase);
    CHECK(heap_writes[0] % 16 == 0);

    // The allocator's result lands in rax inside the allocator context.
    bool saw_alloc_write = false;
    for (const auto& e : r.trace.events)
        if (e.access == Access::Write && e.channel == "rax" && e.context == 1)
            saw_alloc_write = true;
    CHECK(saw_alloc_write);
}

TEST_CASE("other externals answer 0 in rax and touch nothing else") {
    Program p = parse_program(
        "f:\n"
        "1000: call getenv\n"
        "1004: mov rbx, rax\n"
        "1008: ret\n");
    ExecResult r = execute(p, "f", {});
    REQUIRE(r.ok());
    REQUIRE(r.trace.contexts.size() == 2);
    CHECK(r.trace.contexts[1].function == "getenv");
    CHECK(r.trace.contexts[1].allocator == false);
    // No stack traffic for the external call: first memory event is the ret.
    for (const auto& e : r.trace.events)
        if (e.channel == "mem") CHECK(e.instr == 0x1008);
    CHECK(r.trace.events[0] ==
          TraceEvent{0x1000, Access::Write, "rax", reg_byte_id(Reg::rax, 0), 8, 1});
}

TEST_CASE("internal calls push the return address and a new context") {
    Program p = parse_program(
        "f:\n"
        "1000: call g\n"
        "1004: mov rbx, rax\n"
        "1008: ret\n"
        "\n"
        "g:\n"
        "100c: mov eax, 0x2a\n"
        "1010: ret\n");
    ExecResult r = execute(p, "f", {});
    REQUIRE(r.ok());
    REQUIRE(r.trace.contexts.size() == 2);
    CHECK(r.trace.contexts[1].function == "g");
    CHECK(r.trace.contexts[1].parent == 0);
    // Return address written at the new stack slot, read back by g's ret.
    CHECK(r.trace.events[2] ==
          TraceEvent{0x1000, Access::Write, "mem", kStackInit - 8, 8, 0});
    bool ret_read = false;
    for (const auto& e : r.trace.events)
        if (e.instr == 0x1010 && e.channel == "mem" && e.access == Access::Read) {
            CHECK(e.location == kStackInit - 8);
            CHECK(e.context == 1);
            ret_read = true;
        }
    CHECK(ret_read);
}

TEST_CASE("counted loop executes the expected number of iterations") {
    Program p = parse_program(
        "f:\n"
        "1000: mov rax, rdi\n"
        "1004: test rsi, rsi\n"
        "1008: jz done\n"
        "top:\n"
        "100c: mov BYTE PTR [rax], dl\n"
        "1010: add rax, 0x1\n"
        "1014: sub rsi, 0x1\n"
        "1018: jnz top\n"
        "done:\n"
        "101c: ret\n");
    ExecResult r = execute(
        p, "f", env_with({{"rdi", kArenaBase}, {"rsi", 3}, {"rdx", 0xcc}}));
    REQUIRE(r.ok());
    int stores = 0;
    for (const auto& e : r.trace.events)
        if (e.access == Access::Write && e.channel == "mem" && e.instr == 0x100c) {
            CHECK(e.location == kArenaBase + stores);
            ++stores;
        }
    CHECK(stores == 3);

    ExecResult zero = execute(
        p, "f", env_with({{"rdi", kArenaBase}, {"rsi", 0}, {"rdx", 0xcc}}));
    REQUIRE(zero.ok());
    CHECK(!trace_executed(zero.trace, 0x100c));
}

static const char* kStoreLoadPair =
    "f:\n"
    "1000: mov BYTE PTR [rdi], dl\n"
    "1004: mov al, BYTE PTR [rsi]\n"
    "1008: ret\n";

TEST_CASE("oracle: always, never, sometimes") {
    Program p = parse_program(kStoreLoadPair);
    auto mk = [&](uint64_t w, uint64_t r) {
        return env_with({{"rdi", w}, {"rsi", r}, {"rdx", 1}});
    };
    CHECK(oracle_data_flow(p, "f", 0x1000, 0x1004,
                           {mk(kArenaBase, kArenaBase),
                            mk(kArenaBase + 8, kArenaBase + 8)}) ==
          FlowVerdict::Always);
    CHECK(oracle_data_flow(p, "f", 0x1000, 0x1004,
                           {mk(kArenaBase, kArenaBase + 1),
                            mk(kArenaBase, kArenaBase + 8)}) ==
          FlowVerdict::Never);
    CHECK(oracle_data_flow(p, "f", 0x1000, 0x1004,
                           {mk(kArenaBase, kArenaBase),
                            mk(kArenaBase, kArenaBase + 8)}) ==
          FlowVerdict::Sometimes);
}

TEST_CASE("oracle: overwrite between store and load kills the flow") {
    Program p = parse_program(
        "f:\n"
        "1000: mov BYTE PTR [rdi], dl\n"
        "1004: mov BYTE PTR [rdi], cl\n"
        "1008: mov al, BYTE PTR [rdi]\n"
        "100c: ret\n");
    auto e = env_with({{"rdi", kArenaBase}, {"rdx", 1}, {"rcx", 2}});
    CHECK(oracle_data_flow(p, "f", 0x1000, 0x1008, {e}) == FlowVerdict::Never);
    CHECK(oracle_data_flow(p, "f", 0x1004, 0x1008, {e}) == FlowVerdict::Always);
}

TEST_CASE("oracle faults when no environment executed both instructions") {
    Program p = parse_program(
        "f:\n"
        "1000: test rsi, rsi\n"
        "1004: jz done\n"
        "1008: mov BYTE PTR [rdi], dl\n"
        "100c: mov al, BYTE PTR [rdi]\n"
        "done:\n"
        "1010: ret\n");
    auto e = env_with({{"rdi", kArenaBase}, {"rsi", 0}, {"rdx", 1}});
    CHECK_THROWS_AS(oracle_data_flow(p, "f", 0x1008, 0x100c, {e}), OracleError);
}

TEST_CASE("partial traces survive faults and the oracle can still use them") {
    // The load runs before the bad jump, so an environment that faults later
    // still vouches for the flow.
    Program p = parse_program(
        "f:\n"
        "1000: mov BYTE PTR [rdi], dl\n"
        "1004: mov al, BYTE PTR [rdi]\n"
        "1008: mov rbx, rcx\n"
        "100c: ret\n");
    auto e = env_with({{"rdi", kArenaBase}, {"rdx", 1}});  // rcx undefined
    ExecResult r = execute(p, "f", e);
    REQUIRE(!r.ok());
    CHECK(trace_executed(r.trace, 0x1004));
    CHECK(oracle_data_flow(p, "f", 0x1000, 0x1004, {e}) == FlowVerdict::Always);
}

TEST_CASE("trace serialization round-trips") {
    Program p = parse_program(kStoreLoadPair);
    ExecResult r = execute(
        p, "f", env_with({{"rdi", kArenaBase}, {"rsi", kArenaBase}, {"rdx", 9}}));
    REQUIRE(r.ok());
    std::string text = trace_to_jsonl(r.trace);
    Trace back = trace_from_jsonl(text);
    CHECK(back.contexts == r.trace.contexts);
    CHECK(back.events == r.trace.events);
    CHECK(trace_to_jsonl(back) == text);
    // Deterministic: a second run serializes identically.
    ExecResult again = execute(
        p, "f", env_with({{"rdi", kArenaBase}, {"rsi", kArenaBase}, {"rdx", 9}}));
    CHECK(trace_to_jsonl(again.trace) == text);
}
