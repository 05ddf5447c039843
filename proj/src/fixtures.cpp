#include "bfa/fixtures.hpp"

#include <algorithm>

#include "bfa/dynflow.hpp"
#include "bfa/evalharness.hpp"
#include "bfa/parse.hpp"
#include "bfa/staticflow.hpp"

namespace bfa {

// ---------------------------------------------------------------------------
// Disassembled fragments. Addresses are the original ones, so the documented
// edges can be stated directly. All three share the same failure shape: a
// write and a read of the same location separated by a call, which only an
// analysis with call-transparent state keeps track of.

const std::vector<ListingFixture>& bundled_listings() {
    static const std::vector<ListingFixture> fixtures = {
        // Four getc() results assembled into one 32-bit field. Each byte is
        // OR-ed into [x+0x28], and each OR sits behind another getc call.
        {"getc-reassemble",
         "getc_reassemble:\n"
         "fae3: mov rax, QWORD PTR [rbp-0x10]\n"
         "fae7: mov rdi, rax\n"
         "faea: call getc\n"
         "faef: mov edx, eax\n"
         "faf1: mov rax, QWORD PTR [rbp-0x18]\n"
         "faf5: mov DWORD PTR [rax+0x28], edx\n"
         "faf8: mov rax, QWORD PTR [rbp-0x10]\n"
         "fafc: mov rdi, rax\n"
         "faff: call getc\n"
         "fb04: shl eax, 0x8\n"
         "fb07: mov edx, eax\n"
         "fb09: mov rax, QWORD PTR [rbp-0x18]\n"
         "fb0d: mov eax, DWORD PTR [rax+0x28]\n"
         "fb10: or edx, eax\n"
         "fb12: mov rax, QWORD PTR [rbp-0x18]\n"
         "fb16: mov DWORD PTR [rax+0x28], edx\n"
         "fb19: mov rax, QWORD PTR [rbp-0x10]\n"
         "fb1d: mov rdi, rax\n"
         "fb20: call getc\n"
         "fb25: shl eax, 0x10\n"
         "fb28: mov edx, eax\n"
         "fb2a: mov rax, QWORD PTR [rbp-0x18]\n"
         "fb2e: mov eax, DWORD PTR [rax+0x28]\n"
         "fb31: or edx, eax\n"
         "fb33: mov rax, QWORD PTR [rbp-0x18]\n"
         "fb37: mov DWORD PTR [rax+0x28], edx\n"
         "fb3a: mov rax, QWORD PTR [rbp-0x10]\n"
         "fb3e: mov rdi, rax\n"
         "fb41: call getc\n"
         "fb46: shl eax, 0x18\n"
         "fb49: mov edx, eax\n"
         "fb4b: mov rax, QWORD PTR [rbp-0x18]\n"
         "fb4f: mov eax, DWORD PTR [rax+0x28]\n"
         "fb52: or edx, eax\n",
         {{0xfaf5, 0xfb0d, false},
          {0xfb16, 0xfb2e, false},
          {0xfb37, 0xfb4f, false}}},

        // List-walk in dnsmasq's config_sortlist: the list head parked in
        // [rbp-0x90] feeds two pointer subtractions before a memcpy and two
        // more after it. The loop between them only touches [rbp-0x10].
        {"config-sortlist",
         "config_sortlist:\n"
         "bb8e: mov QWORD PTR [rbp-0x80], rdi\n"
         "bb92: mov QWORD PTR [rbp-0x88], rsi\n"
         "bb96: mov QWORD PTR [rbp-0x90], rdx\n"
         "bb9d: jmp LAB_0010bba2\n"
         "LAB_0010bba2:\n"
         "bba2: mov rax, QWORD PTR [rbp-0x90]\n"
         "bba9: mov QWORD PTR [rbp-0x10], rax\n"
         "bbad: jmp LAB_0010bbb4\n"
         "LAB_0010bbaf:\n"
         "bbaf: add QWORD PTR [rbp-0x10], 0x1\n"
         "LAB_0010bbb4:\n"
         "bbb4: mov rax, QWORD PTR [rbp-0x10]\n"
         "bbb8: mov al, BYTE PTR [rax]\n"
         "bbf8: test eax, eax\n"
         "bbfa: jz LAB_0010bbaf\n"
         "bbfc: mov rax, QWORD PTR [rbp-0x10]\n"
         "bc00: sub rax, QWORD PTR [rbp-0x90]\n"
         "bc07: mov rdx, rax\n"
         "bc0a: mov rcx, QWORD PTR [rbp-0x90]\n"
         "bc11: lea rax, [rbp-0x50]\n"
         "bc15: mov rsi, rcx\n"
         "bc18: mov rdi, rax\n"
         "bc1b: call memcpy\n"
         "bc4d: add QWORD PTR [rbp-0x10], 0x1\n"
         "bc52: mov rax, QWORD PTR [rbp-0x10]\n"
         "bc8f: mov rax, QWORD PTR [rbp-0x10]\n"
         "bc93: sub rax, QWORD PTR [rbp-0x90]\n"
         "bc9a: mov rdx, rax\n"
         "bc9d: mov rcx, QWORD PTR [rbp-0x90]\n"
         "bca4: lea rax, [rbp-0x70]\n"
         "bca8: mov rsi, rcx\n"
         "bcab: mov rdi, rax\n"
         "bcae: call memcpy\n",
         {{0xbb96, 0xbc00, true},
          {0xbb96, 0xbc0a, true},
          {0xbb96, 0xbc93, false},
          {0xbb96, 0xbc9d, false}}},

        // c-ares inet_net_pton_ipv6: val <<= 4 and the OR that merges the
        // next digit straddle the aresx_sztoui call.
        {"inet-net-pton",
         "inet_net_pton_ipv6:\n"
         "16608: shl DWORD PTR [rbp-0x30], 0x4\n"
         "1660c: mov rax, QWORD PTR [rbp-0x48]\n"
         "16610: sub rax, QWORD PTR [rbp-0x20]\n"
         "16614: mov rdi, rax\n"
         "16617: call aresx_sztoui\n"
         "1661c: or DWORD PTR [rbp-0x30], eax\n",
         {{0x16608, 0x1661c, false}}},
    };
    return fixtures;
}

std::vector<FixtureCheck> check_listings(std::string_view preset) {
    auto cfg = preset_by_name(preset);
    if (!cfg)
        throw FixtureError("unknown preset '" + std::string(preset) +
                           "' (expected baseline or angr-cf)");
    const bool base = !cfg->c1 && !cfg->c2 && !cfg->f;

    std::vector<FixtureCheck> out;
    for (const ListingFixture& fx : bundled_listings()) {
        Program prog = parse_program(fx.text);
        const Function& fn = prog.functions.front();
        DataFlowGraph g = analyze_function(prog, fn, *cfg);
        for (const auto& e : fx.edges) {
            FixtureCheck c;
            c.listing = fx.name;
            c.write = e.write;
            c.read = e.read;
            c.expected = base ? e.under_baseline : true;
            c.found = g.has_edge(e.write, e.read, "mem");
            out.push_back(std::move(c));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Handwritten corpus. Each function keeps loop-carried state in registers
// and fixed slots (an affine value domain loses loop-varying addresses to
// Top, which is a real imprecision but not what these programs probe), and
// each ends with a same-pointer store/load pair at different offsets -- the
// classic field mix-up an offset-blind analysis merges into one cell.
// Helpers save and restore everything they touch, like real callees do.

namespace {

Environment mkenv(std::initializer_list<std::pair<const char*, uint64_t>> regs,
                  std::map<uint64_t, std::vector<uint8_t>> mem = {}) {
    Environment env;
    env.regs["rbp"] = kStackInit;  // every prologue spills it
    for (const auto& [name, val] : regs) env.regs[name] = val;
    env.mem = std::move(mem);
    return env;
}

constexpr uint64_t kBufA = kArenaBase + 0x400;
constexpr uint64_t kBufB = kArenaBase + 0xc00;

std::vector<uint8_t> qword(uint64_t v) {
    std::vector<uint8_t> b(8);
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(v >> (8 * i));
    return b;
}

}  // namespace

const std::vector<MiniFunction>& mini_corpus() {
    static const std::vector<MiniFunction> corpus = {
        {"mc01_sum",
         ".global counter 0x601800 8\n"
         "\n"
         "mc01_sum:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    sub rsp, 0x20\n"
         "    mov QWORD PTR [rbp-0x8], 0x0\n"
         "    mov rbx, 0x0\n"
         "    mov r8, QWORD PTR [rdi]\n"
         "mc01_loop:\n"
         "    add QWORD PTR [rbp-0x8], r8\n"
         "    add rbx, 0x1\n"
         "    cmp rbx, rcx\n"
         "    jnz mc01_loop\n"
         "    call mc01_tick\n"
         "    mov rax, QWORD PTR [rbp-0x8]\n"
         "    add rax, rbx\n"
         "    mov QWORD PTR [rdi+0x8], rax\n"
         "    mov r9, QWORD PTR [rdi+0x10]\n"
         "    add rsp, 0x20\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc01_tick:\n"
         "    push rbx\n"
         "    mov rbx, QWORD PTR [0x601800]\n"
         "    add rbx, 0x1\n"
         "    mov QWORD PTR [0x601800], rbx\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rdi", kBufA}, {"rcx", 1}}),
          mkenv({{"rdi", kBufA}, {"rcx", 3}})}},

        {"mc02_copy3",
         ".global scratch 0x601810 8\n"
         "\n"
         "mc02_copy3:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    mov rax, QWORD PTR [rdi]\n"
         "    mov QWORD PTR [rsi], rax\n"
         "    mov rax, QWORD PTR [rdi+0x8]\n"
         "    mov QWORD PTR [rsi+0x8], rax\n"
         "    mov rax, QWORD PTR [rdi+0x10]\n"
         "    mov QWORD PTR [rsi+0x10], rax\n"
         "    mov rbx, 0x0\n"
         "    mov r10, 0x0\n"
         "mc02_loop:\n"
         "    add r10, 0x3\n"
         "    add rbx, 0x1\n"
         "    cmp rbx, rdx\n"
         "    jnz mc02_loop\n"
         "    mov QWORD PTR [0x601810], r10\n"
         "    call mc02_bump\n"
         "    mov r11, QWORD PTR [0x601810]\n"
         "    mov QWORD PTR [rsi+0x18], r11\n"
         "    mov rax, QWORD PTR [rsi+0x20]\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc02_bump:\n"
         "    push rbx\n"
         "    mov rbx, 0x5\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rdi", kBufA}, {"rsi", kBufB}, {"rdx", 1}}),
          mkenv({{"rdi", kBufA}, {"rsi", kBufB}, {"rdx", 2}})}},

        {"mc03_fill_guard",
         ".global tallies 0x601820 24\n"
         ".global note_count 0x601830 8\n"
         "\n"
         "mc03_fill_guard:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    sub rsp, 0x10\n"
         "    mov QWORD PTR [rbp-0x8], rdi\n"
         "    test rdx, rdx\n"
         "    jz mc03_skip\n"
         "    mov rbx, rdx\n"
         "mc03_loop:\n"
         "    add QWORD PTR [0x601820], 0x2\n"
         "    sub rbx, 0x1\n"
         "    test rbx, rbx\n"
         "    jnz mc03_loop\n"
         "    call mc03_note\n"
         "    jmp mc03_done\n"
         "mc03_skip:\n"
         "    mov QWORD PTR [0x601828], 0x7\n"
         "mc03_done:\n"
         "    mov rax, QWORD PTR [0x601820]\n"
         "    mov rcx, QWORD PTR [rbp-0x8]\n"
         "    mov QWORD PTR [rcx+0x8], rax\n"
         "    mov r9, QWORD PTR [rcx+0x18]\n"
         "    add rsp, 0x10\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc03_note:\n"
         "    push rbx\n"
         "    mov rbx, QWORD PTR [0x601830]\n"
         "    add rbx, 0x1\n"
         "    mov QWORD PTR [0x601830], rbx\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rdi", kBufA}, {"rdx", 0}}),
          mkenv({{"rdi", kBufA}, {"rdx", 2}})}},

        {"mc04_shepherd",
         ".global keep_lo 0x601838 16\n"
         "\n"
         "mc04_shepherd:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    sub rsp, 0x10\n"
         "    mov rbx, rdi\n"
         "    mov r10, 0x0\n"
         "    mov r11, 0x1\n"
         "mc04_loop:\n"
         "    add r10, r11\n"
         "    add r11, 0x2\n"
         "    sub rdx, 0x1\n"
         "    test rdx, rdx\n"
         "    jnz mc04_loop\n"
         "    lea r9, [rbp-0x8]\n"
         "    mov QWORD PTR [r9], r10\n"
         "    call mc04_keep\n"
         "    mov rax, QWORD PTR [rbp-0x8]\n"
         "    mov QWORD PTR [rbx+0x20], rax\n"
         "    mov r8, QWORD PTR [rbx+0x28]\n"
         "    add rsp, 0x10\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc04_keep:\n"
         "    push rbx\n"
         "    push r12\n"
         "    mov rbx, 0x11\n"
         "    mov r12, 0x22\n"
         "    mov QWORD PTR [0x601838], rbx\n"
         "    mov QWORD PTR [0x601840], r12\n"
         "    pop r12\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rdi", kBufA}, {"rdx", 1}, {"r12", 0}}),
          mkenv({{"rdi", kBufA}, {"rdx", 3}, {"r12", 0}})}},

        {"mc05_tally",
         ".global grid 0x601850 32\n"
         "\n"
         "mc05_tally:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    mov rbx, 0x0\n"
         "mc05_loop:\n"
         "    add QWORD PTR [0x601850], 0x1\n"
         "    add rbx, 0x1\n"
         "    cmp rbx, rcx\n"
         "    jnz mc05_loop\n"
         "    mov r10, QWORD PTR [0x601850]\n"
         "    call mc05_poke\n"
         "    mov r11, QWORD PTR [0x601850]\n"
         "    add r11, r10\n"
         "    mov QWORD PTR [0x601858], r11\n"
         "    mov rax, QWORD PTR [0x601858]\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc05_poke:\n"
         "    push rbx\n"
         "    mov rbx, 0x3\n"
         "    mov QWORD PTR [0x601860], rbx\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rcx", 1}}), mkenv({{"rcx", 2}})}},

        {"mc06_relay",
         ".global relay_ct 0x601868 8\n"
         "\n"
         "mc06_relay:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    sub rsp, 0x20\n"
         "    mov QWORD PTR [rbp-0x10], rsi\n"
         "    mov rbx, 0x0\n"
         "mc06_loop:\n"
         "    add rbx, 0x5\n"
         "    cmp rbx, rdx\n"
         "    jnz mc06_loop\n"
         "    mov QWORD PTR [rbp-0x18], rbx\n"
         "    call mc06_outer\n"
         "    mov rcx, QWORD PTR [rbp-0x10]\n"
         "    mov rax, QWORD PTR [rbp-0x18]\n"
         "    mov QWORD PTR [rcx], rax\n"
         "    mov r8, QWORD PTR [rcx+0x10]\n"
         "    add rsp, 0x20\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc06_outer:\n"
         "    push rbx\n"
         "    mov rbx, 0x1\n"
         "    call mc06_inner\n"
         "    add rbx, 0x1\n"
         "    pop rbx\n"
         "    ret\n"
         "\n"
         "mc06_inner:\n"
         "    push rbx\n"
         "    mov rbx, QWORD PTR [0x601868]\n"
         "    add rbx, 0x2\n"
         "    mov QWORD PTR [0x601868], rbx\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rsi", kBufB}, {"rdx", 5}}),
          mkenv({{"rsi", kBufB}, {"rdx", 15}})}},

        {"mc07_branchy",
         ".global spin_ct 0x601870 8\n"
         "\n"
         "mc07_branchy:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    sub rsp, 0x10\n"
         "    mov rbx, 0x0\n"
         "    test rdx, rdx\n"
         "    jz mc07_low\n"
         "    mov QWORD PTR [rbp-0x8], 0x40\n"
         "    call mc07_spin\n"
         "    jmp mc07_join\n"
         "mc07_low:\n"
         "    mov QWORD PTR [rbp-0x8], 0x4\n"
         "mc07_join:\n"
         "    mov rax, QWORD PTR [rbp-0x8]\n"
         "mc07_wind:\n"
         "    add rax, 0x1\n"
         "    add rbx, 0x1\n"
         "    cmp rbx, rcx\n"
         "    jnz mc07_wind\n"
         "    mov QWORD PTR [rdi+0x8], rax\n"
         "    mov r11, QWORD PTR [rdi+0x20]\n"
         "    add rsp, 0x10\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc07_spin:\n"
         "    push rbx\n"
         "    mov rbx, QWORD PTR [0x601870]\n"
         "    add rbx, 0x4\n"
         "    mov QWORD PTR [0x601870], rbx\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rdi", kBufA}, {"rdx", 0}, {"rcx", 1}}),
          mkenv({{"rdi", kBufA}, {"rdx", 1}, {"rcx", 3}})}},

        {"mc08_mask",
         "mc08_mask:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    mov rbx, rdi\n"
         "    mov rax, QWORD PTR [rbx]\n"
         "    shl rax, 0x4\n"
         "    or rax, 0xf\n"
         "    and rax, 0xff\n"
         "    mov r10, 0x0\n"
         "mc08_turn:\n"
         "    add r10, rax\n"
         "    sub rcx, 0x1\n"
         "    test rcx, rcx\n"
         "    jnz mc08_turn\n"
         "    xor r10, r10\n"
         "    add r10, 0x9\n"
         "    mov QWORD PTR [rbx+0x8], r10\n"
         "    call mc08_hum\n"
         "    mov rdx, QWORD PTR [rbx+0x8]\n"
         "    mov QWORD PTR [rbx+0x18], rdx\n"
         "    mov r9, QWORD PTR [rbx+0x28]\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc08_hum:\n"
         "    push rbx\n"
         "    mov rbx, 0x6\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rdi", kBufA}, {"rcx", 1}}, {{kBufA, qword(0x5)}}),
          mkenv({{"rdi", kBufA}, {"rcx", 2}}, {{kBufA, qword(0x9)}})}},

        {"mc09_scan",
         ".global mark_ct 0x601878 8\n"
         "\n"
         "mc09_scan:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    sub rsp, 0x10\n"
         "    mov QWORD PTR [rbp-0x8], 0x0\n"
         "    mov rbx, 0x0\n"
         "mc09_step:\n"
         "    add rbx, 0x1\n"
         "    cmp rbx, rdx\n"
         "    jz mc09_out\n"
         "    mov r10, QWORD PTR [rdi]\n"
         "    test r10, r10\n"
         "    jnz mc09_more\n"
         "    jmp mc09_out\n"
         "mc09_more:\n"
         "    add QWORD PTR [rbp-0x8], r10\n"
         "    jmp mc09_step\n"
         "mc09_out:\n"
         "    call mc09_mark\n"
         "    mov rax, QWORD PTR [rbp-0x8]\n"
         "    mov QWORD PTR [rsi+0x10], rax\n"
         "    mov rcx, QWORD PTR [rsi+0x28]\n"
         "    add rsp, 0x10\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc09_mark:\n"
         "    push rbx\n"
         "    mov rbx, QWORD PTR [0x601878]\n"
         "    add rbx, 0x8\n"
         "    mov QWORD PTR [0x601878], rbx\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rdi", kBufA}, {"rsi", kBufB}, {"rdx", 3}},
                {{kBufA, qword(0)}}),
          mkenv({{"rdi", kBufA}, {"rsi", kBufB}, {"rdx", 2}},
                {{kBufA, qword(7)}}),
          mkenv({{"rdi", kBufA}, {"rsi", kBufB}, {"rdx", 4}},
                {{kBufA, qword(9)}})}},

        {"mc10_duo",
         ".global tap_ct 0x601880 8\n"
         "\n"
         "mc10_duo:\n"
         "    push rbp\n"
         "    mov rbp, rsp\n"
         "    sub rsp, 0x30\n"
         "    mov QWORD PTR [rbp-0x8], rdi\n"
         "    mov QWORD PTR [rbp-0x10], 0x15\n"
         "    mov QWORD PTR [rbp-0x18], 0x2a\n"
         "    mov rbx, 0x0\n"
         "mc10_mix:\n"
         "    add QWORD PTR [rbp-0x20], 0x3\n"
         "    add rbx, 0x1\n"
         "    cmp rbx, rcx\n"
         "    jnz mc10_mix\n"
         "    call mc10_tap\n"
         "    mov rax, QWORD PTR [rbp-0x10]\n"
         "    mov QWORD PTR [rbp-0x28], rax\n"
         "    call mc10_tap\n"
         "    mov r10, QWORD PTR [rbp-0x18]\n"
         "    mov r11, QWORD PTR [rbp-0x28]\n"
         "    add r11, r10\n"
         "    mov rdx, QWORD PTR [rbp-0x8]\n"
         "    mov QWORD PTR [rdx+0x8], r11\n"
         "    mov r9, QWORD PTR [rdx+0x20]\n"
         "    add rsp, 0x30\n"
         "    pop rbp\n"
         "    ret\n"
         "\n"
         "mc10_tap:\n"
         "    push rbx\n"
         "    mov rbx, QWORD PTR [0x601880]\n"
         "    add rbx, 0x6\n"
         "    mov QWORD PTR [0x601880], rbx\n"
         "    pop rbx\n"
         "    ret\n",
         {mkenv({{"rdi", kBufA}, {"rcx", 1}}),
          mkenv({{"rdi", kBufA}, {"rcx", 2}})}},
    };
    return corpus;
}

CorpusTally score_mini_corpus(const AnalysisConfig& cfg) {
    CorpusTally tally;
    for (const MiniFunction& mf : mini_corpus()) {
        Program prog = parse_program(mf.text);

        std::vector<Trace> traces;
        for (const Environment& env : mf.envs) {
            ExecResult r = execute(prog, mf.name, env);
            if (!r.ok())
                throw FixtureError(mf.name + ": " + r.error_detail);
            traces.push_back(std::move(r.trace));
        }

        DataFlowGraph dyn = build_interprocedural_dfg(traces);
        reconnect_save_restore(dyn, traces, prog);
        eliminate_clear_idioms(dyn, prog);
        std::set<Edge> d = edge_set(extract_intraprocedural(dyn, prog, mf.name));

        const Function* fn = prog.function(mf.name);
        std::set<Edge> s = edge_set(analyze_function(prog, *fn, cfg));

        for (const Edge& e : s)
            d.count(e) ? ++tally.tp : ++tally.fp;
        for (const Edge& e : d) {
            ++tally.dynamic_edges;
            if (!s.count(e)) ++tally.fn;
        }
    }
    return tally;
}

}  // namespace bfa
