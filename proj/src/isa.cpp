#include "bfa/isa.hpp"

#include <algorithm>
#include <array>

namespace bfa {

namespace {

const std::array<std::string, kRegCount + 1> kRegNames = {
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rsp", "rbp",
    "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15",
    "rip", "?",
};

struct AliasEntry {
    const char* name;
    RegRef ref;
};

// Every accepted spelling. Canonical rendering picks the first match for a
// given (base, off, width) triple, which these tables list first.
const AliasEntry kAliases[] = {
    {"rax", {Reg::rax, 0, 8}}, {"eax", {Reg::rax, 0, 4}}, {"ax", {Reg::rax, 0, 2}},
    {"al", {Reg::rax, 0, 1}},  {"ah", {Reg::rax, 1, 1}},
    {"rbx", {Reg::rbx, 0, 8}}, {"ebx", {Reg::rbx, 0, 4}}, {"bx", {Reg::rbx, 0, 2}},
    {"bl", {Reg::rbx, 0, 1}},  {"bh", {Reg::rbx, 1, 1}},
    {"rcx", {Reg::rcx, 0, 8}}, {"ecx", {Reg::rcx, 0, 4}}, {"cx", {Reg::rcx, 0, 2}},
    {"cl", {Reg::rcx, 0, 1}},  {"ch", {Reg::rcx, 1, 1}},
    {"rdx", {Reg::rdx, 0, 8}}, {"edx", {Reg::rdx, 0, 4}}, {"dx", {Reg::rdx, 0, 2}},
    {"dl", {Reg::rdx, 0, 1}},  {"dh", {Reg::rdx, 1, 1}},
    {"rsi", {Reg::rsi, 0, 8}}, {"esi", {Reg::rsi, 0, 4}}, {"si", {Reg::rsi, 0, 2}},
    {"sil", {Reg::rsi, 0, 1}},
    {"rdi", {Reg::rdi, 0, 8}}, {"edi", {Reg::rdi, 0, 4}}, {"di", {Reg::rdi, 0, 2}},
    {"dil", {Reg::rdi, 0, 1}},
    {"rsp", {Reg::rsp, 0, 8}}, {"esp", {Reg::rsp, 0, 4}}, {"sp", {Reg::rsp, 0, 2}},
    {"spl", {Reg::rsp, 0, 1}},
    {"rbp", {Reg::rbp, 0, 8}}, {"ebp", {Reg::rbp, 0, 4}}, {"bp", {Reg::rbp, 0, 2}},
    {"bpl", {Reg::rbp, 0, 1}},
    {"r8", {Reg::r8, 0, 8}},   {"r8d", {Reg::r8, 0, 4}},  {"r8w", {Reg::r8, 0, 2}},
    {"r8b", {Reg::r8, 0, 1}},
    {"r9", {Reg::r9, 0, 8}},   {"r9d", {Reg::r9, 0, 4}},  {"r9w", {Reg::r9, 0, 2}},
    {"r9b", {Reg::r9, 0, 1}},
    {"r10", {Reg::r10, 0, 8}}, {"r10d", {Reg::r10, 0, 4}}, {"r10w", {Reg::r10, 0, 2}},
    {"r10b", {Reg::r10, 0, 1}},
    {"r11", {Reg::r11, 0, 8}}, {"r11d", {Reg::r11, 0, 4}}, {"r11w", {Reg::r11, 0, 2}},
    {"r11b", {Reg::r11, 0, 1}},
    {"r12", {Reg::r12, 0, 8}}, {"r12d", {Reg::r12, 0, 4}}, {"r12w", {Reg::r12, 0, 2}},
    {"r12b", {Reg::r12, 0, 1}},
    {"r13", {Reg::r13, 0, 8}}, {"r13d", {Reg::r13, 0, 4}}, {"r13w", {Reg::r13, 0, 2}},
    {"r13b", {Reg::r13, 0, 1}},
    {"r14", {Reg::r14, 0, 8}}, {"r14d", {Reg::r14, 0, 4}}, {"r14w", {Reg::r14, 0, 2}},
    {"r14b", {Reg::r14, 0, 1}},
    {"r15", {Reg::r15, 0, 8}}, {"r15d", {Reg::r15, 0, 4}}, {"r15w", {Reg::r15, 0, 2}},
    {"r15b", {Reg::r15, 0, 1}},
    {"rip", {Reg::rip, 0, 8}},
};

const std::array<std::string, 19> kMnemonicNames = {
    "mov", "lea", "add", "sub", "shl", "shr", "or", "and", "xor",
    "cmp", "test", "jmp", "jz", "jnz", "call", "ret", "push", "pop", "nop",
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

const std::string& reg_name(Reg r) {
    return kRegNames[static_cast<size_t>(r)];
}

std::optional<RegRef> lookup_reg(std::string_view name) {
    std::string n = lower(name);
    for (const auto& a : kAliases)
        if (n == a.name) return a.ref;
    return std::nullopt;
}

std::string reg_ref_name(const RegRef& r) {
    for (const auto& a : kAliases)
        if (a.ref == r) return a.name;
    return reg_name(r.base);
}

const std::string& mnemonic_name(Mn m) {
    return kMnemonicNames[static_cast<size_t>(m)];
}

std::optional<Mn> lookup_mnemonic(std::string_view name) {
    std::string n = lower(name);
    for (size_t i = 0; i < kMnemonicNames.size(); ++i)
        if (n == kMnemonicNames[i]) return static_cast<Mn>(i);
    return std::nullopt;
}

const MemExpr* Instruction::mem_operand() const {
    if (mn == Mn::lea) {
        // The source of lea is an address computation, not a memory access.
        return nullptr;
    }
    for (const auto& op : ops)
        if (const auto* m = std::get_if<MemExpr>(&op)) return m;
    return nullptr;
}

bool Instruction::reads_memory() const {
    switch (mn) {
        case Mn::pop:
        case Mn::ret:
            return true;
        case Mn::push:
        case Mn::call:
        case Mn::lea:
        case Mn::nop:
        case Mn::jmp:
        case Mn::jz:
        case Mn::jnz:
            return mn == Mn::push && !ops.empty() &&
                   std::holds_alternative<MemExpr>(ops[0]);
        case Mn::mov:
            return ops.size() == 2 && std::holds_alternative<MemExpr>(ops[1]);
        default:
            // Arithmetic and comparisons read a memory operand wherever it
            // appears: a memory destination is read-modify-write.
            for (const auto& op : ops)
                if (std::holds_alternative<MemExpr>(op)) return true;
            return false;
    }
}

bool Instruction::writes_memory() const {
    switch (mn) {
        case Mn::push:
        case Mn::call:
            return true;  // stack slot for the pushed value / return address
        case Mn::mov:
        case Mn::add:
        case Mn::sub:
        case Mn::shl:
        case Mn::shr:
        case Mn::bor:
        case Mn::band:
        case Mn::bxor:
            return !ops.empty() && std::holds_alternative<MemExpr>(ops[0]);
        default:
            return false;
    }
}

unsigned access_width(const Instruction& in) {
    switch (in.mn) {
        case Mn::push:
        case Mn::pop:
        case Mn::call:
        case Mn::ret:
            return 8;
        case Mn::lea:
            return 0;
        default:
            break;
    }
    const MemExpr* mem = nullptr;
    for (const auto& op : in.ops)
        if (const auto* m = std::get_if<MemExpr>(&op)) mem = m;
    if (!mem) return 0;
    if (mem->width != 0) return mem->width;
    for (const auto& op : in.ops)
        if (const auto* r = std::get_if<RegRef>(&op)) return r->width;
    throw IsaError("ambiguous memory access width: no size prefix and no register operand");
}

bool is_clear_idiom(const Instruction& in, Reg* reg_out) {
    if (in.mn != Mn::bxor && in.mn != Mn::sub) return false;
    if (in.ops.size() != 2) return false;
    const auto* a = std::get_if<RegRef>(&in.ops[0]);
    const auto* b = std::get_if<RegRef>(&in.ops[1]);
    if (!a || !b || !(*a == *b)) return false;
    if (!(a->width == 8 || (a->width == 4 && a->off == 0))) return false;
    if (reg_out) *reg_out = a->base;
    return true;
}

const Instruction* Function::at(uint64_t addr) const {
    auto it = std::lower_bound(insns.begin(), insns.end(), addr,
                               [](const Instruction& i, uint64_t a) { return i.addr < a; });
    if (it != insns.end() && it->addr == addr) return &*it;
    return nullptr;
}

const Function* Program::function(std::string_view name) const {
    for (const auto& f : functions)
        if (f.name == name) return &f;
    return nullptr;
}

const Function* Program::function_containing(uint64_t addr) const {
    for (const auto& f : functions)
        if (f.contains(addr)) return &f;
    return nullptr;
}

const Instruction* Program::instruction(uint64_t addr) const {
    const Function* f = function_containing(addr);
    return f ? f->at(addr) : nullptr;
}

}  // namespace bfa
