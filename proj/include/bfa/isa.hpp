#pragma once

// Core x86-64 subset: registers, operands, instructions, functions, programs.
// This is the interchange layer every other component builds on.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bfa {

enum class Reg : uint8_t {
    rax, rbx, rcx, rdx, rsi, rdi, rsp, rbp,
    r8, r9, r10, r11, r12, r13, r14, r15,
    rip,
    count
};

constexpr size_t kRegCount = static_cast<size_t>(Reg::count);

// A concrete register reference: canonical base register plus the byte window
// the textual alias selects (e.g. ah = rax bytes [1,2), edi = rdi bytes [0,4)).
struct RegRef {
    Reg base = Reg::rax;
    uint8_t off = 0;    // byte offset within the 64-bit register
    uint8_t width = 8;  // access width in bytes: 1, 2, 4, 8

    bool operator==(const RegRef&) const = default;
};

const std::string& reg_name(Reg r);                       // canonical ("rax")
std::optional<RegRef> lookup_reg(std::string_view name);  // any accepted alias
std::string reg_ref_name(const RegRef& r);                // alias for (base,off,width)

// Numeric register-byte id used in trace files: index*8 + byte offset.
inline uint64_t reg_byte_id(Reg r, unsigned byte) {
    return static_cast<uint64_t>(r) * 8 + byte;
}

enum class Mn : uint8_t {
    mov, lea, add, sub, shl, shr, bor, band, bxor,
    cmp, test, jmp, jz, jnz, call, ret, push, pop, nop
};

const std::string& mnemonic_name(Mn m);
std::optional<Mn> lookup_mnemonic(std::string_view name);

struct Immediate {
    int64_t value = 0;
    bool operator==(const Immediate&) const = default;
};

struct MemExpr {
    std::optional<Reg> base;   // 64-bit base register (may be rip)
    std::optional<Reg> index;  // 64-bit index register
    uint8_t scale = 1;         // 1, 2, 4, 8 (meaningful when index set)
    int64_t disp = 0;
    uint8_t width = 0;         // access bytes 1/2/4/8; 0 until known

    bool operator==(const MemExpr&) const = default;
};

struct SymbolRef {
    std::string name;
    bool operator==(const SymbolRef&) const = default;
};

using Operand = std::variant<RegRef, Immediate, MemExpr, SymbolRef>;

struct Instruction {
    uint64_t addr = 0;
    Mn mn = Mn::nop;
    std::vector<Operand> ops;
    std::string label;  // label defined at this address, if any

    bool reads_memory() const;
    bool writes_memory() const;
    const MemExpr* mem_operand() const;  // first memory operand, if any
};

struct Function {
    std::string name;
    uint64_t entry = 0;
    std::vector<Instruction> insns;  // in address order

    const Instruction* at(uint64_t addr) const;
    bool contains(uint64_t addr) const { return at(addr) != nullptr; }
};

struct GlobalVar {
    uint64_t addr = 0;
    uint64_t size = 0;
};

struct Program {
    std::vector<Function> functions;
    std::map<std::string, GlobalVar> globals;
    std::set<std::string> allocator_symbols{"malloc"};

    const Function* function(std::string_view name) const;
    const Function* function_containing(uint64_t addr) const;
    const Instruction* instruction(uint64_t addr) const;
};

struct IsaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Effective access width of the instruction's memory operand: an explicit
// size prefix wins, otherwise the width of the paired register operand.
// Throws IsaError when neither determines it (e.g. "mov [rax], 0").
// push/pop/call/ret are fixed 8-byte stack accesses. lea accesses nothing
// and reports 0.
unsigned access_width(const Instruction& in);

// xor r, r / sub r, r leave a constant behind; the operand read is not a
// real dependency. 32-bit forms clear the full register too.
bool is_clear_idiom(const Instruction& in, Reg* reg_out = nullptr);

}  // namespace bfa
