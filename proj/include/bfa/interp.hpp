#pragma once

// Deterministic interpreter for the supported x86-64 subset. Execution
// produces a byte-granular access trace; the data-flow oracle replays
// traces from many environments and reports whether a store feeds a load
// always, sometimes, or never.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bfa/isa.hpp"

namespace bfa {

// Address space layout. Every valid data access falls inside exactly one of
// these windows; anything else is an out-of-region fault.
inline constexpr uint64_t kGlobalBase = 0x600000;
inline constexpr uint64_t kGlobalSize = 0x10000;
inline constexpr uint64_t kHeapBase = 0x1000000;
inline constexpr uint64_t kHeapSize = 0x100000;
inline constexpr uint64_t kArenaBase = 0x2000000;  // scratch for caller-owned buffers
inline constexpr uint64_t kArenaSize = 0x10000;
inline constexpr uint64_t kStackInit = 0x7fff0000;
inline constexpr uint64_t kStackLo = 0x7ffd0000;
inline constexpr uint64_t kStackHi = kStackInit + 0x10;

// Return-address sentinel planted at the initial stack slot; returning to it
// ends the run. Never a valid instruction address.
inline constexpr uint64_t kHaltAddr = 0xfffffffffffffff0ull;

struct Environment {
    // Initial register values, keyed by any accepted register spelling.
    // Registers not listed start undefined (rsp is always preset).
    std::map<std::string, uint64_t> regs;
    // Initial memory contents: starting address -> bytes.
    std::map<uint64_t, std::vector<uint8_t>> mem;
    uint64_t step_limit = 200000;
};

enum class Access : uint8_t { Read, Write };

struct TraceEvent {
    uint64_t instr = 0;    // address of the executing instruction
    Access access = Access::Read;
    std::string channel;   // canonical register name, or "mem"
    uint64_t location = 0; // byte address, or register byte id (index*8+off)
    uint32_t size = 0;     // bytes touched
    uint32_t context = 0;  // activation id

    bool operator==(const TraceEvent&) const = default;
};

struct ContextInfo {
    uint32_t id = 0;
    std::string function;
    uint32_t parent = 0;
    bool allocator = false;

    bool operator==(const ContextInfo&) const = default;
};

struct Trace {
    std::vector<ContextInfo> contexts;
    std::vector<TraceEvent> events;
};

enum class InterpErrorKind {
    StepLimit,
    UndefinedRegisterRead,
    UndefinedFlagBranch,
    OutOfRegion,
    BadTarget,
    NoEntry,
};

struct ExecResult {
    Trace trace;
    uint64_t steps = 0;
    std::optional<InterpErrorKind> error;
    std::string error_detail;

    bool ok() const { return !error.has_value(); }
};

// Runs entry to completion (or until a fault; the partial trace is kept).
// Internal calls create fresh activation contexts. Calls to undefined
// symbols never enter the program: an allocator symbol reserves fresh heap
// and yields the pointer in rax, any other external yields 0 in rax; both
// happen in a synthetic activation so caller-side flows stay separated.
ExecResult execute(const Program& prog, const std::string& entry,
                   const Environment& env);

enum class FlowVerdict { Always, Sometimes, Never };

struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Replays one trace and reports whether any byte stored by write_addr was
// loaded by read_addr before an intervening overwrite.
bool trace_has_flow(const Trace& trace, uint64_t write_addr, uint64_t read_addr);
bool trace_executed(const Trace& trace, uint64_t addr);

// Always: flow in every environment where both instructions executed.
// Never: flow in none of them. Throws OracleError when no environment
// executed both (the verdict would be vacuous).
FlowVerdict oracle_data_flow(const Program& prog, const std::string& entry,
                             uint64_t write_addr, uint64_t read_addr,
                             const std::vector<Environment>& envs);

// One JSON object per line: first the contexts in id order, then the events
// in execution order. Stable across runs.
std::string trace_to_jsonl(const Trace& trace);
Trace trace_from_jsonl(std::string_view text);

}  // namespace bfa
