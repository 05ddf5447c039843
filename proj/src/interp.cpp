#include "bfa/interp.hpp"

#include <array>
#include <unordered_map>

#include <json.hpp>

#include "bfa/cfg.hpp"
#include "bfa/render.hpp"

namespace bfa {

namespace {

using ordered_json = nlohmann::ordered_json;

struct Region {
    uint64_t lo, hi;
};
constexpr Region kRegions[] = {
    {kGlobalBase, kGlobalBase + kGlobalSize},
    {kHeapBase, kHeapBase + kHeapSize},
    {kArenaBase, kArenaBase + kArenaSize},
    {kStackLo, kStackHi},
};

struct Fault {
    InterpErrorKind kind;
    std::string detail;
};

uint64_t width_mask(unsigned w) {
    return w >= 8 ? ~0ull : (1ull << (w * 8)) - 1;
}

uint64_t align16(uint64_t v) { return (v + 15) & ~15ull; }

std::string hex(uint64_t v) {
    char buf[32];
    snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

class Machine {
  public:
    Machine(const Program& prog, const Environment& env) : prog_(prog), env_(env) {}

    ExecResult run(const std::string& entry) {
        try {
            setup(entry);
            loop();
        } catch (const Fault& f) {
            res_.error = f.kind;
            res_.error_detail = f.detail;
        }
        return std::move(res_);
    }

  private:
    const Program& prog_;
    const Environment& env_;
    ExecResult res_;

    std::array<uint64_t, kRegCount> regs_{};
    std::array<uint8_t, kRegCount> def_{};
    std::unordered_map<uint64_t, uint8_t> mem_;
    bool zf_ = false, zf_def_ = false;
    uint64_t heap_cursor_ = kHeapBase;

    std::vector<uint32_t> ctx_stack_;
    const Function* fn_ = nullptr;
    size_t idx_ = 0;
    bool halted_ = false;
    bool jumped_ = false;

    const Instruction& cur() const { return fn_->insns[idx_]; }
    uint64_t next_addr() const {
        if (idx_ + 1 < fn_->insns.size()) return fn_->insns[idx_ + 1].addr;
        return kHaltAddr;  // falling past the end faults on use
    }
    uint32_t ctx() const { return ctx_stack_.back(); }

    [[noreturn]] void fault(InterpErrorKind k, std::string detail) {
        throw Fault{k, std::move(detail)};
    }

    void emit(Access a, std::string channel, uint64_t loc, uint32_t size) {
        res_.trace.events.push_back(
            TraceEvent{cur().addr, a, std::move(channel), loc, size, ctx()});
    }

    uint32_t new_context(const std::string& function, bool allocator) {
        uint32_t id = static_cast<uint32_t>(res_.trace.contexts.size());
        uint32_t parent = ctx_stack_.empty() ? id : ctx();
        res_.trace.contexts.push_back(ContextInfo{id, function, parent, allocator});
        return id;
    }

    void setup(const std::string& entry) {
        const Function* f = prog_.function(entry);
        if (!f) fault(InterpErrorKind::NoEntry, "no function named '" + entry + "'");
        fn_ = f;
        idx_ = 0;

        regs_[static_cast<size_t>(Reg::rsp)] = kStackInit;
        def_[static_cast<size_t>(Reg::rsp)] = 0xff;
        def_[static_cast<size_t>(Reg::rip)] = 0xff;
        for (const auto& [name, value] : env_.regs) {
            auto rr = lookup_reg(name);
            if (!rr)
                fault(InterpErrorKind::NoEntry,
                      "environment sets unknown register '" + name + "'");
            set_reg_raw(*rr, value);
        }
        for (const auto& [addr, bytes] : env_.mem)
            for (size_t i = 0; i < bytes.size(); ++i) mem_[addr + i] = bytes[i];

        // Return-to-halt sentinel in the initial stack slot.
        uint64_t halt = kHaltAddr;
        for (int i = 0; i < 8; ++i)
            mem_[kStackInit + i] = static_cast<uint8_t>(halt >> (i * 8));

        ctx_stack_.push_back(new_context(entry, false));
    }

    void set_reg_raw(const RegRef& r, uint64_t v) {
        size_t i = static_cast<size_t>(r.base);
        if (r.width == 8) {
            regs_[i] = v;
            def_[i] = 0xff;
        } else if (r.width == 4 && r.off == 0) {
            regs_[i] = v & 0xffffffffull;
            def_[i] = 0xff;
        } else {
            uint64_t mask = width_mask(r.width) << (r.off * 8);
            regs_[i] = (regs_[i] & ~mask) | ((v << (r.off * 8)) & mask);
            for (unsigned b = r.off; b < unsigned(r.off) + r.width; ++b)
                def_[i] |= uint8_t(1u << b);
        }
    }

    uint64_t read_ref(const RegRef& r) {
        size_t i = static_cast<size_t>(r.base);
        for (unsigned b = r.off; b < unsigned(r.off) + r.width; ++b)
            if (!(def_[i] & (1u << b)))
                fault(InterpErrorKind::UndefinedRegisterRead,
                      "read of undefined register " + reg_ref_name(r) + " at " +
                          hex(cur().addr));
        emit(Access::Read, reg_name(r.base), reg_byte_id(r.base, r.off), r.width);
        return (regs_[i] >> (r.off * 8)) & width_mask(r.width);
    }

    void write_ref(const RegRef& r, uint64_t v) {
        // 32-bit destinations zero the upper half, so the whole register is
        // written; narrower destinations leave the other bytes alone.
        bool full = r.width == 8 || (r.width == 4 && r.off == 0);
        set_reg_raw(r, v & width_mask(r.width));
        emit(Access::Write, reg_name(r.base), reg_byte_id(r.base, full ? 0 : r.off),
             full ? 8 : r.width);
    }

    uint64_t read_reg64(Reg r) { return read_ref(RegRef{r, 0, 8}); }

    void check_region(uint64_t addr, unsigned size) {
        for (const Region& rg : kRegions)
            if (addr >= rg.lo && addr + size <= rg.hi) return;
        fault(InterpErrorKind::OutOfRegion,
              "access to " + hex(addr) + " size " + std::to_string(size) + " at " +
                  hex(cur().addr) + " hits no mapped region");
    }

    uint64_t mem_address(const MemExpr& m) {
        uint64_t a = static_cast<uint64_t>(m.disp);
        if (m.base) {
            if (*m.base == Reg::rip)
                a += next_addr();
            else
                a += read_reg64(*m.base);
        }
        if (m.index) a += read_reg64(*m.index) * m.scale;
        return a;
    }

    uint64_t load(uint64_t addr, unsigned size) {
        check_region(addr, size);
        emit(Access::Read, "mem", addr, size);
        uint64_t v = 0;
        for (unsigned i = 0; i < size; ++i) {
            auto it = mem_.find(addr + i);
            uint64_t byte = it == mem_.end() ? 0 : it->second;
            v |= byte << (i * 8);
        }
        return v;
    }

    void store(uint64_t addr, unsigned size, uint64_t v) {
        check_region(addr, size);
        emit(Access::Write, "mem", addr, size);
        for (unsigned i = 0; i < size; ++i)
            mem_[addr + i] = static_cast<uint8_t>(v >> (i * 8));
    }

    unsigned op_width(const Instruction& in, const Operand& op) {
        if (const auto* r = std::get_if<RegRef>(&op)) return r->width;
        if (std::holds_alternative<MemExpr>(op)) return access_width(in);
        return 8;
    }

    uint64_t read_operand(const Instruction& in, const Operand& op) {
        if (const auto* r = std::get_if<RegRef>(&op)) return read_ref(*r);
        if (const auto* imm = std::get_if<Immediate>(&op))
            return static_cast<uint64_t>(imm->value);
        if (const auto* m = std::get_if<MemExpr>(&op))
            return load(mem_address(*m), access_width(in));
        fault(InterpErrorKind::BadTarget,
              "symbolic operand in data position at " + hex(in.addr));
    }

    void jump_to(uint64_t addr) {
        const Function* f = prog_.function_containing(addr);
        if (!f)
            fault(InterpErrorKind::BadTarget,
                  "jump to " + hex(addr) + " which is not an instruction");
        const Instruction* at = f->at(addr);
        if (!at)
            fault(InterpErrorKind::BadTarget,
                  "jump to " + hex(addr) + " which is not an instruction");
        fn_ = f;
        idx_ = static_cast<size_t>(at - f->insns.data());
        jumped_ = true;
    }

    void do_push_value(uint64_t v) {
        uint64_t sp = read_reg64(Reg::rsp);
        write_ref(RegRef{Reg::rsp, 0, 8}, sp - 8);
        store(sp - 8, 8, v);
    }

    void do_call(const Instruction& in) {
        const auto* sym = std::get_if<SymbolRef>(&in.ops[0]);
        std::optional<uint64_t> target = branch_target(prog_, *fn_, in);
        const Function* callee =
            target ? prog_.function_containing(*target) : nullptr;
        if (callee && target == callee->entry) {
            do_push_value(next_addr());
            ctx_stack_.push_back(new_context(callee->name, false));
            jump_to(*target);
            return;
        }
        if (!sym)
            fault(InterpErrorKind::BadTarget,
                  "call target at " + hex(in.addr) + " is not a function entry");

        // External model: allocators hand out fresh heap, everything else
        // just answers 0. Either way only rax changes, inside a synthetic
        // activation of the external symbol.
        bool alloc = prog_.allocator_symbols.count(sym->name) > 0;
        ctx_stack_.push_back(new_context(sym->name, alloc));
        if (alloc) {
            uint64_t size = read_reg64(Reg::rdi);
            uint64_t p = heap_cursor_;
            heap_cursor_ += align16(size) + 16;
            if (heap_cursor_ > kHeapBase + kHeapSize)
                fault(InterpErrorKind::OutOfRegion, "heap exhausted at " + hex(in.addr));
            write_ref(RegRef{Reg::rax, 0, 8}, p);
        } else {
            write_ref(RegRef{Reg::rax, 0, 8}, 0);
        }
        ctx_stack_.pop_back();
        zf_def_ = false;
    }

    void do_ret() {
        uint64_t sp = read_reg64(Reg::rsp);
        uint64_t target = load(sp, 8);
        write_ref(RegRef{Reg::rsp, 0, 8}, sp + 8);
        if (!ctx_stack_.empty()) ctx_stack_.pop_back();
        if (target == kHaltAddr) {
            halted_ = true;
            return;
        }
        if (ctx_stack_.empty())
            fault(InterpErrorKind::BadTarget,
                  "return past the root activation to " + hex(target));
        jump_to(target);
    }

    void step() {
        const Instruction& in = cur();
        jumped_ = false;
        switch (in.mn) {
            case Mn::nop:
                break;
            case Mn::mov: {
                uint64_t v = read_operand(in, in.ops[1]);
                if (const auto* r = std::get_if<RegRef>(&in.ops[0])) {
                    write_ref(*r, v);
                } else {
                    const auto& m = std::get<MemExpr>(in.ops[0]);
                    store(mem_address(m), access_width(in), v);
                }
                break;
            }
            case Mn::lea: {
                const auto& m = std::get<MemExpr>(in.ops[1]);
                uint64_t a = mem_address(m);
                write_ref(std::get<RegRef>(in.ops[0]), a);
                break;
            }
            case Mn::add:
            case Mn::sub:
            case Mn::shl:
            case Mn::shr:
            case Mn::bor:
            case Mn::band:
            case Mn::bxor: {
                unsigned w = op_width(in, in.ops[0]);
                uint64_t rhs = read_operand(in, in.ops[1]);
                uint64_t addr = 0;
                uint64_t lhs;
                const auto* mdst = std::get_if<MemExpr>(&in.ops[0]);
                if (mdst) {
                    addr = mem_address(*mdst);
                    w = access_width(in);
                    check_region(addr, w);
                    lhs = load(addr, w);
                } else {
                    lhs = read_ref(std::get<RegRef>(in.ops[0]));
                }
                uint64_t out = 0;
                switch (in.mn) {
                    case Mn::add: out = lhs + rhs; break;
                    case Mn::sub: out = lhs - rhs; break;
                    case Mn::shl: out = lhs << (rhs & 63); break;
                    case Mn::shr: out = (lhs & width_mask(w)) >> (rhs & 63); break;
                    case Mn::bor: out = lhs | rhs; break;
                    case Mn::band: out = lhs & rhs; break;
                    case Mn::bxor: out = lhs ^ rhs; break;
                    default: break;
                }
                out &= width_mask(w);
                zf_ = out == 0;
                zf_def_ = true;
                if (mdst) {
                    store(addr, w, out);
                } else {
                    write_ref(std::get<RegRef>(in.ops[0]), out);
                }
                break;
            }
            case Mn::cmp:
            case Mn::test: {
                unsigned w = op_width(in, in.ops[0]);
                uint64_t a = read_operand(in, in.ops[0]);
                uint64_t b = read_operand(in, in.ops[1]);
                uint64_t out = in.mn == Mn::cmp ? a - b : a & b;
                zf_ = (out & width_mask(w)) == 0;
                zf_def_ = true;
                break;
            }
            case Mn::jmp: {
                auto t = branch_target(prog_, *fn_, in);
                if (!t)
                    fault(InterpErrorKind::BadTarget,
                          "unresolved jump at " + hex(in.addr));
                jump_to(*t);
                break;
            }
            case Mn::jz:
            case Mn::jnz: {
                if (!zf_def_)
                    fault(InterpErrorKind::UndefinedFlagBranch,
                          "conditional branch on undefined flags at " + hex(in.addr));
                auto t = branch_target(prog_, *fn_, in);
                if (!t)
                    fault(InterpErrorKind::BadTarget,
                          "unresolved branch at " + hex(in.addr));
                bool take = in.mn == Mn::jz ? zf_ : !zf_;
                if (take) jump_to(*t);
                break;
            }
            case Mn::push:
                do_push_value(read_operand(in, in.ops[0]));
                break;
            case Mn::pop: {
                uint64_t sp = read_reg64(Reg::rsp);
                uint64_t v = load(sp, 8);
                write_ref(std::get<RegRef>(in.ops[0]), v);
                write_ref(RegRef{Reg::rsp, 0, 8}, sp + 8);
                break;
            }
            case Mn::call:
                do_call(in);
                break;
            case Mn::ret:
                do_ret();
                break;
        }
        if (!halted_ && !jumped_) {
            if (idx_ + 1 >= fn_->insns.size())
                fault(InterpErrorKind::BadTarget,
                      "fell past the end of " + fn_->name);
            ++idx_;
        }
    }

    void loop() {
        while (!halted_) {
            if (++res_.steps > env_.step_limit)
                fault(InterpErrorKind::StepLimit,
                      "step limit of " + std::to_string(env_.step_limit) + " exceeded");
            step();
        }
    }
};

}  // namespace

ExecResult execute(const Program& prog, const std::string& entry,
                   const Environment& env) {
    return Machine(prog, env).run(entry);
}

bool trace_executed(const Trace& trace, uint64_t addr) {
    for (const auto& e : trace.events)
        if (e.instr == addr) return true;
    return false;
}

bool trace_has_flow(const Trace& trace, uint64_t write_addr, uint64_t read_addr) {
    std::unordered_map<uint64_t, uint64_t> writer;
    bool flow = false;
    for (const auto& e : trace.events) {
        if (e.channel != "mem") continue;
        if (e.access == Access::Read && e.instr == read_addr) {
            for (uint64_t b = e.location; b < e.location + e.size; ++b) {
                auto it = writer.find(b);
                if (it != writer.end() && it->second == write_addr) flow = true;
            }
        }
        if (e.access == Access::Write)
            for (uint64_t b = e.location; b < e.location + e.size; ++b)
                writer[b] = e.instr;
    }
    return flow;
}

FlowVerdict oracle_data_flow(const Program& prog, const std::string& entry,
                             uint64_t write_addr, uint64_t read_addr,
                             const std::vector<Environment>& envs) {
    size_t eligible = 0, flows = 0;
    for (const Environment& env : envs) {
        ExecResult r = execute(prog, entry, env);
        if (!trace_executed(r.trace, write_addr) ||
            !trace_executed(r.trace, read_addr))
            continue;
        ++eligible;
        if (trace_has_flow(r.trace, write_addr, read_addr)) ++flows;
    }
    if (eligible == 0)
        throw OracleError(
            "no environment executed both the store and the load; verdict would be vacuous");
    if (flows == eligible) return FlowVerdict::Always;
    if (flows == 0) return FlowVerdict::Never;
    return FlowVerdict::Sometimes;
}

std::string trace_to_jsonl(const Trace& trace) {
    std::string out;
    for (const auto& c : trace.contexts) {
        ordered_json j{{"context", c.id},
                       {"function", c.function},
                       {"parent", c.parent},
                       {"allocator", c.allocator}};
        out += j.dump();
        out += '\n';
    }
    for (const auto& e : trace.events) {
        ordered_json j{{"instr", e.instr},
                       {"access", e.access == Access::Write ? "W" : "R"},
                       {"channel", e.channel},
                       {"location", e.location},
                       {"size", e.size},
                       {"context", e.context}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

Trace trace_from_jsonl(std::string_view text) {
    Trace t;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line);
        if (j.contains("instr")) {
            TraceEvent e;
            e.instr = j.at("instr").get<uint64_t>();
            e.access = j.at("access").get<std::string>() == "W" ? Access::Write
                                                                : Access::Read;
            e.channel = j.at("channel").get<std::string>();
            e.location = j.at("location").get<uint64_t>();
            e.size = j.at("size").get<uint32_t>();
            e.context = j.at("context").get<uint32_t>();
            t.events.push_back(std::move(e));
        } else {
            ContextInfo c;
            c.id = j.at("context").get<uint32_t>();
            c.function = j.at("function").get<std::string>();
            c.parent = j.at("parent").get<uint32_t>();
            c.allocator = j.at("allocator").get<bool>();
            t.contexts.push_back(std::move(c));
        }
    }
    return t;
}

}  // namespace bfa
