#include "bfa/cfg.hpp"

#include <algorithm>

namespace bfa {

std::optional<uint64_t> branch_target(const Program& prog, const Function& fn,
                                      const Instruction& in) {
    if (in.ops.empty()) return std::nullopt;
    if (const auto* imm = std::get_if<Immediate>(&in.ops[0]))
        return static_cast<uint64_t>(imm->value);
    if (const auto* sym = std::get_if<SymbolRef>(&in.ops[0])) {
        for (const auto& i : fn.insns)
            if (i.label == sym->name) return i.addr;
        if (const Function* callee = prog.function(sym->name)) return callee->entry;
    }
    return std::nullopt;
}

Cfg build_cfg(const Program& prog, const Function& fn) {
    Cfg cfg;
    if (fn.insns.empty()) return cfg;
    cfg.entry = fn.entry;

    auto is_branch = [](Mn m) { return m == Mn::jmp || m == Mn::jz || m == Mn::jnz; };
    auto ends_block = [&](Mn m) { return is_branch(m) || m == Mn::ret; };

    std::set<uint64_t> leaders{fn.entry};
    for (size_t i = 0; i < fn.insns.size(); ++i) {
        const Instruction& in = fn.insns[i];
        if (is_branch(in.mn)) {
            auto tgt = branch_target(prog, fn, in);
            if (!tgt || !fn.contains(*tgt))
                throw CfgError("branch at 0x" + [&] {
                    char buf[32];
                    snprintf(buf, sizeof buf, "%llx", (unsigned long long)in.addr);
                    return std::string(buf);
                }() + " targets an address outside the function");
            leaders.insert(*tgt);
        }
        if (ends_block(in.mn) && i + 1 < fn.insns.size())
            leaders.insert(fn.insns[i + 1].addr);
    }

    BasicBlock* bb = nullptr;
    for (size_t i = 0; i < fn.insns.size(); ++i) {
        const Instruction& in = fn.insns[i];
        if (leaders.count(in.addr)) {
            bb = &cfg.blocks[in.addr];
            bb->leader = in.addr;
        }
        bb->insns.push_back(in.addr);
        const Instruction* next = i + 1 < fn.insns.size() ? &fn.insns[i + 1] : nullptr;
        bool last_in_block = !next || leaders.count(next->addr);
        if (!last_in_block) continue;
        switch (in.mn) {
            case Mn::jmp:
                bb->succs.push_back(*branch_target(prog, fn, in));
                break;
            case Mn::jz:
            case Mn::jnz:
                bb->succs.push_back(*branch_target(prog, fn, in));
                if (next) bb->succs.push_back(next->addr);
                break;
            case Mn::ret:
                break;
            default:
                if (next) bb->succs.push_back(next->addr);
                break;
        }
    }

    // Successor lists point at leaders; conditional fallthrough targets are
    // leaders by construction. Deduplicate jz-to-next style edges.
    for (auto& [lead, block] : cfg.blocks) {
        auto& s = block.succs;
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    return cfg;
}

}  // namespace bfa
