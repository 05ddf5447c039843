#include "bfa/render.hpp"

#include <sstream>

namespace bfa {

namespace {

std::string hex_imm(int64_t v) {
    if (v == 0) return "0";
    std::ostringstream os;
    if (v < 0) {
        os << "-0x" << std::hex << static_cast<uint64_t>(-v);
    } else {
        os << "0x" << std::hex << static_cast<uint64_t>(v);
    }
    return os.str();
}

const char* size_prefix(uint8_t width) {
    switch (width) {
        case 1: return "BYTE PTR ";
        case 2: return "WORD PTR ";
        case 4: return "DWORD PTR ";
        case 8: return "QWORD PTR ";
        default: return "";
    }
}

}  // namespace

std::string render_mem(const MemExpr& m, bool with_prefix) {
    std::string out;
    if (with_prefix) out += size_prefix(m.width);
    out += '[';
    bool first = true;
    if (m.base) {
        out += reg_name(*m.base);
        first = false;
    }
    if (m.index) {
        if (!first) out += '+';
        out += reg_name(*m.index);
        // Keep an explicit *1 when there is no base so a reparse still sees
        // an index register rather than a base.
        if (m.scale != 1 || !m.base) {
            out += '*';
            out += std::to_string(m.scale);
        }
        first = false;
    }
    if (m.disp != 0 || first) {
        if (!first && m.disp >= 0) out += '+';
        if (first) {
            out += hex_imm(m.disp);
        } else if (m.disp >= 0) {
            out += hex_imm(m.disp);
        } else {
            out += "-";
            out += hex_imm(-m.disp).c_str();
        }
    }
    out += ']';
    return out;
}

std::string render_instruction(const Instruction& in) {
    std::string out = mnemonic_name(in.mn);
    bool first = true;
    for (const auto& op : in.ops) {
        out += first ? " " : ", ";
        first = false;
        if (const auto* r = std::get_if<RegRef>(&op)) {
            out += reg_ref_name(*r);
        } else if (const auto* imm = std::get_if<Immediate>(&op)) {
            out += hex_imm(imm->value);
        } else if (const auto* m = std::get_if<MemExpr>(&op)) {
            out += render_mem(*m, in.mn != Mn::lea);
        } else {
            out += std::get<SymbolRef>(op).name;
        }
    }
    return out;
}

std::string render_program(const Program& prog, bool with_addrs) {
    std::ostringstream os;
    for (const auto& [name, g] : prog.globals)
        os << ".global " << name << " 0x" << std::hex << g.addr << std::dec << " "
           << g.size << "\n";
    bool first_fn = true;
    for (const auto& f : prog.functions) {
        if (!first_fn) os << "\n";
        first_fn = false;
        os << f.name << ":\n";
        for (const auto& in : f.insns) {
            if (!in.label.empty()) os << in.label << ":\n";
            if (with_addrs) os << std::hex << in.addr << std::dec << ": ";
            os << render_instruction(in) << "\n";
        }
    }
    return os.str();
}

}  // namespace bfa
