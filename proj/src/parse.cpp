#include "bfa/parse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace bfa {

namespace {

struct Cursor {
    std::string_view s;
    size_t pos = 0;
    int line_no = 1;

    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    bool done() {
        skip_ws();
        return pos >= s.size();
    }
    char peek() {
        skip_ws();
        return pos < s.size() ? s[pos] : '\0';
    }
    bool eat(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(ParseErrorKind::Syntax, line_no, msg);
    }
};

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}
bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

std::string take_ident(Cursor& c) {
    c.skip_ws();
    size_t start = c.pos;
    if (c.pos < c.s.size() && ident_start(c.s[c.pos])) {
        ++c.pos;
        while (c.pos < c.s.size() && ident_char(c.s[c.pos])) ++c.pos;
    }
    return std::string(c.s.substr(start, c.pos - start));
}

bool all_hex(std::string_view t) {
    if (t.empty()) return false;
    return std::all_of(t.begin(), t.end(),
                       [](unsigned char c) { return std::isxdigit(c); });
}

// Numbers: optional sign, then 0x-hex or decimal.
std::optional<int64_t> take_number(Cursor& c) {
    c.skip_ws();
    size_t save = c.pos;
    bool neg = false;
    if (c.pos < c.s.size() && (c.s[c.pos] == '-' || c.s[c.pos] == '+')) {
        neg = c.s[c.pos] == '-';
        ++c.pos;
        c.skip_ws();
    }
    uint64_t value = 0;
    int base = 10;
    size_t digits_start = c.pos;
    if (c.pos + 1 < c.s.size() && c.s[c.pos] == '0' &&
        (c.s[c.pos + 1] == 'x' || c.s[c.pos + 1] == 'X')) {
        base = 16;
        c.pos += 2;
        digits_start = c.pos;
    }
    while (c.pos < c.s.size()) {
        char ch = c.s[c.pos];
        int d;
        if (ch >= '0' && ch <= '9') d = ch - '0';
        else if (base == 16 && ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
        else if (base == 16 && ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
        else break;
        value = value * base + static_cast<uint64_t>(d);
        ++c.pos;
    }
    if (c.pos == digits_start) {
        c.pos = save;
        return std::nullopt;
    }
    int64_t v = static_cast<int64_t>(value);
    return neg ? -v : v;
}

// Leading "hexaddr:" on an instruction line. Mnemonics spelled with hex
// letters only ("add") never match because they are not followed by ':'.
std::optional<uint64_t> take_addr_prefix(Cursor& c) {
    c.skip_ws();
    size_t save = c.pos;
    size_t start = c.pos;
    while (c.pos < c.s.size() && std::isxdigit(static_cast<unsigned char>(c.s[c.pos])))
        ++c.pos;
    if (c.pos > start && c.pos < c.s.size() && c.s[c.pos] == ':') {
        std::string tok(c.s.substr(start, c.pos - start));
        ++c.pos;
        return std::stoull(tok, nullptr, 16);
    }
    c.pos = save;
    return std::nullopt;
}

uint8_t width_prefix(const std::string& word) {
    if (word == "byte") return 1;
    if (word == "word") return 2;
    if (word == "dword") return 4;
    if (word == "qword") return 8;
    return 0;
}

MemExpr parse_mem(Cursor& c, uint8_t width) {
    MemExpr m;
    m.width = width;
    if (!c.eat('[')) c.fail("expected '['");
    bool first = true;
    int sign = 1;
    while (true) {
        if (c.eat(']')) break;
        if (!first) {
            if (c.eat('+')) sign = 1;
            else if (c.eat('-')) sign = -1;
            else c.fail("expected '+', '-' or ']' in memory operand");
        } else {
            sign = 1;
            if (c.eat('-')) sign = -1;
        }
        first = false;
        c.skip_ws();
        char ch = c.peek();
        if (ident_start(ch)) {
            std::string word = take_ident(c);
            auto rr = lookup_reg(word);
            if (!rr) c.fail("unknown register '" + word + "' in memory operand");
            if (rr->width != 8)
                c.fail("memory operands use 64-bit registers, got '" + word + "'");
            if (sign < 0) c.fail("registers cannot be subtracted in memory operands");
            if (c.eat('*')) {
                auto n = take_number(c);
                if (!n || (*n != 1 && *n != 2 && *n != 4 && *n != 8))
                    c.fail("scale must be 1, 2, 4 or 8");
                if (m.index) c.fail("multiple index registers");
                m.index = rr->base;
                m.scale = static_cast<uint8_t>(*n);
            } else if (!m.base) {
                m.base = rr->base;
            } else if (!m.index) {
                m.index = rr->base;
                m.scale = 1;
            } else {
                c.fail("too many registers in memory operand");
            }
        } else {
            auto n = take_number(c);
            if (!n) c.fail("expected register or displacement in memory operand");
            m.disp += sign * *n;
        }
    }
    return m;
}

Operand parse_operand(Cursor& c) {
    c.skip_ws();
    char ch = c.peek();
    if (ch == '[') return parse_mem(c, 0);
    if (ident_start(ch)) {
        size_t save = c.pos;
        std::string word = take_ident(c);
        std::string low = word;
        std::transform(low.begin(), low.end(), low.begin(),
                       [](unsigned char x) { return std::tolower(x); });
        if (uint8_t w = width_prefix(low)) {
            size_t after_width = c.pos;
            std::string ptr = take_ident(c);
            std::transform(ptr.begin(), ptr.end(), ptr.begin(),
                           [](unsigned char x) { return std::tolower(x); });
            if (ptr == "ptr") {
                return parse_mem(c, w);
            }
            if (ptr.empty() && c.peek() == '[') {
                c.pos = after_width;
                return parse_mem(c, w);
            }
            c.pos = save;
            word = take_ident(c);
        }
        if (auto rr = lookup_reg(word)) return *rr;
        return SymbolRef{word};
    }
    auto n = take_number(c);
    if (!n) c.fail("expected operand");
    return Immediate{*n};
}

constexpr unsigned arity(Mn m) {
    switch (m) {
        case Mn::ret:
        case Mn::nop:
            return 0;
        case Mn::jmp:
        case Mn::jz:
        case Mn::jnz:
        case Mn::call:
        case Mn::push:
        case Mn::pop:
            return 1;
        default:
            return 2;
    }
}

Instruction parse_instruction_line(Cursor& c) {
    Instruction in;
    std::string word = take_ident(c);
    if (word.empty()) c.fail("expected mnemonic");
    auto mn = lookup_mnemonic(word);
    if (!mn)
        throw ParseError(ParseErrorKind::UnknownMnemonic, c.line_no,
                         "unknown mnemonic '" + word + "'");
    in.mn = *mn;
    unsigned want = arity(in.mn);
    for (unsigned i = 0; i < want; ++i) {
        if (i > 0 && !c.eat(',')) c.fail("expected ','");
        in.ops.push_back(parse_operand(c));
    }
    if (!c.done()) c.fail("trailing characters after instruction");

    unsigned mem_ops = 0;
    for (const auto& op : in.ops)
        if (std::holds_alternative<MemExpr>(op)) ++mem_ops;
    if (mem_ops > 1) c.fail("at most one memory operand per instruction");

    if (in.mn == Mn::lea) {
        if (!std::holds_alternative<RegRef>(in.ops[0]) ||
            !std::holds_alternative<MemExpr>(in.ops[1]))
            c.fail("lea takes a register destination and a memory source");
        // lea computes an address; there is no memory access to size.
        std::get<MemExpr>(in.ops[1]).width = 0;
    }

    // Resolve a missing size prefix from the paired register, so the parsed
    // form matches what the canonical renderer would print.
    for (auto& op : in.ops) {
        auto* m = std::get_if<MemExpr>(&op);
        if (!m || in.mn == Mn::lea || m->width != 0) continue;
        for (const auto& other : in.ops)
            if (const auto* r = std::get_if<RegRef>(&other)) m->width = r->width;
    }
    return in;
}

std::string_view strip_comment(std::string_view line) {
    size_t cut = line.find_first_of(";#");
    if (cut != std::string_view::npos) line = line.substr(0, cut);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
        line.remove_suffix(1);
    return line;
}

}  // namespace

Instruction parse_instruction(std::string_view line) {
    Cursor c{strip_comment(line)};
    auto addr = take_addr_prefix(c);
    Instruction in = parse_instruction_line(c);
    if (addr) in.addr = *addr;
    return in;
}

Program parse_program(std::string_view text) {
    Program prog;
    struct PendingLabel {
        std::string name;
        int line;
    };
    std::vector<PendingLabel> pending;
    std::set<std::string> seen_labels;
    Function* cur = nullptr;
    uint64_t next_addr = 0x1000;
    uint64_t last_addr = 0;
    bool have_last = false;

    // Labels referenced by branches are local; everything else opens a
    // function. Scan targets first so classification is order-independent.
    std::set<std::string> branch_targets;
    {
        size_t pos = 0;
        int line_no = 0;
        while (pos <= text.size()) {
            size_t eol = text.find('\n', pos);
            std::string_view line = text.substr(
                pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
            ++line_no;
            pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
            line = strip_comment(line);
            Cursor c{line, 0, line_no};
            if (c.done()) continue;
            take_addr_prefix(c);
            std::string tok = take_ident(c);
            if ((tok == "jmp" || tok == "jz" || tok == "jnz")) {
                std::string tgt = take_ident(c);
                if (!tgt.empty()) branch_targets.insert(tgt);
            }
        }
    }

    auto flush_labels_as_function = [&](const PendingLabel& pl) {
        prog.functions.push_back(Function{pl.name, 0, {}});
        cur = &prog.functions.back();
    };

    size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view raw = text.substr(
            pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        ++line_no;
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        std::string_view line = strip_comment(raw);
        Cursor c{line, 0, line_no};
        if (c.done()) continue;

        if (c.peek() == '.') {
            std::string dir = take_ident(c);
            if (dir == ".global") {
                std::string name = take_ident(c);
                auto addr = take_number(c);
                auto size = take_number(c);
                if (name.empty() || !addr || !size || !c.done())
                    c.fail(".global expects: name address size");
                if (prog.globals.count(name))
                    throw ParseError(ParseErrorKind::DuplicateLabel, line_no,
                                     "duplicate global '" + name + "'");
                prog.globals[name] =
                    GlobalVar{static_cast<uint64_t>(*addr), static_cast<uint64_t>(*size)};
                continue;
            }
            c.fail("unknown directive '" + dir + "'");
        }

        size_t save = c.pos;
        std::string tok = take_ident(c);
        if (!tok.empty() && c.peek() == ':') {
            Cursor probe = c;
            probe.eat(':');
            if (probe.done()) {
                // Standalone label line.
                if (!seen_labels.insert(tok).second)
                    throw ParseError(ParseErrorKind::DuplicateLabel, line_no,
                                     "duplicate label '" + tok + "'");
                if (branch_targets.count(tok)) {
                    if (!cur)
                        c.fail("local label '" + tok + "' before any function");
                    pending.push_back({tok, line_no});
                } else {
                    flush_labels_as_function({tok, line_no});
                }
                continue;
            }
            if (all_hex(tok) && !lookup_mnemonic(tok)) {
                // Address-prefixed instruction; fall through below.
                c.pos = save;
            } else {
                c.fail("labels must sit on their own line");
            }
        } else {
            c.pos = save;
        }

        // Instruction line.
        Cursor ic{line, c.pos, line_no};
        auto addr = take_addr_prefix(ic);
        Instruction in = parse_instruction_line(ic);
        in.addr = addr ? *addr : next_addr;
        if (have_last && in.addr <= last_addr)
            ic.fail("instruction addresses must be strictly increasing");
        last_addr = in.addr;
        have_last = true;
        next_addr = in.addr + 4;
        if (!cur) ic.fail("instruction before any function label");
        if (!pending.empty()) {
            if (pending.size() > 1)
                throw ParseError(ParseErrorKind::Syntax, pending[1].line,
                                 "multiple labels on one instruction");
            in.label = pending[0].name;
            pending.clear();
        }
        if (cur->insns.empty()) cur->entry = in.addr;
        cur->insns.push_back(std::move(in));
    }

    if (!pending.empty())
        throw ParseError(ParseErrorKind::Syntax, pending[0].line,
                         "label '" + pending[0].name + "' at end of input");
    for (const auto& f : prog.functions)
        if (f.insns.empty())
            throw ParseError(ParseErrorKind::Syntax, 0,
                             "function '" + f.name + "' has no instructions");
    return prog;
}

}  // namespace bfa
