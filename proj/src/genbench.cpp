#include "bfa/genbench.hpp"

#include <json.hpp>

#include <array>
#include <iomanip>
#include <sstream>

#include "bfa/parse.hpp"
#include "bfa/render.hpp"

namespace bfa {

namespace {

using ordered_json = nlohmann::ordered_json;
using XK = OffsetTransform::Kind;

// Canonical probe addresses. The write buffer ("A") sits at a fixed spot in
// each region; the read buffer ("B") for distinct-pointer cases is offset by
// a gap every stride divides, so collision witnesses stay integral.
constexpr uint64_t kDataSeed = 0xa1b2c3d4e5f60718ull;
constexpr uint64_t kForeignA = kArenaBase + 0x200;
constexpr uint64_t kPtrGap = 0x100;
constexpr uint64_t kGlobalW = 0x601000;
constexpr uint64_t kGlobalR = kGlobalW + kPtrGap;

uint64_t align16(uint64_t v) { return (v + 15) & ~15ull; }

std::string hex_u(uint64_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

unsigned len_capacity(LengthSpec l) {
    switch (l) {
        case LengthSpec::Const1: return 1;
        case LengthSpec::Const2: return 2;
        case LengthSpec::Var: return 4;
    }
    return 1;
}

const char* width_prefix(unsigned w) {
    switch (w) {
        case 1: return "BYTE PTR ";
        case 2: return "WORD PTR ";
        case 4: return "DWORD PTR ";
        default: return "QWORD PTR ";
    }
}

// The payload register: rdx family when the pointer itself rides in rdi
// (foreign arguments) or rax (heap), rdi family otherwise.
bool data_in_rdx(Origin o) { return o == Origin::Foreign || o == Origin::Heap; }

std::string data_reg(Origin o, unsigned w) {
    static const std::array<std::string, 4> rdx{"dl", "dx", "edx", "rdx"};
    static const std::array<std::string, 4> rdi{"dil", "di", "edi", "rdi"};
    const auto& fam = data_in_rdx(o) ? rdx : rdi;
    switch (w) {
        case 1: return fam[0];
        case 2: return fam[1];
        case 4: return fam[2];
        default: return fam[3];
    }
}

std::string dest_reg(unsigned w) {
    switch (w) {
        case 1: return "al";
        case 2: return "ax";
        case 4: return "eax";
        default: return "rax";
    }
}

void validate_config(const TestCaseConfig& c) {
    const PointerSpec& p = c.ptr;
    if (p.kind == ElemKind::Struct) {
        if (p.elem_size != 16)
            throw GenError("struct elements occupy a 16-byte stride");
    } else if (p.elem_size != 1 && p.elem_size != 2 && p.elem_size != 4 &&
               p.elem_size != 8) {
        throw GenError("element size must be 1, 2, 4 or 8");
    }
    const unsigned s = stride_bytes(p);
    const unsigned w = access_bytes(p);
    const unsigned cap = len_capacity(p.length);
    for (const OffsetTransform* x : {&c.write_xform, &c.read_xform}) {
        switch (x->kind) {
            case XK::None:
                break;
            case XK::ConstElem:
                if (x->k < 0 || unsigned(x->k) >= cap)
                    throw GenError("element offset outside the buffer");
                break;
            case XK::ConstByte:
                if (p.length == LengthSpec::Const1)
                    throw GenError("byte offsets need at least two elements");
                if (x->k <= 0 || unsigned(x->k) + w > cap * s)
                    throw GenError("byte offset outside the buffer");
                break;
            case XK::VarReg:
                switch (x->reg) {
                    case Reg::rax: case Reg::rbx: case Reg::rcx: case Reg::rdx:
                    case Reg::rdi: case Reg::rsi: case Reg::rsp: case Reg::rbp:
                    case Reg::r10: case Reg::rip:
                        throw GenError("index register collides with a fixed role");
                    default:
                        break;
                }
                break;
        }
    }
}

FlowDegree concrete_degree(const TestCaseConfig& c) {
    if (c.write_xform.kind == XK::VarReg || c.read_xform.kind == XK::VarReg)
        return FlowDegree::Possible;
    if (c.distinct_pointers)
        return c.ptr.origin == Origin::Foreign ? FlowDegree::Possible
                                               : FlowDegree::Impossible;
    const int64_t wd = xform_disp(c.write_xform, c.ptr);
    const int64_t rd = xform_disp(c.read_xform, c.ptr);
    const int64_t w = access_bytes(c.ptr);
    return (wd < rd + w && rd < wd + w) ? FlowDegree::Unconditional
                                        : FlowDegree::Impossible;
}

std::vector<OffsetTransform> write_xforms(const PointerSpec& p) {
    std::vector<OffsetTransform> v{{}};
    if (p.length != LengthSpec::Const1) v.push_back({XK::ConstElem, 1, Reg::r9});
    if (p.length == LengthSpec::Var) {
        v.push_back({XK::ConstElem, 2, Reg::r9});
        v.push_back({XK::VarReg, 0, Reg::r8});
    }
    return v;
}

// Read-side probes add deeper element offsets, a second index register, and
// sub-stride byte offsets so overlapping-but-unequal ranges appear.
std::vector<OffsetTransform> read_xforms(const PointerSpec& p) {
    std::vector<OffsetTransform> v{{}};
    if (p.length != LengthSpec::Const1) v.push_back({XK::ConstElem, 1, Reg::r9});
    if (p.length == LengthSpec::Var) {
        v.push_back({XK::ConstElem, 2, Reg::r9});
        v.push_back({XK::ConstElem, 3, Reg::r9});
        v.push_back({XK::VarReg, 0, Reg::r8});
        v.push_back({XK::VarReg, 0, Reg::r9});
    }
    if (p.length != LengthSpec::Const1) {
        const unsigned w = access_bytes(p);
        if (p.kind == ElemKind::Struct) {
            v.push_back({XK::ConstByte, 2, Reg::r9});
            v.push_back({XK::ConstByte, 4, Reg::r9});
        } else if (w > 1) {
            v.push_back({XK::ConstByte, int(w / 2), Reg::r9});
        }
    }
    return v;
}

struct Emitter {
    std::vector<std::string> lines;
    int count = 0;

    int ins(const std::string& text) {
        lines.push_back("    " + text);
        return count++;
    }
    void label(const std::string& name) { lines.push_back(name + ":"); }
};

struct AccessPlan {
    std::string base;       // empty for absolute addressing
    int64_t disp = 0;
    bool has_index = false;
    Reg index = Reg::r9;
};

std::string mem_text(unsigned width, const std::string& base,
                     const std::string& index, unsigned scale, int64_t disp) {
    std::string inner = base;
    if (!index.empty()) {
        if (!inner.empty()) inner += '+';
        inner += index + "*" + std::to_string(scale);
    }
    if (disp < 0) {
        inner += '-' + hex_u(static_cast<uint64_t>(-disp));
    } else if (disp > 0 || inner.empty()) {
        if (!inner.empty()) inner += '+';
        inner += hex_u(static_cast<uint64_t>(disp));
    }
    return std::string(width_prefix(width)) + "[" + inner + "]";
}

int emit_access(Emitter& e, const TestCaseConfig& c, const AccessPlan& ap,
                bool is_write) {
    const unsigned w = access_bytes(c.ptr);
    std::string index;
    unsigned scale = 1;
    if (ap.has_index) {
        if (c.ptr.kind == ElemKind::Struct) {
            // Stride 16 exceeds the largest hardware scale; shift by hand.
            e.ins("mov rbx, " + reg_name(ap.index));
            e.ins("shl rbx, 0x4");
            index = "rbx";
        } else {
            index = reg_name(ap.index);
            scale = stride_bytes(c.ptr);
        }
    }
    const std::string m = mem_text(w, ap.base, index, scale, ap.disp);
    if (is_write) return e.ins("mov " + m + ", " + data_reg(c.ptr.origin, w));
    return e.ins("mov " + dest_reg(w) + ", " + m);
}

struct AbsBases {
    uint64_t w = 0;
    uint64_t r = 0;
};

// Buffer base addresses under the canonical probe environment; used to
// compute index values that make the two accesses collide.
AbsBases abs_bases(const TestCaseConfig& c) {
    const uint64_t sz = buffer_bytes(c.ptr);
    switch (c.ptr.origin) {
        case Origin::Stack: {
            const uint64_t fb = c.frame_pointer ? kStackInit - 8 : kStackInit;
            return {fb - sz, c.distinct_pointers ? fb - 2 * sz : fb - sz};
        }
        case Origin::Heap: {
            const uint64_t second = kHeapBase + align16(sz) + 16;
            return {kHeapBase, c.distinct_pointers ? second : kHeapBase};
        }
        case Origin::Foreign:
            return {kForeignA,
                    c.distinct_pointers ? kForeignA + kPtrGap : kForeignA};
        case Origin::Global:
            return {kGlobalW, c.distinct_pointers ? kGlobalR : kGlobalW};
        default:
            throw GenError("unsupported pointer origin");
    }
}

const std::string& xform_kind_name(XK k) {
    static const std::array<std::string, 4> names{"none", "const-elem",
                                                  "const-byte", "var-reg"};
    return names[static_cast<size_t>(k)];
}

ordered_json xform_to_json(const OffsetTransform& x) {
    ordered_json j{{"kind", xform_kind_name(x.kind)}};
    if (x.kind == XK::ConstElem || x.kind == XK::ConstByte) j["k"] = x.k;
    if (x.kind == XK::VarReg) j["reg"] = reg_name(x.reg);
    return j;
}

OffsetTransform xform_from_json(const ordered_json& j) {
    OffsetTransform x;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") {
        x.kind = XK::None;
    } else if (kind == "const-elem" || kind == "const-byte") {
        x.kind = kind == "const-elem" ? XK::ConstElem : XK::ConstByte;
        x.k = j.at("k").get<int>();
    } else if (kind == "var-reg") {
        x.kind = XK::VarReg;
        auto ref = lookup_reg(j.at("reg").get<std::string>());
        if (!ref) throw GenError("unknown index register");
        x.reg = ref->base;
    } else {
        throw GenError("unknown offset transform '" + kind + "'");
    }
    return x;
}

std::string xform_slug(const OffsetTransform& x) {
    switch (x.kind) {
        case XK::None: return "n";
        case XK::ConstElem: return "c" + std::to_string(x.k);
        case XK::ConstByte: return "b" + std::to_string(x.k);
        case XK::VarReg: return "v" + reg_name(x.reg);
    }
    return "?";
}

}  // namespace

const std::string& elem_kind_name(ElemKind k) {
    static const std::array<std::string, 3> names{"int", "float", "struct"};
    return names[static_cast<size_t>(k)];
}

const std::string& length_name(LengthSpec l) {
    static const std::array<std::string, 3> names{"const1", "const2", "var"};
    return names[static_cast<size_t>(l)];
}

const std::string& degree_name(FlowDegree d) {
    static const std::array<std::string, 3> names{"unconditional", "possible",
                                                  "impossible"};
    return names[static_cast<size_t>(d)];
}

FlowDegree degree_from_name(std::string_view name) {
    for (auto d : {FlowDegree::Unconditional, FlowDegree::Possible,
                   FlowDegree::Impossible})
        if (degree_name(d) == name) return d;
    throw GenError("unknown flow degree '" + std::string(name) + "'");
}

std::vector<std::pair<ElemKind, unsigned>> elem_combos() {
    return {{ElemKind::Int, 1},
            {ElemKind::Int, 2},
            {ElemKind::Float, 4},
            {ElemKind::Float, 8},
            {ElemKind::Struct, 16}};
}

unsigned stride_bytes(const PointerSpec& p) {
    return p.kind == ElemKind::Struct ? 16 : p.elem_size;
}

unsigned access_bytes(const PointerSpec& p) {
    // Struct cases touch the leading 32-bit field of an element.
    return p.kind == ElemKind::Struct ? 4 : p.elem_size;
}

unsigned buffer_bytes(const PointerSpec& p) {
    return len_capacity(p.length) * stride_bytes(p);
}

int64_t xform_disp(const OffsetTransform& x, const PointerSpec& p) {
    switch (x.kind) {
        case XK::None:
        case XK::VarReg:
            return 0;
        case XK::ConstElem:
            return int64_t(x.k) * stride_bytes(p);
        case XK::ConstByte:
            return x.k;
    }
    return 0;
}

std::string config_slug(const TestCaseConfig& c) {
    std::string out(1, origin_letter(c.ptr.origin));
    out += '-';
    out += elem_kind_name(c.ptr.kind) + std::to_string(c.ptr.elem_size);
    out += '-';
    switch (c.ptr.length) {
        case LengthSpec::Const1: out += "c1"; break;
        case LengthSpec::Const2: out += "c2"; break;
        case LengthSpec::Var: out += "var"; break;
    }
    out += c.distinct_pointers ? "-dist" : "-same";
    out += "-w" + xform_slug(c.write_xform);
    out += "-r" + xform_slug(c.read_xform);
    out += c.call_between ? "-cb" : "-nc";
    out += c.frame_pointer ? "-fp" : "-of";
    return out;
}

std::string config_to_json(const TestCaseConfig& c) {
    ordered_json j{
        {"origin", origin_name(c.ptr.origin)},
        {"kind", elem_kind_name(c.ptr.kind)},
        {"elem_size", c.ptr.elem_size},
        {"length", length_name(c.ptr.length)},
        {"expansion", c.distinct_pointers ? "distinct-pointers" : "same-pointer"},
        {"write_xform", xform_to_json(c.write_xform)},
        {"read_xform", xform_to_json(c.read_xform)},
        {"callee", c.call_between ? "call-between" : "no-call"},
        {"frame", c.frame_pointer ? "frame-pointer" : "omit-frame-pointer"},
    };
    return j.dump();
}

TestCaseConfig config_from_json(std::string_view text) {
    ordered_json j = ordered_json::parse(text);
    TestCaseConfig c;
    c.ptr.origin = origin_from_name(j.at("origin").get<std::string>());
    const std::string kind = j.at("kind").get<std::string>();
    bool found = false;
    for (auto k : {ElemKind::Int, ElemKind::Float, ElemKind::Struct})
        if (elem_kind_name(k) == kind) {
            c.ptr.kind = k;
            found = true;
        }
    if (!found) throw GenError("unknown element kind '" + kind + "'");
    c.ptr.elem_size = j.at("elem_size").get<unsigned>();
    const std::string len = j.at("length").get<std::string>();
    found = false;
    for (auto l : {LengthSpec::Const1, LengthSpec::Const2, LengthSpec::Var})
        if (length_name(l) == len) {
            c.ptr.length = l;
            found = true;
        }
    if (!found) throw GenError("unknown length '" + len + "'");
    c.distinct_pointers =
        j.at("expansion").get<std::string>() == "distinct-pointers";
    c.write_xform = xform_from_json(j.at("write_xform"));
    c.read_xform = xform_from_json(j.at("read_xform"));
    c.call_between = j.at("callee").get<std::string>() == "call-between";
    c.frame_pointer = j.at("frame").get<std::string>() == "frame-pointer";
    validate_config(c);
    return c;
}

std::vector<TestCaseConfig> enumerate_configs(const GenFilter& flt) {
    std::vector<TestCaseConfig> out;
    for (Origin o :
         {Origin::Stack, Origin::Heap, Origin::Foreign, Origin::Global}) {
        if (flt.origin && *flt.origin != o) continue;
        for (auto [kind, size] : elem_combos()) {
            if (flt.kind && *flt.kind != kind) continue;
            for (LengthSpec len :
                 {LengthSpec::Const1, LengthSpec::Const2, LengthSpec::Var}) {
                if (flt.length && *flt.length != len) continue;
                const PointerSpec p{o, kind, size, len};
                for (bool dist : {false, true}) {
                    if (flt.distinct_pointers && *flt.distinct_pointers != dist)
                        continue;
                    for (const auto& wx : write_xforms(p)) {
                        for (const auto& rx : read_xforms(p)) {
                            const bool plain = wx.kind == XK::None &&
                                               rx.kind == XK::None;
                            if (flt.xforms_none && *flt.xforms_none != plain)
                                continue;
                            for (bool cb : {false, true}) {
                                if (flt.call_between && *flt.call_between != cb)
                                    continue;
                                for (bool fp : {false, true}) {
                                    if (flt.frame_pointer &&
                                        *flt.frame_pointer != fp)
                                        continue;
                                    out.push_back(
                                        TestCaseConfig{p, dist, wx, rx, cb, fp});
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Label label_ground_truth(const TestCaseConfig& c) {
    validate_config(c);
    Label out;
    out.no_call_degree = concrete_degree(c);
    out.degree = c.call_between ? FlowDegree::Possible : out.no_call_degree;
    out.fully_specified = out.degree != FlowDegree::Possible;
    return out;
}

SynthesizedCase synthesize_test_case(const TestCaseConfig& c) {
    validate_config(c);
    const unsigned sz = buffer_bytes(c.ptr);
    const uint64_t total = c.distinct_pointers ? 2ull * sz : sz;
    const uint64_t frame = align16(total);
    // Stack buffers live in the red zone unless a call would clobber it.
    const bool reserve = c.ptr.origin == Origin::Stack && c.call_between;

    Emitter e;
    if (c.frame_pointer) {
        e.ins("push rbp");
        e.ins("mov rbp, rsp");
    }
    if (reserve) e.ins("sub rsp, " + hex_u(frame));

    AccessPlan wp, rp;
    switch (c.ptr.origin) {
        case Origin::Stack: {
            const std::string base = c.frame_pointer ? "rbp" : "rsp";
            const int64_t a =
                (!c.frame_pointer && reserve) ? int64_t(frame - sz) : -int64_t(sz);
            const int64_t b = a - int64_t(sz);
            wp.base = base;
            wp.disp = a;
            rp.base = base;
            rp.disp = c.distinct_pointers ? b : a;
            break;
        }
        case Origin::Heap:
            e.ins("mov edi, " + hex_u(sz));
            e.ins("call malloc");
            if (c.distinct_pointers) {
                e.ins("mov r10, rax");
                e.ins("mov edi, " + hex_u(sz));
                e.ins("call malloc");
                wp.base = "r10";
            } else {
                wp.base = "rax";
            }
            rp.base = "rax";
            break;
        case Origin::Foreign:
            wp.base = "rdi";
            rp.base = c.distinct_pointers ? "rsi" : "rdi";
            break;
        case Origin::Global:
            wp.disp = int64_t(kGlobalW);
            rp.disp = int64_t(c.distinct_pointers ? kGlobalR : kGlobalW);
            break;
        default:
            throw GenError("unsupported pointer origin");
    }
    wp.disp += xform_disp(c.write_xform, c.ptr);
    rp.disp += xform_disp(c.read_xform, c.ptr);
    if (c.write_xform.kind == XK::VarReg) {
        wp.has_index = true;
        wp.index = c.write_xform.reg;
    }
    if (c.read_xform.kind == XK::VarReg) {
        rp.has_index = true;
        rp.index = c.read_xform.reg;
    }

    if (c.ptr.length == LengthSpec::Var) {
        e.ins("test rcx, rcx");
        e.ins("jz done");
    }

    const int wi = emit_access(e, c, wp, true);
    if (c.call_between) e.ins("call f_callee");
    const int ri = emit_access(e, c, rp, false);

    if (c.ptr.length == LengthSpec::Var) e.label("done");
    if (reserve) e.ins("add rsp, " + hex_u(frame));
    if (c.frame_pointer) e.ins("pop rbp");
    e.ins("ret");

    std::string text;
    if (c.ptr.origin == Origin::Global) {
        text += ".global buf_w " + hex_u(kGlobalW) + " " + hex_u(sz) + "\n";
        if (c.distinct_pointers)
            text += ".global buf_r " + hex_u(kGlobalR) + " " + hex_u(sz) + "\n";
    }
    text += "f_target:\n";
    for (const auto& line : e.lines) text += line + "\n";
    if (c.call_between) text += "f_callee:\n    ret\n";

    SynthesizedCase out;
    out.config = c;
    out.prog = parse_program(text);
    const Function& f = out.prog.functions.front();
    const Label lab = label_ground_truth(c);
    out.truth.degree = lab.degree;
    out.truth.fully_specified = lab.fully_specified;
    out.truth.no_call_degree = lab.no_call_degree;
    out.truth.write_origin = c.ptr.origin;
    out.truth.read_origin = c.ptr.origin;
    out.truth.write_addr = f.insns.at(size_t(wi)).addr;
    out.truth.read_addr = f.insns.at(size_t(ri)).addr;
    out.truth.channel = "mem";
    return out;
}

uint64_t fingerprint(const Function& f) {
    Program tmp;
    tmp.functions.push_back(f);
    const std::string text = render_program(tmp, false);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string fingerprint_hex(uint64_t digest) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << digest;
    return os.str();
}

std::string truth_to_json(const GroundTruthRecord& r) {
    ordered_json j{
        {"degree", degree_name(r.degree)},
        {"specification", r.fully_specified ? "fully-specified" : "underspecified"},
        {"alias_class",
         {origin_name(r.write_origin), origin_name(r.read_origin)}},
        {"write_addr", r.write_addr},
        {"read_addr", r.read_addr},
        {"channel", r.channel},
        {"no_call_degree", degree_name(r.no_call_degree)},
    };
    return j.dump(2) + "\n";
}

GroundTruthRecord truth_from_json(std::string_view text) {
    ordered_json j = ordered_json::parse(text);
    GroundTruthRecord r;
    r.degree = degree_from_name(j.at("degree").get<std::string>());
    const std::string spec = j.at("specification").get<std::string>();
    if (spec != "fully-specified" && spec != "underspecified")
        throw GenError("unknown specification '" + spec + "'");
    r.fully_specified = spec == "fully-specified";
    const auto& ac = j.at("alias_class");
    if (!ac.is_array() || ac.size() != 2)
        throw GenError("alias_class must list the write and read origins");
    r.write_origin = origin_from_name(ac[0].get<std::string>());
    r.read_origin = origin_from_name(ac[1].get<std::string>());
    r.write_addr = j.at("write_addr").get<uint64_t>();
    r.read_addr = j.at("read_addr").get<uint64_t>();
    r.channel = j.at("channel").get<std::string>();
    r.no_call_degree = degree_from_name(j.at("no_call_degree").get<std::string>());
    return r;
}

std::vector<Environment> environments_for(const TestCaseConfig& c) {
    validate_config(c);
    const unsigned s = stride_bytes(c.ptr);
    const unsigned w = access_bytes(c.ptr);

    Environment base;
    base.regs[data_reg(c.ptr.origin, 8)] = kDataSeed;
    if (c.frame_pointer) base.regs["rbp"] = kStackInit;  // saved, never derefed
    if (c.ptr.origin == Origin::Foreign) base.regs["rdi"] = kForeignA;

    const bool wvo = c.write_xform.kind == XK::VarReg;
    const bool rvo = c.read_xform.kind == XK::VarReg;

    std::vector<uint64_t> lens{0};
    if (c.ptr.length == LengthSpec::Var) lens = {0, 4};
    std::vector<uint64_t> rsis{0};
    const bool probe_rsi =
        c.ptr.origin == Origin::Foreign && c.distinct_pointers;
    if (probe_rsi) rsis = {kForeignA + kPtrGap, kForeignA, kForeignA + w};
    const std::vector<int64_t> full{-8, -1, 0, 1, 8};
    const std::vector<int64_t> narrow{0, 1};
    std::vector<int64_t> wgrid{0}, rgrid{0};
    if (wvo) wgrid = rvo ? narrow : full;
    if (rvo) rgrid = full;

    std::vector<Environment> out;
    for (uint64_t rsi : rsis) {
        for (uint64_t len : lens) {
            for (int64_t wg : wgrid) {
                for (int64_t rg : rgrid) {
                    Environment env = base;
                    if (probe_rsi) env.regs["rsi"] = rsi;
                    if (c.ptr.length == LengthSpec::Var) env.regs["rcx"] = len;
                    if (wvo)
                        env.regs[reg_name(c.write_xform.reg)] =
                            static_cast<uint64_t>(wg);
                    if (rvo)
                        env.regs[reg_name(c.read_xform.reg)] =
                            static_cast<uint64_t>(rg);
                    out.push_back(std::move(env));
                }
            }
        }
    }

    // Collision witness: index values that land the two accesses on the same
    // address, when the static gap is a whole number of strides.
    if (wvo || rvo) {
        const AbsBases ab = abs_bases(c);
        const int64_t gap = int64_t(ab.w) + xform_disp(c.write_xform, c.ptr) -
                            int64_t(ab.r) - xform_disp(c.read_xform, c.ptr);
        if (gap % int64_t(s) == 0) {
            Environment env = base;
            if (probe_rsi) env.regs["rsi"] = rsis[0];
            if (c.ptr.length == LengthSpec::Var) env.regs["rcx"] = 4;
            if (wvo) env.regs[reg_name(c.write_xform.reg)] = 0;
            const Reg target = rvo ? c.read_xform.reg : c.write_xform.reg;
            const int64_t value = rvo ? gap / int64_t(s) : -gap / int64_t(s);
            env.regs[reg_name(target)] = static_cast<uint64_t>(value);
            out.push_back(std::move(env));
        }
    }
    return out;
}

}  // namespace bfa
