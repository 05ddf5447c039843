#pragma once

// Microbenchmark generator: enumerates pointer/offset/call/frame
// configurations, synthesizes one tiny assembly function per configuration
// with exactly one marked write and one marked read, labels the pair with
// its ground-truth flow degree, and proposes the environments under which
// the interpreter should probe it.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfa/dfg.hpp"
#include "bfa/interp.hpp"
#include "bfa/isa.hpp"

namespace bfa {

struct GenError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ElemKind : uint8_t { Int, Float, Struct };
enum class LengthSpec : uint8_t { Const1, Const2, Var };
enum class FlowDegree : uint8_t { Unconditional, Possible, Impossible };

const std::string& elem_kind_name(ElemKind k);  // "int", "float", "struct"
const std::string& length_name(LengthSpec l);   // "const1", "const2", "var"
const std::string& degree_name(FlowDegree d);   // "unconditional", ...
FlowDegree degree_from_name(std::string_view name);

struct PointerSpec {
    Origin origin = Origin::Stack;
    ElemKind kind = ElemKind::Int;
    unsigned elem_size = 1;  // bytes; the struct kind is fixed at stride 16
    LengthSpec length = LengthSpec::Const1;

    bool operator==(const PointerSpec&) const = default;
};

// The five (kind, size) combinations the corpus enumerates.
std::vector<std::pair<ElemKind, unsigned>> elem_combos();

unsigned stride_bytes(const PointerSpec& p);  // element stride
unsigned access_bytes(const PointerSpec& p);  // marked access width
unsigned buffer_bytes(const PointerSpec& p);  // capacity (Var sized for 4)

struct OffsetTransform {
    enum class Kind : uint8_t { None, ConstElem, ConstByte, VarReg };
    Kind kind = Kind::None;
    int k = 0;            // element index (ConstElem) or byte delta (ConstByte)
    Reg reg = Reg::r9;    // VarReg index register

    bool operator==(const OffsetTransform&) const = default;
};

// Static byte displacement the transform contributes (VarReg contributes 0).
int64_t xform_disp(const OffsetTransform& x, const PointerSpec& p);

struct TestCaseConfig {
    PointerSpec ptr;
    bool distinct_pointers = false;
    OffsetTransform write_xform;
    OffsetTransform read_xform;
    bool call_between = false;
    bool frame_pointer = false;

    bool operator==(const TestCaseConfig&) const = default;
};

// Filename-safe deterministic identifier, e.g. "S-int1-c1-same-wn-rn-nc-of".
std::string config_slug(const TestCaseConfig& c);

std::string config_to_json(const TestCaseConfig& c);
TestCaseConfig config_from_json(std::string_view text);

struct GenFilter {
    std::optional<Origin> origin;
    std::optional<ElemKind> kind;
    std::optional<LengthSpec> length;
    std::optional<bool> distinct_pointers;
    std::optional<bool> xforms_none;  // true: both None; false: at least one not
    std::optional<bool> call_between;
    std::optional<bool> frame_pointer;
};

std::vector<TestCaseConfig> enumerate_configs(const GenFilter& filter = {});

struct Label {
    FlowDegree degree = FlowDegree::Possible;
    bool fully_specified = false;   // degree != Possible
    // What the degree would be without the interposed call (equals `degree`
    // for no-call configs); call-interrupted cases are labeled Possible but
    // the bundled callee is a no-op, so the concrete outcome is this.
    FlowDegree no_call_degree = FlowDegree::Possible;
};

Label label_ground_truth(const TestCaseConfig& c);

struct GroundTruthRecord {
    FlowDegree degree = FlowDegree::Possible;
    bool fully_specified = false;
    Origin write_origin = Origin::Stack;
    Origin read_origin = Origin::Stack;
    uint64_t write_addr = 0;
    uint64_t read_addr = 0;
    std::string channel = "mem";
    FlowDegree no_call_degree = FlowDegree::Possible;
};

std::string truth_to_json(const GroundTruthRecord& r);
GroundTruthRecord truth_from_json(std::string_view text);

struct SynthesizedCase {
    TestCaseConfig config;
    Program prog;  // f_target (+ f_callee when call-interrupted) + globals
    GroundTruthRecord truth;
};

SynthesizedCase synthesize_test_case(const TestCaseConfig& c);

// FNV-1a over the canonical rendered body, address-free: equal bodies at
// different base addresses hash equal.
uint64_t fingerprint(const Function& f);
std::string fingerprint_hex(uint64_t digest);

// Deterministic probe environments: undefined-register grids for variable
// offsets, a length on/off pair, distinct-argument aliasing probes, plus a
// computed witness that makes the two accesses collide when one exists.
std::vector<Environment> environments_for(const TestCaseConfig& c);

}  // namespace bfa
