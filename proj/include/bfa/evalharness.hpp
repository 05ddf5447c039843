#pragma once

// Evaluation harness: per-case edge verdicts against ground truth, grouped
// count tables, precision/recall bounds against dynamic edge sets, and
// deterministic report serialization (csv / markdown / json).

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfa/dfg.hpp"
#include "bfa/genbench.hpp"

namespace bfa {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Verdict : uint8_t { Edge, NoEdge };

// Edge iff the truth record's (write -> read, channel) pair is reported,
// whatever its scope. Throws when either address is not an analyzed node.
Verdict compare_edge(const DataFlowGraph& static_dfg,
                     const GroundTruthRecord& truth);

struct EvalRecord {
    std::string id;
    Origin write_origin = Origin::Stack;
    Origin read_origin = Origin::Stack;
    FlowDegree degree = FlowDegree::Possible;
    bool fully_specified = false;
    bool call_between = false;
    bool equal_offset = false;
    std::map<std::string, Verdict> verdicts;  // one per analysis config
};

// Both offsets fixed and equal (the slice Table-style reports split on).
bool equal_offset_flag(const TestCaseConfig& c);

EvalRecord make_record(const TestCaseConfig& cfg, const GroundTruthRecord& truth,
                       const std::map<std::string, Verdict>& verdicts);

enum class GroupKey { None, Callee, EqualOffset };

struct TableRow {
    std::string alias_class;   // "(S, S)"
    std::string ground_truth;  // "unconditional" / "under-specified" / ...
    std::string variant;       // "", "Yes", "No"
    std::map<std::string, size_t> edge_count;  // per config; NoEdge = total-edge
    size_t total = 0;

    bool operator==(const TableRow&) const = default;
};

struct ReportTable {
    std::string title;
    std::string variant_key;           // "", "Callee", "Equal Offset"
    std::vector<std::string> configs;  // column order (sorted)
    std::vector<TableRow> rows;

    bool operator==(const ReportTable&) const = default;
};

// Counts per (alias class, ground truth[, variant flag]) group, rows in a
// fixed display order. Empty input produces an empty (header-only) table.
ReportTable tabulate_microbench(const std::vector<EvalRecord>& records,
                                GroupKey key);

struct MetricsReport {
    uint64_t tp_lower = 0;
    uint64_t fp_upper = 0;
    uint64_t fn_lower = 0;
    // Unset when the denominator is zero.
    std::optional<double> precision_lower;
    std::optional<double> recall_est;
    std::optional<double> f1_est;
};

MetricsReport make_metrics(uint64_t tp, uint64_t fp, uint64_t fn);

// tp = |D ∩ S|, fp = |S \ D|, fn = |D \ S|; identity is (src, dst, channel).
MetricsReport score_against_dynamic(const std::set<Edge>& static_edges,
                                    const std::set<Edge>& dynamic_edges);

std::set<Edge> edge_set(const DataFlowGraph& g);

// Fixed-point rendering with round-half-even, e.g. format_pct(717, 3552)
// == "20.19%"; format_ratio(1014, 8101) == "0.1252". Zero denominators
// render as "-".
std::string format_pct(uint64_t part, uint64_t total);
std::string format_ratio(uint64_t num, uint64_t den);

struct ReportBundle {
    std::vector<ReportTable> tables;
    std::vector<std::pair<std::string, MetricsReport>> metrics;
};

enum class ReportFormat { Csv, Markdown, Json };

ReportFormat report_format_from_name(std::string_view name);
const std::string& report_format_name(ReportFormat f);

std::string render_report(const ReportBundle& b, ReportFormat f);
ReportBundle report_from_json(std::string_view text);

// Writes report.<ext> under dir (created if missing); returns the path.
std::string emit_report(const ReportBundle& b, ReportFormat f,
                        const std::string& dir);

}  // namespace bfa
