#include "bfa/evalharness.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <tuple>

namespace bfa {

namespace {

using ordered_json = nlohmann::ordered_json;

int truth_rank(const std::string& truth) {
    if (truth == "unconditional") return 0;
    if (truth == "under-specified") return 1;
    return 2;
}

std::string truth_display(FlowDegree d, bool fully_specified) {
    if (!fully_specified) return "under-specified";
    return degree_name(d);
}

std::string alias_display(Origin w, Origin r) {
    return std::string("(") + origin_letter(w) + ", " + origin_letter(r) + ")";
}

// value = num/den with `decimals` fractional digits, ties to even.
std::string fixed_round_half_even(uint64_t num, uint64_t den, int decimals) {
    uint64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const uint64_t t = num * scale;
    uint64_t q = t / den;
    const uint64_t r = t % den;
    if (2 * r > den || (2 * r == den && (q & 1))) ++q;
    std::string digits = std::to_string(q);
    if (digits.size() <= size_t(decimals))
        digits.insert(0, size_t(decimals) + 1 - digits.size(), '0');
    digits.insert(digits.size() - size_t(decimals), ".");
    return digits;
}

size_t edge_of(const TableRow& row, const std::string& cfg) {
    auto it = row.edge_count.find(cfg);
    return it == row.edge_count.end() ? 0 : it->second;
}

ordered_json metrics_to_json(const MetricsReport& m) {
    ordered_json j{{"tp_lower", m.tp_lower},
                   {"fp_upper", m.fp_upper},
                   {"fn_lower", m.fn_lower}};
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = *v;
        else
            j[key] = nullptr;
    };
    put("precision_lower", m.precision_lower);
    put("recall_est", m.recall_est);
    put("f1_est", m.f1_est);
    return j;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

Verdict compare_edge(const DataFlowGraph& static_dfg,
                     const GroundTruthRecord& truth) {
    if (!static_dfg.nodes.count(truth.write_addr) ||
        !static_dfg.nodes.count(truth.read_addr))
        throw EvalError("truth addresses lie outside the analyzed function");
    return static_dfg.has_edge(truth.write_addr, truth.read_addr, truth.channel)
               ? Verdict::Edge
               : Verdict::NoEdge;
}

bool equal_offset_flag(const TestCaseConfig& c) {
    if (c.write_xform.kind == OffsetTransform::Kind::VarReg ||
        c.read_xform.kind == OffsetTransform::Kind::VarReg)
        return false;
    return xform_disp(c.write_xform, c.ptr) == xform_disp(c.read_xform, c.ptr);
}

EvalRecord make_record(const TestCaseConfig& cfg, const GroundTruthRecord& truth,
                       const std::map<std::string, Verdict>& verdicts) {
    EvalRecord r;
    r.id = config_slug(cfg);
    r.write_origin = truth.write_origin;
    r.read_origin = truth.read_origin;
    r.degree = truth.degree;
    r.fully_specified = truth.fully_specified;
    r.call_between = cfg.call_between;
    r.equal_offset = equal_offset_flag(cfg);
    r.verdicts = verdicts;
    return r;
}

ReportTable tabulate_microbench(const std::vector<EvalRecord>& records,
                                GroupKey key) {
    ReportTable t;
    t.variant_key = key == GroupKey::None
                        ? ""
                        : key == GroupKey::Callee ? "Callee" : "Equal Offset";

    std::set<std::string> cfgs;
    for (const auto& r : records)
        for (const auto& [name, v] : r.verdicts) cfgs.insert(name);
    t.configs.assign(cfgs.begin(), cfgs.end());

    // Group rows ordered by alias class, then ground truth
    // (unconditional, under-specified, impossible), then flag (Yes first).
    std::map<std::tuple<std::string, int, int>, TableRow> groups;
    for (const auto& r : records) {
        TableRow proto;
        proto.alias_class = alias_display(r.write_origin, r.read_origin);
        proto.ground_truth = truth_display(r.degree, r.fully_specified);
        int flag_rank = 0;
        if (key == GroupKey::Callee) {
            proto.variant = r.call_between ? "Yes" : "No";
            flag_rank = r.call_between ? 0 : 1;
        } else if (key == GroupKey::EqualOffset) {
            proto.variant = r.equal_offset ? "Yes" : "No";
            flag_rank = r.equal_offset ? 0 : 1;
        }
        auto [it, inserted] = groups.try_emplace(
            {proto.alias_class, truth_rank(proto.ground_truth), flag_rank},
            std::move(proto));
        TableRow& row = it->second;
        ++row.total;
        for (const auto& [name, v] : r.verdicts)
            if (v == Verdict::Edge) ++row.edge_count[name];
    }
    for (auto& [k, row] : groups) {
        for (const auto& cfg : t.configs) row.edge_count.try_emplace(cfg, 0);
        t.rows.push_back(std::move(row));
    }
    return t;
}

MetricsReport make_metrics(uint64_t tp, uint64_t fp, uint64_t fn) {
    MetricsReport m;
    m.tp_lower = tp;
    m.fp_upper = fp;
    m.fn_lower = fn;
    if (tp + fp > 0) m.precision_lower = double(tp) / double(tp + fp);
    if (tp + fn > 0) m.recall_est = double(tp) / double(tp + fn);
    if (2 * tp + fp + fn > 0) m.f1_est = 2.0 * double(tp) / double(2 * tp + fp + fn);
    return m;
}

MetricsReport score_against_dynamic(const std::set<Edge>& static_edges,
                                    const std::set<Edge>& dynamic_edges) {
    uint64_t tp = 0, fp = 0, fn = 0;
    for (const Edge& e : static_edges)
        dynamic_edges.count(e) ? ++tp : ++fp;
    for (const Edge& e : dynamic_edges)
        if (!static_edges.count(e)) ++fn;
    return make_metrics(tp, fp, fn);
}

std::set<Edge> edge_set(const DataFlowGraph& g) {
    std::set<Edge> out;
    for (const auto& [e, scope] : g.edges) out.insert(e);
    return out;
}

std::string format_pct(uint64_t part, uint64_t total) {
    if (total == 0) return "-";
    return fixed_round_half_even(part * 100, total, 2) + "%";
}

std::string format_ratio(uint64_t num, uint64_t den) {
    if (den == 0) return "-";
    return fixed_round_half_even(num, den, 4);
}

ReportFormat report_format_from_name(std::string_view name) {
    if (name == "csv") return ReportFormat::Csv;
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    if (name == "json") return ReportFormat::Json;
    throw EvalError("unknown report format '" + std::string(name) +
                    "' (expected csv, markdown, or json)");
}

const std::string& report_format_name(ReportFormat f) {
    static const std::string names[3] = {"csv", "markdown", "json"};
    return names[static_cast<size_t>(f)];
}

namespace {

std::string render_csv(const ReportBundle& b) {
    std::string out =
        "table,alias_class,ground_truth,variant_key,variant,config,"
        "edge,edge_pct,noedge,noedge_pct,total\n";
    for (const auto& t : b.tables) {
        for (const auto& row : t.rows) {
            for (const auto& cfg : t.configs) {
                const size_t edge = edge_of(row, cfg);
                const size_t noedge = row.total - edge;
                out += csv_escape(t.title) + ',' + csv_escape(row.alias_class) +
                       ',' + row.ground_truth + ',' + t.variant_key + ',' +
                       row.variant + ',' + cfg + ',' + std::to_string(edge) +
                       ',' + fixed_round_half_even(edge * 100, row.total, 2) +
                       ',' + std::to_string(noedge) + ',' +
                       fixed_round_half_even(noedge * 100, row.total, 2) + ',' +
                       std::to_string(row.total) + '\n';
            }
        }
    }
    if (!b.metrics.empty()) {
        out +=
            "metrics,name,tp_lower,fp_upper,fn_lower,precision_lower,"
            "recall_est,f1_est\n";
        for (const auto& [name, m] : b.metrics) {
            out += "metrics," + csv_escape(name) + ',' +
                   std::to_string(m.tp_lower) + ',' + std::to_string(m.fp_upper) +
                   ',' + std::to_string(m.fn_lower) + ',' +
                   format_ratio(m.tp_lower, m.tp_lower + m.fp_upper) + ',' +
                   format_ratio(m.tp_lower, m.tp_lower + m.fn_lower) + ',' +
                   format_ratio(2 * m.tp_lower,
                                2 * m.tp_lower + m.fp_upper + m.fn_lower) +
                   '\n';
        }
    }
    return out;
}

std::string render_markdown(const ReportBundle& b) {
    std::string out;
    for (const auto& t : b.tables) {
        if (!out.empty()) out += '\n';
        if (!t.title.empty()) out += "## " + t.title + "\n\n";
        const bool multi = t.configs.size() > 1;
        std::string header = "| Alias Class | Ground Truth |";
        std::string rule = "|---|---|";
        if (!t.variant_key.empty()) {
            header += ' ' + t.variant_key + " |";
            rule += "---|";
        }
        if (multi) {
            for (const auto& cfg : t.configs) {
                header += ' ' + cfg + " Edge | " + cfg + " Edge % |";
                rule += "---|---|";
            }
            header += " Changed |";
            rule += "---|";
        } else {
            header += " Edge | Edge % | No Edge | No Edge % | Total |";
            rule += "---|---|---|---|---|";
        }
        out += header + '\n' + rule + '\n';
        for (const auto& row : t.rows) {
            std::string line = "| " + row.alias_class + " | " +
                               row.ground_truth + " |";
            if (!t.variant_key.empty()) line += ' ' + row.variant + " |";
            if (multi) {
                const size_t first = edge_of(row, t.configs.front());
                bool changed = false;
                for (const auto& cfg : t.configs) {
                    const size_t edge = edge_of(row, cfg);
                    const bool diff = edge != first;
                    changed = changed || diff;
                    const std::string cnt = std::to_string(edge);
                    const std::string pct = format_pct(edge, row.total);
                    if (diff)
                        line += " **" + cnt + "** | **" + pct + "** |";
                    else
                        line += ' ' + cnt + " | " + pct + " |";
                }
                line += changed ? " yes |" : "  |";
            } else {
                const std::string cfg =
                    t.configs.empty() ? std::string() : t.configs.front();
                const size_t edge = edge_of(row, cfg);
                const size_t noedge = row.total - edge;
                line += ' ' + std::to_string(edge) + " | " +
                        format_pct(edge, row.total) + " | " +
                        std::to_string(noedge) + " | " +
                        format_pct(noedge, row.total) + " | " +
                        std::to_string(row.total) + " |";
            }
            out += line + '\n';
        }
    }
    for (const auto& [name, m] : b.metrics) {
        if (!out.empty()) out += '\n';
        out += "## " + name + "\n\n";
        out += "| Metric | Value |\n|---|---|\n";
        out += "| True positives (lower bound) | " + std::to_string(m.tp_lower) +
               " |\n";
        out += "| False positives (upper bound) | " + std::to_string(m.fp_upper) +
               " |\n";
        out += "| False negatives (lower bound) | " + std::to_string(m.fn_lower) +
               " |\n";
        out += "| Precision (lower bound) | " +
               format_ratio(m.tp_lower, m.tp_lower + m.fp_upper) + " |\n";
        out += "| Recall (estimation) | " +
               format_ratio(m.tp_lower, m.tp_lower + m.fn_lower) + " |\n";
        out += "| F1 score (estimation) | " +
               format_ratio(2 * m.tp_lower,
                            2 * m.tp_lower + m.fp_upper + m.fn_lower) +
               " |\n";
    }
    return out;
}

std::string render_json(const ReportBundle& b) {
    ordered_json j;
    j["tables"] = ordered_json::array();
    for (const auto& t : b.tables) {
        ordered_json jt{{"title", t.title},
                        {"variant_key", t.variant_key},
                        {"configs", t.configs}};
        jt["rows"] = ordered_json::array();
        for (const auto& row : t.rows) {
            ordered_json jr{{"alias_class", row.alias_class},
                            {"ground_truth", row.ground_truth},
                            {"variant", row.variant},
                            {"total", row.total}};
            ordered_json edges = ordered_json::object();
            for (const auto& cfg : t.configs) edges[cfg] = edge_of(row, cfg);
            jr["edge"] = std::move(edges);
            jt["rows"].push_back(std::move(jr));
        }
        j["tables"].push_back(std::move(jt));
    }
    j["metrics"] = ordered_json::array();
    for (const auto& [name, m] : b.metrics) {
        ordered_json jm = metrics_to_json(m);
        jm["name"] = name;
        j["metrics"].push_back(std::move(jm));
    }
    return j.dump(2) + "\n";
}

}  // namespace

std::string render_report(const ReportBundle& b, ReportFormat f) {
    switch (f) {
        case ReportFormat::Csv: return render_csv(b);
        case ReportFormat::Markdown: return render_markdown(b);
        case ReportFormat::Json: return render_json(b);
    }
    throw EvalError("unknown report format");
}

ReportBundle report_from_json(std::string_view text) {
    ordered_json j = ordered_json::parse(text);
    ReportBundle b;
    for (const auto& jt : j.at("tables")) {
        ReportTable t;
        t.title = jt.at("title").get<std::string>();
        t.variant_key = jt.at("variant_key").get<std::string>();
        t.configs = jt.at("configs").get<std::vector<std::string>>();
        for (const auto& jr : jt.at("rows")) {
            TableRow row;
            row.alias_class = jr.at("alias_class").get<std::string>();
            row.ground_truth = jr.at("ground_truth").get<std::string>();
            row.variant = jr.at("variant").get<std::string>();
            row.total = jr.at("total").get<size_t>();
            for (const auto& [cfg, count] : jr.at("edge").items())
                row.edge_count[cfg] = count.get<size_t>();
            t.rows.push_back(std::move(row));
        }
        b.tables.push_back(std::move(t));
    }
    for (const auto& jm : j.at("metrics")) {
        MetricsReport m = make_metrics(jm.at("tp_lower").get<uint64_t>(),
                                       jm.at("fp_upper").get<uint64_t>(),
                                       jm.at("fn_lower").get<uint64_t>());
        b.metrics.emplace_back(jm.at("name").get<std::string>(), m);
    }
    return b;
}

std::string emit_report(const ReportBundle& b, ReportFormat f,
                        const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw EvalError("cannot create '" + dir + "': " + ec.message());
    const char* ext = f == ReportFormat::Csv
                          ? "csv"
                          : f == ReportFormat::Markdown ? "md" : "json";
    const std::string path = (fs::path(dir) / (std::string("report.") + ext)).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw EvalError("cannot open '" + path + "' for writing");
    out << render_report(b, f);
    if (!out) throw EvalError("failed writing '" + path + "'");
    return path;
}

}  // namespace bfa
