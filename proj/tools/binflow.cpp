// binflow: command-line front end for the benchmark generator, the
// interpreter, the trace-derived and static data-flow analyses, and the
// evaluation reports.
//
// Corpus layout (produced by `generate`, consumed by everything else):
//   OUTDIR/manifest.jsonl          one {"id", "fingerprint", "config"} per case
//   OUTDIR/cases/<id>/test.s       the program
//   OUTDIR/cases/<id>/truth.json   labeled write/read pair
//   OUTDIR/cases/<id>/dynamic.json       added by `run-dynamic`
//   OUTDIR/cases/<id>/static-<tag>.json  added by `analyze-static`
//   OUTDIR/eval.json               added by `evaluate`
//   OUTDIR/reports/report.<ext>    added by `report`

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bfa/dynflow.hpp"
#include "bfa/evalharness.hpp"
#include "bfa/fixtures.hpp"
#include "bfa/genbench.hpp"
#include "bfa/interp.hpp"
#include "bfa/parse.hpp"
#include "bfa/render.hpp"
#include "bfa/staticflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bfa;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CliError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError("cannot write " + p.string());
    out << text;
    if (!out.flush()) throw CliError("write failed: " + p.string());
}

// Runs fn(0..n) on a small pool; results land in index order so later
// aggregation is a deterministic sequential fold.
void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    size_t workers = std::min<size_t>(n, std::thread::hardware_concurrency());
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex err_mu;
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (size_t i = next++; i < n; i = next++) {
                if (failed) return;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard lock(err_mu);
                    if (!failed.exchange(true)) first_error = e.what();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed) throw CliError(first_error);
}

// ---- filter / value parsing ------------------------------------------------

Origin parse_origin(const std::string& v) {
    for (Origin o : {Origin::Stack, Origin::Heap, Origin::Foreign, Origin::Global})
        if (v == origin_name(o)) return o;
    throw CliError("bad origin '" + v + "' (stack|heap|foreign|global)");
}

ElemKind parse_kind(const std::string& v) {
    for (ElemKind k : {ElemKind::Int, ElemKind::Float, ElemKind::Struct})
        if (v == elem_kind_name(k)) return k;
    throw CliError("bad kind '" + v + "' (int|float|struct)");
}

LengthSpec parse_length(const std::string& v) {
    for (LengthSpec l : {LengthSpec::Const1, LengthSpec::Const2, LengthSpec::Var})
        if (v == length_name(l)) return l;
    throw CliError("bad length '" + v + "' (const1|const2|var)");
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw CliError("bad boolean '" + v + "' (yes|no)");
}

GenFilter parse_filters(const std::vector<std::string>& kvs) {
    GenFilter f;
    for (const std::string& kv : kvs) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw CliError("filter must be key=value, got '" + kv + "'");
        std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "origin") f.origin = parse_origin(v);
        else if (k == "kind") f.kind = parse_kind(v);
        else if (k == "length") f.length = parse_length(v);
        else if (k == "pointers") {
            if (v == "distinct") f.distinct_pointers = true;
            else if (v == "same") f.distinct_pointers = false;
            else throw CliError("bad pointers '" + v + "' (same|distinct)");
        } else if (k == "offsets") {
            if (v == "none") f.xforms_none = true;
            else if (v == "some") f.xforms_none = false;
            else throw CliError("bad offsets '" + v + "' (none|some)");
        } else if (k == "call") f.call_between = parse_bool(v);
        else if (k == "frame") f.frame_pointer = parse_bool(v);
        else
            throw CliError("unknown filter key '" + k +
                           "' (origin, kind, length, pointers, offsets, call, "
                           "frame)");
    }
    return f;
}

// ---- corpus plumbing -------------------------------------------------------

struct CaseRef {
    std::string id;
    fs::path dir;
    TestCaseConfig config;
};

// A case directory is one with a test.s; a corpus root carries
// manifest.jsonl. Anything else gets an actionable error.
std::vector<CaseRef> resolve_cases(const fs::path& path) {
    if (fs::exists(path / "manifest.jsonl")) {
        std::vector<CaseRef> out;
        std::istringstream lines(slurp(path / "manifest.jsonl"));
        std::string line;
        int n = 0;
        while (std::getline(lines, line)) {
            ++n;
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("id") || !j.contains("config"))
                throw CliError("manifest.jsonl line " + std::to_string(n) +
                               " is not a case record");
            std::string id = j["id"].get<std::string>();
            out.push_back({id, path / "cases" / id,
                           config_from_json(j["config"].dump())});
        }
        if (out.empty()) throw CliError("manifest.jsonl lists no cases");
        return out;
    }
    if (fs::exists(path / "test.s")) {
        std::string id = path.filename().string();
        // Single case: recover its configuration from the id.
        for (const TestCaseConfig& c : enumerate_configs({}))
            if (config_slug(c) == id) return {{id, path, c}};
        throw CliError("'" + id +
                       "' is not a generated case id; for ad-hoc programs use "
                       "`binflow run`");
    }
    throw CliError(path.string() +
                   " is neither a corpus root (manifest.jsonl) nor a case "
                   "directory (test.s); run `binflow generate " +
                   path.string() + "` first");
}

Program load_case_program(const CaseRef& c) {
    return parse_program(slurp(c.dir / "test.s"));
}

// ---- environment JSON (for `run` / `oracle`) --------------------------------

uint64_t json_u64(const json& v, const char* what) {
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    if (v.is_number_integer()) return static_cast<uint64_t>(v.get<int64_t>());
    if (v.is_string()) {
        const std::string& s = v.get_ref<const std::string&>();
        try {
            return std::stoull(s, nullptr, 0);
        } catch (...) {
        }
    }
    throw CliError(std::string(what) + " must be a number or numeric string");
}

Environment env_from_json(const json& j) {
    Environment e;
    if (j.contains("regs"))
        for (auto& [name, v] : j["regs"].items())
            e.regs[name] = json_u64(v, ("regs." + name).c_str());
    if (j.contains("mem"))
        for (auto& [addr, bytes] : j["mem"].items()) {
            std::vector<uint8_t> data;
            for (const json& b : bytes)
                data.push_back(static_cast<uint8_t>(json_u64(b, "mem byte")));
            e.mem[std::stoull(addr, nullptr, 0)] = std::move(data);
        }
    if (j.contains("step_limit")) e.step_limit = json_u64(j["step_limit"], "step_limit");
    return e;
}

std::vector<Environment> envs_from_file(const fs::path& p) {
    json j = json::parse(slurp(p));
    std::vector<Environment> envs;
    if (j.is_array())
        for (const json& e : j) envs.push_back(env_from_json(e));
    else
        envs.push_back(env_from_json(j));
    if (envs.empty()) throw CliError(p.string() + " holds no environments");
    return envs;
}

// ---- per-case pipeline stages ----------------------------------------------

DataFlowGraph dynamic_dfg_for(const CaseRef& c) {
    Program prog = load_case_program(c);
    std::vector<Trace> traces;
    for (const Environment& env : environments_for(c.config)) {
        ExecResult res = execute(prog, "f_target", env);
        if (!res.ok())
            throw CliError(c.id + ": execution fault: " + res.error_detail);
        traces.push_back(std::move(res.trace));
    }
    DataFlowGraph g = build_interprocedural_dfg(traces);
    reconnect_save_restore(g, traces, prog);
    eliminate_clear_idioms(g, prog);
    return extract_intraprocedural(g, prog, "f_target");
}

AnalysisConfig analysis_config(const std::string& preset, bool c1, bool c2,
                               bool f) {
    if (!preset.empty()) {
        std::optional<AnalysisConfig> cfg = preset_by_name(preset);
        if (!cfg)
            throw CliError("unknown preset '" + preset +
                           "' (baseline|angr-cf)");
        return *cfg;
    }
    AnalysisConfig cfg;
    cfg.c1 = c1;
    cfg.c2 = c2;
    cfg.f = f;
    return cfg;
}

// ---- subcommands -------------------------------------------------------------

int cmd_generate(const std::vector<std::string>& filter_kvs,
                 const std::string& outdir) {
    GenFilter filter = parse_filters(filter_kvs);
    std::vector<TestCaseConfig> cfgs = enumerate_configs(filter);
    if (cfgs.empty()) throw CliError("the filter matches no configurations");

    fs::path root(outdir);
    fs::create_directories(root / "cases");
    std::vector<std::string> manifest_lines(cfgs.size());
    parallel_for(cfgs.size(), [&](size_t i) {
        SynthesizedCase tc = synthesize_test_case(cfgs[i]);
        std::string id = config_slug(cfgs[i]);
        fs::path dir = root / "cases" / id;
        fs::create_directories(dir);
        spill(dir / "test.s", render_program(tc.prog, true));
        spill(dir / "truth.json", truth_to_json(tc.truth) + "\n");
        json line = {
            {"id", id},
            {"fingerprint",
             fingerprint_hex(fingerprint(tc.prog.functions.front()))},
            {"config", json::parse(config_to_json(cfgs[i]))},
        };
        manifest_lines[i] = line.dump();
    });
    std::string manifest;
    for (const std::string& l : manifest_lines) manifest += l + "\n";
    spill(root / "manifest.jsonl", manifest);
    std::cout << "generated " << cfgs.size() << " cases under " << outdir
              << "\n";
    return 0;
}

int cmd_run_dynamic(const std::string& path) {
    std::vector<CaseRef> cases = resolve_cases(path);
    parallel_for(cases.size(), [&](size_t i) {
        DataFlowGraph g = dynamic_dfg_for(cases[i]);
        spill(cases[i].dir / "dynamic.json", dfg_to_json(g) + "\n");
    });
    std::cout << "dynamic DFGs written for " << cases.size() << " case"
              << (cases.size() == 1 ? "" : "s") << "\n";
    return 0;
}

int cmd_analyze_static(const std::string& path, const std::string& preset,
                       bool c1, bool c2, bool f) {
    AnalysisConfig cfg = analysis_config(preset, c1, c2, f);
    std::string tag = preset_name(cfg);
    std::vector<CaseRef> cases = resolve_cases(path);
    parallel_for(cases.size(), [&](size_t i) {
        Program prog = load_case_program(cases[i]);
        const Function* fn = prog.function("f_target");
        if (!fn) throw CliError(cases[i].id + ": no f_target function");
        DataFlowGraph g = analyze_function(prog, *fn, cfg);
        spill(cases[i].dir / ("static-" + tag + ".json"), dfg_to_json(g) + "\n");
    });
    std::cout << "static DFGs (" << tag << ") written for " << cases.size()
              << " case" << (cases.size() == 1 ? "" : "s") << "\n";
    return 0;
}

struct CaseEval {
    EvalRecord record;
    // tag -> (tp, fp, fn) against this case's dynamic DFG, when present.
    std::map<std::string, std::array<uint64_t, 3>> counts;
};

int cmd_evaluate(const std::string& path) {
    fs::path root(path);
    if (!fs::exists(root / "manifest.jsonl"))
        throw CliError(path +
                       " has no manifest.jsonl; run `binflow generate " + path +
                       "` (then analyze-static) first");
    std::vector<CaseRef> cases = resolve_cases(root);

    std::vector<CaseEval> evals(cases.size());
    std::atomic<size_t> with_static{0};
    parallel_for(cases.size(), [&](size_t i) {
        const CaseRef& c = cases[i];
        GroundTruthRecord truth = truth_from_json(slurp(c.dir / "truth.json"));

        std::map<std::string, DataFlowGraph> statics;
        for (const fs::directory_entry& e : fs::directory_iterator(c.dir)) {
            std::string name = e.path().filename().string();
            if (name.rfind("static-", 0) == 0 && name.ends_with(".json")) {
                std::string tag = name.substr(7, name.size() - 7 - 5);
                statics[tag] = dfg_from_json(slurp(e.path()));
            }
        }
        if (statics.empty()) return;  // counted below, reported once
        ++with_static;

        std::map<std::string, Verdict> verdicts;
        for (const auto& [tag, g] : statics)
            verdicts[tag] = compare_edge(g, truth);
        evals[i].record = make_record(c.config, truth, verdicts);
        evals[i].record.id = c.id;

        fs::path dyn = c.dir / "dynamic.json";
        if (fs::exists(dyn)) {
            std::set<Edge> d = edge_set(dfg_from_json(slurp(dyn)));
            for (const auto& [tag, g] : statics) {
                MetricsReport m = score_against_dynamic(edge_set(g), d);
                evals[i].counts[tag] = {m.tp_lower, m.fp_upper, m.fn_lower};
            }
        }
    });
    if (with_static == 0)
        throw CliError(
            "no static-*.json found under any case; run `binflow "
            "analyze-static --preset baseline " +
            path + "` first");

    // Sequential aggregation, in manifest order.
    json out;
    out["records"] = json::array();
    std::map<std::string, std::array<uint64_t, 3>> totals;
    size_t dynamic_cases = 0;
    for (const CaseEval& e : evals) {
        if (e.record.id.empty()) continue;
        json r = {
            {"id", e.record.id},
            {"write_origin", origin_name(e.record.write_origin)},
            {"read_origin", origin_name(e.record.read_origin)},
            {"degree", degree_name(e.record.degree)},
            {"fully_specified", e.record.fully_specified},
            {"call_between", e.record.call_between},
            {"equal_offset", e.record.equal_offset},
        };
        for (const auto& [tag, v] : e.record.verdicts)
            r["verdicts"][tag] = v == Verdict::Edge ? "edge" : "no-edge";
        out["records"].push_back(std::move(r));
        if (!e.counts.empty()) ++dynamic_cases;
        for (const auto& [tag, c] : e.counts) {
            totals[tag][0] += c[0];
            totals[tag][1] += c[1];
            totals[tag][2] += c[2];
        }
    }
    for (const auto& [tag, t] : totals)
        out["metrics"][tag] = {{"tp", t[0]}, {"fp", t[1]}, {"fn", t[2]}};
    spill(root / "eval.json", out.dump(2) + "\n");

    std::cout << "evaluated " << with_static << "/" << cases.size()
              << " cases (" << dynamic_cases
              << " with dynamic references) -> " << (root / "eval.json").string()
              << "\n";
    if (with_static < cases.size())
        std::cout << "note: " << (cases.size() - with_static)
                  << " case(s) lack static-*.json and were skipped\n";
    return 0;
}

int cmd_report(const std::string& path, const std::string& format) {
    fs::path root(path);
    if (!fs::exists(root / "eval.json"))
        throw CliError(path + " has no eval.json; run `binflow evaluate " +
                       path + "` first");
    json in = json::parse(slurp(root / "eval.json"));

    std::vector<EvalRecord> records;
    for (const json& r : in["records"]) {
        EvalRecord rec;
        rec.id = r["id"].get<std::string>();
        rec.write_origin = origin_from_name(r["write_origin"].get<std::string>());
        rec.read_origin = origin_from_name(r["read_origin"].get<std::string>());
        rec.degree = degree_from_name(r["degree"].get<std::string>());
        rec.fully_specified = r["fully_specified"].get<bool>();
        rec.call_between = r["call_between"].get<bool>();
        rec.equal_offset = r["equal_offset"].get<bool>();
        if (r.contains("verdicts"))
            for (auto& [tag, v] : r["verdicts"].items())
                rec.verdicts[tag] = v.get<std::string>() == "edge"
                                        ? Verdict::Edge
                                        : Verdict::NoEdge;
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw CliError("eval.json holds no records");

    ReportBundle bundle;
    ReportTable overall = tabulate_microbench(records, GroupKey::None);
    overall.title = "Edges by alias class and ground truth";
    ReportTable by_call = tabulate_microbench(records, GroupKey::Callee);
    by_call.title = "Split by interposed call";
    ReportTable by_off = tabulate_microbench(records, GroupKey::EqualOffset);
    by_off.title = "Split by equal offset";
    bundle.tables = {overall, by_call, by_off};

    if (in.contains("metrics"))
        for (auto& [tag, m] : in["metrics"].items())
            bundle.metrics.emplace_back(
                tag + " vs dynamic",
                make_metrics(m["tp"].get<uint64_t>(), m["fp"].get<uint64_t>(),
                             m["fn"].get<uint64_t>()));

    ReportFormat fmt = report_format_from_name(format);
    std::string written =
        emit_report(bundle, fmt, (root / "reports").string());
    std::cout << written << "\n";
    return 0;
}

int cmd_fixtures(const std::string& preset) {
    std::vector<FixtureCheck> checks = check_listings(preset);
    size_t misses = 0;
    for (const FixtureCheck& c : checks) {
        bool ok = fixture_ok(c);
        misses += !ok;
        char line[160];
        snprintf(line, sizeof line,
                 "%-16s 0x%-6llx -> 0x%-6llx expected %-8s found %-8s %s",
                 c.listing.c_str(), (unsigned long long)c.write,
                 (unsigned long long)c.read, c.expected ? "edge" : "no-edge",
                 c.found ? "edge" : "no-edge", ok ? "ok" : "MISMATCH");
        std::cout << line << "\n";
    }
    std::cout << checks.size() << " checks, " << misses << " mismatch"
              << (misses == 1 ? "" : "es") << " (preset " << preset << ")\n";
    return misses == 0 ? 0 : 1;
}

int cmd_run(const std::string& program, const std::string& entry,
            const std::string& env_file) {
    Program prog = parse_program(slurp(program));
    Environment env =
        env_file.empty() ? Environment{} : envs_from_file(env_file).front();
    ExecResult res = execute(prog, entry, env);
    std::cout << trace_to_jsonl(res.trace);
    if (!res.ok()) {
        std::cerr << "fault after " << res.steps << " steps: " << res.error_detail
                  << "\n";
        return 1;
    }
    return 0;
}

int cmd_oracle(const std::string& program, const std::string& entry,
               const std::string& write_s, const std::string& read_s,
               const std::string& envs_file) {
    Program prog = parse_program(slurp(program));
    uint64_t w = std::stoull(write_s, nullptr, 0);
    uint64_t r = std::stoull(read_s, nullptr, 0);
    FlowVerdict v = oracle_data_flow(prog, entry, w, r, envs_from_file(envs_file));
    switch (v) {
        case FlowVerdict::Always: std::cout << "always\n"; break;
        case FlowVerdict::Sometimes: std::cout << "sometimes\n"; break;
        case FlowVerdict::Never: std::cout << "never\n"; break;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"data-flow benchmark generator, analyses, and evaluation"};
    app.require_subcommand(1);

    std::vector<std::string> filter_kvs;
    std::string outdir, path = ".", preset, format = "markdown";
    std::string program, entry = "f_target", env_file, write_s, read_s;
    bool c1 = false, c2 = false, f = false;

    CLI::App* gen = app.add_subcommand("generate", "synthesize a labeled corpus");
    gen->add_option("--filter", filter_kvs,
                    "restrict the enumeration (key=value; keys: origin, kind, "
                    "length, pointers, offsets, call, frame)");
    gen->add_option("outdir", outdir, "corpus root to create")->required();

    CLI::App* rd = app.add_subcommand(
        "run-dynamic", "execute cases and write per-case dynamic DFGs");
    rd->add_option("path", path, "corpus root or single case directory")
        ->required();

    CLI::App* as = app.add_subcommand(
        "analyze-static", "run the static analysis and write per-case DFGs");
    as->add_option("path", path, "corpus root or single case directory")
        ->required();
    as->add_option("--preset", preset, "baseline or angr-cf");
    as->add_flag("--c1", c1, "calls leave non-returned state alone");
    as->add_flag("--c2", c2, "stack memory survives calls");
    as->add_flag("--f", f, "keep field offsets within regions");

    CLI::App* ev = app.add_subcommand(
        "evaluate", "compare static DFGs to ground truth and dynamic DFGs");
    ev->add_option("path", path, "corpus root")->required();

    CLI::App* rp = app.add_subcommand("report", "render eval.json as a report");
    rp->add_option("path", path, "corpus root (default .)");
    rp->add_option("--format", format, "csv, markdown, or json");

    CLI::App* fx = app.add_subcommand(
        "fixtures", "check the bundled listings against their expected edges");
    std::string fx_preset = "angr-cf";
    fx->add_option("--preset", fx_preset, "baseline or angr-cf");

    CLI::App* run = app.add_subcommand("run", "execute a program, print the trace");
    run->add_option("--program", program, "assembly file")->required();
    run->add_option("--entry", entry, "entry function (default f_target)");
    run->add_option("--env", env_file, "environment JSON file");

    CLI::App* orc = app.add_subcommand(
        "oracle", "brute-force flow verdict for a write/read pair");
    orc->add_option("--program", program, "assembly file")->required();
    orc->add_option("--entry", entry, "entry function (default f_target)");
    orc->add_option("--write", write_s, "write instruction address")->required();
    orc->add_option("--read", read_s, "read instruction address")->required();
    orc->add_option("--envs", env_file, "JSON file with an environment array")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(filter_kvs, outdir);
        if (rd->parsed()) return cmd_run_dynamic(path);
        if (as->parsed()) return cmd_analyze_static(path, preset, c1, c2, f);
        if (ev->parsed()) return cmd_evaluate(path);
        if (rp->parsed()) return cmd_report(path, format);
        if (fx->parsed()) return cmd_fixtures(fx_preset);
        if (run->parsed()) return cmd_run(program, entry, env_file);
        if (orc->parsed()) return cmd_oracle(program, entry, write_s, read_s, env_file);
    } catch (const std::exception& e) {
        std::cerr << "binflow: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
