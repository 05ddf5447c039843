#pragma once

// Bundled regression material, two kinds:
//
//  * Disassembled fragments of real library functions with documented
//    data-flow edges. Each fragment keeps its original instruction
//    addresses, so the expected edges are stated as (write, read) address
//    pairs on the "mem" channel. Which of them an analysis finds depends
//    on how it models calls and pointer offsets, and that difference is
//    exactly what the fixtures pin down.
//
//  * A small handwritten corpus of multi-block functions (loops, calls,
//    branches), each packaged with environments that cover every path.
//    Executing the environments yields a dynamic data-flow graph to score
//    static results against.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bfa/interp.hpp"
#include "bfa/symdom.hpp"

namespace bfa {

struct FixtureError : std::runtime_error {
    explicit FixtureError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ListingFixture {
    struct Expect {
        uint64_t write = 0;
        uint64_t read = 0;
        bool under_baseline = false;  // also found by the baseline preset?
    };

    std::string name;
    std::string text;            // canonical assembly, explicit addresses
    std::vector<Expect> edges;   // every entry is present under angr-cf
};

const std::vector<ListingFixture>& bundled_listings();

// One documented edge checked under one preset.
struct FixtureCheck {
    std::string listing;
    uint64_t write = 0;
    uint64_t read = 0;
    bool expected = false;
    bool found = false;
};

inline bool fixture_ok(const FixtureCheck& c) { return c.expected == c.found; }

// Analyzes every bundled listing under the named preset ("baseline" or
// "angr-cf") and reports each documented edge. Throws FixtureError for an
// unknown preset name.
std::vector<FixtureCheck> check_listings(std::string_view preset);

struct MiniFunction {
    std::string name;  // entry function; programs may define helpers too
    std::string text;
    std::vector<Environment> envs;
};

const std::vector<MiniFunction>& mini_corpus();

// Dynamic-vs-static tallies over the mini corpus, summed across functions.
// The dynamic side is the normalized per-function graph of all recorded
// executions; tp counts edges in both views, fp static-only, fn
// dynamic-only. Throws FixtureError if any environment faults.
struct CorpusTally {
    size_t tp = 0;
    size_t fp = 0;
    size_t fn = 0;
    size_t dynamic_edges = 0;
};

CorpusTally score_mini_corpus(const AnalysisConfig& cfg);

}  // namespace bfa
