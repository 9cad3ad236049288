#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edrloop/catalog.hpp"
#include "edrloop/graph.hpp"
#include "edrloop/loop.hpp"

namespace edrloop {

// Built-in control-plane catalog: 30 policies (20 block-native, 10
// detect-native) across endpoint/identity/cloud, 66 techniques with uniform
// payoff 0.9. Eight techniques have no covering policy.
Catalogs default_catalogs();

struct GenSpec {
    std::string size = "small"; // small (50 edges) | medium (200) | large (800)
    std::uint64_t seed = 42;
    int nodes = 0; // explicit override; 0 = size preset
    int edges = 0;
};

// Layered ENTRY -> footholds -> lateral -> OBJECTIVE DAG with a guaranteed
// spine, full reachability, exact edge count, and per-stage payoff ranges
// (capped at 0.9). Regenerates on a degenerate (near-zero value) draw.
AttackGraph generate_graph(const GenSpec& spec);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

Interval wilson_interval(int successes, int trials, double z = 1.959963984540054);

// Percentile bootstrap of the median (10k resamples by default). Fixed seed
// so reports are reproducible.
Interval bootstrap_ci(const std::vector<double>& values, int resamples = 10000,
                      std::uint64_t seed = 42, double lo_pct = 2.5, double hi_pct = 97.5);

double median(std::vector<double> values); // by value: sorts its copy
double round_sig(double x, int digits = 12);

struct GraphOutcome {
    std::string graph_id;
    int rounds = 0;
    std::string stop_code;
    bool value_monotone = false;
    bool lyapunov_monotone = false;
    bool iss_ok = false;
    double final_s = 0.0;
    double final_v = 0.0;
    double final_gap = 0.0; // |S - S_hat| at stop
    double fit_b = 0.0;
    bool fit_ok = false;
};

struct Aggregates {
    int value_monotone_pass = 0;
    int lyapunov_monotone_pass = 0;
    Interval monotone_wilson; // both-monotone fraction
    int iss_pass = 0;
    Interval iss_wilson;
    double mean_rounds = 0.0;
    double median_rounds = 0.0;
    Interval rounds_ci;
    double median_gap = 0.0;
    Interval gap_ci;
    double median_fit_b = 0.0;
    int fit_pass = 0;
    std::map<std::string, int> stop_reasons;
};

struct CorpusReport {
    std::string size;
    LoopMode mode = LoopMode::DefenderOnly;
    int n_graphs = 0;
    std::uint64_t seed = 0;
    std::vector<GraphOutcome> graphs; // sorted by graph_id
    Aggregates agg;

    std::string to_json_text(int indent = -1) const; // numbers at 12 sig digits
};

// n_graphs independent (graph seed, loop seed) pairs derived from `seed`;
// one experiment each under base_cfg. Matched across modes: the graph draw
// depends only on (seed, index).
CorpusReport run_corpus(int n_graphs, const std::string& size, std::uint64_t seed,
                        const LoopConfig& base_cfg);

} // namespace edrloop
