#pragma once

#include <map>
#include <string>

#include "edrloop/graph.hpp"
#include "edrloop/rng.hpp"

namespace edrloop {

// Revealed ground truth for one edge: the measurable attributes only.
// Payoff is never measured; its initialization error persists.
struct TruthReveal {
    double block = 0.0;
    double detect = 0.0;
    bool traversed = false;
};

// Per-edge filter state alongside the believed attributes stored in the
// belief graph's edge. P is the posterior variance proxy in (0,1].
struct FilterState {
    double P = 0.0;
    double last_innovation = 0.0;
    bool traversed = false;
};

struct KalmanResult {
    double gain = 0.0;
    double estimate = 0.0;
    double posterior = 0.0;
};

// Defender's model: believed attributes live in `graph`, filter state in
// `filters` (same edge ids). Edges absent from the belief are "dark".
struct BeliefGraph {
    AttackGraph graph;
    std::map<std::string, FilterState> filters;

    bool contains(const std::string& edge_id) const { return filters.count(edge_id) > 0; }
    bool empty() const { return filters.empty(); }

    std::string to_json_text(int indent = -1) const;
    static BeliefGraph from_json_text(const std::string& text);
};

// Scalar filter step: K = P/(P+R), estimate += K (z - estimate), P' = (1-K) P.
// Throws ParamError when r <= 0.
KalmanResult kalman_update(double estimate, double p, double z, double r);

// (1 - P) * (|d_detect| + |d_block| + |d_traversal|) / 3, traversal coded 1/0.
// Pure: reads whatever state it is handed.
double innovation(const Edge& believed, const FilterState& f, const TruthReveal& z);

// One measurement on a known edge: single gain from P, applied to each
// continuous attribute; believed traversal snaps to truth; P contracts once;
// innovation recorded post-update. Returns the applied gain.
double measure_edge(BeliefGraph& b, const std::string& edge_id, const TruthReveal& z, double r);

// Dark edge enters the belief: attributes copied from truth, P = p_dark,
// zero innovation. Throws ParamError when the edge is already known.
void reveal_edge(BeliefGraph& b, const Edge& truth_edge, bool traversed, double p_dark);

// Mean posterior over belief edges; 0 when the belief is empty (check
// BeliefGraph::empty to distinguish).
double theta(const BeliefGraph& b);

// Mean of per-edge last recorded innovations; edges without a measurement
// this round contribute their stored value. 0 when empty.
double mean_innovation(const BeliefGraph& b);

// Alerted subset of the truth graph: each edge independently included with
// probability coverage; believed payoff/block/detect are truth plus uniform
// noise in [-noise, +noise] clamped to [0,1]; P starts at p_alerted;
// believed traversal starts false. All nodes are copied (asset inventory is
// known; connectivity is not).
BeliefGraph init_belief(const AttackGraph& truth, double coverage, double p_alerted,
                        Rng& rng, double noise = 0.1);

} // namespace edrloop
