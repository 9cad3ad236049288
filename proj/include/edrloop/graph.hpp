#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "edrloop/errors.hpp"

namespace edrloop {

enum class Stage { Entry, Foothold, Lateral, Objective };

const char* stage_name(Stage s);
Stage stage_from_name(const std::string& name); // throws SchemaError

struct Node {
    std::string id;
    Stage stage = Stage::Foothold;
};

struct Edge {
    std::string id;
    std::string src;
    std::string dst;
    std::string technique;
    double payoff = 0.0;
    double block = 0.0;
    double detect = 0.0;
    std::map<std::string, double> policy_effectiveness;
};

// Path witness: value = survival * max_payoff. Empty sequences mean no
// ENTRY-to-OBJECTIVE path exists (value 0).
struct PathResult {
    std::vector<std::string> node_sequence;
    std::vector<std::string> edge_sequence;
    double survival = 0.0;
    double max_payoff = 0.0;
    double value = 0.0;
};

struct BottleneckEntry {
    std::string edge_id;
    double score = 0.0;
};

// Directed multigraph over attack stages. Exactly one ENTRY and one OBJECTIVE
// node; edges append-only (no removal), attributes mutate only through
// actuation helpers.
class AttackGraph {
public:
    AttackGraph() = default;

    static AttackGraph from_json_text(const std::string& text);
    std::string to_json_text(int indent = -1) const;

    void add_node(const Node& n); // throws SchemaError on duplicate id
    void add_edge(const Edge& e); // throws SchemaError when invalid

    // Reason an edge cannot be added, std::nullopt when it can. Checks:
    // duplicate id, missing endpoint, self-loop, direct ENTRY->OBJECTIVE,
    // attributes outside [0,1].
    std::optional<std::string> validate_new_edge(const Edge& e) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::vector<Edge>& edges_mut() { return edges_; }

    const Node* find_node(const std::string& id) const;
    const Edge* find_edge(const std::string& id) const;
    Edge* find_edge_mut(const std::string& id);
    int node_index(const std::string& id) const; // -1 when absent

    const std::vector<int>& out_edges(int node_idx) const { return out_edges_[node_idx]; }
    const std::vector<int>& in_edges(int node_idx) const { return in_edges_[node_idx]; }

    int entry_index() const { return entry_idx_; }
    int objective_index() const { return objective_idx_; }
    bool has_endpoints() const { return entry_idx_ >= 0 && objective_idx_ >= 0; }

    // Completed loading: verifies exactly one ENTRY and one OBJECTIVE.
    void finalize() const; // throws SchemaError

private:
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::unordered_map<std::string, int> node_idx_;
    std::unordered_map<std::string, int> edge_idx_;
    std::vector<std::vector<int>> out_edges_;
    std::vector<std::vector<int>> in_edges_;
    int entry_idx_ = -1;
    int objective_idx_ = -1;
};

// Best survival product (over 1-block factors) from ENTRY to every node.
// Unreachable nodes get -1. survivals_to_objective is the reverse direction.
std::vector<double> survivals_from_entry(const AttackGraph& g);
std::vector<double> survivals_to_objective(const AttackGraph& g);

// Game value: max over edges e of
//   payoff(e) * bestSurv(ENTRY->src e) * (1-block e) * bestSurv(dst e->OBJECTIVE).
// Exact for the max-of-(survival * max payoff) path objective on DAGs.
double game_value(const AttackGraph& g);

// A path achieving game_value; value ties broken by lexicographically
// smallest node-id sequence. Deterministic.
PathResult critical_path(const AttackGraph& g);

// Value of a concrete node sequence: survival product times max payoff along
// it. Multi-edges resolved to the best survival edge per hop (ties by edge
// id). Throws ParamError when the sequence has no edge for some hop.
PathResult path_value(const AttackGraph& g, const std::vector<std::string>& node_seq);

// Per-edge criticality: score(e) = game_value(g) - game_value(g with block(e)
// forced to forced_block). Descending score, ties ascending edge id, top k.
std::vector<BottleneckEntry> bottleneck_edges(const AttackGraph& g, std::size_t k,
                                              double forced_block = 0.95);

} // namespace edrloop
