#include "edrloop/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include <nlohmann/json.hpp>

namespace edrloop {

using nlohmann::json;

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Entry: return "ENTRY";
        case Stage::Foothold: return "FOOTHOLD";
        case Stage::Lateral: return "LATERAL";
        case Stage::Objective: return "OBJECTIVE";
    }
    return "FOOTHOLD";
}

Stage stage_from_name(const std::string& name) {
    if (name == "ENTRY") return Stage::Entry;
    if (name == "FOOTHOLD") return Stage::Foothold;
    if (name == "LATERAL") return Stage::Lateral;
    if (name == "OBJECTIVE") return Stage::Objective;
    throw SchemaError("stage", "unknown stage '" + name + "'");
}

namespace {

double require_unit(const json& j, const std::string& where) {
    if (!j.is_number()) throw SchemaError(where, "expected a number");
    double v = j.get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw SchemaError(where, "value outside [0,1]");
    return v;
}

std::string require_string(const json& j, const std::string& where) {
    if (!j.is_string() || j.get<std::string>().empty())
        throw SchemaError(where, "expected a non-empty string");
    return j.get<std::string>();
}

} // namespace

void AttackGraph::add_node(const Node& n) {
    if (n.id.empty()) throw SchemaError("nodes", "empty node id");
    if (node_idx_.count(n.id))
        throw SchemaError("nodes[" + n.id + "]", "duplicate node id");
    node_idx_[n.id] = static_cast<int>(nodes_.size());
    if (n.stage == Stage::Entry && entry_idx_ < 0) entry_idx_ = static_cast<int>(nodes_.size());
    if (n.stage == Stage::Objective && objective_idx_ < 0) objective_idx_ = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    out_edges_.emplace_back();
    in_edges_.emplace_back();
}

std::optional<std::string> AttackGraph::validate_new_edge(const Edge& e) const {
    if (e.id.empty()) return "empty edge id";
    if (edge_idx_.count(e.id)) return "duplicate edge id '" + e.id + "'";
    auto si = node_idx_.find(e.src);
    auto di = node_idx_.find(e.dst);
    if (si == node_idx_.end()) return "unknown src node '" + e.src + "'";
    if (di == node_idx_.end()) return "unknown dst node '" + e.dst + "'";
    if (e.src == e.dst) return "self-loop on '" + e.src + "'";
    if (nodes_[si->second].stage == Stage::Entry &&
        nodes_[di->second].stage == Stage::Objective)
        return "direct ENTRY->OBJECTIVE edge";
    if (e.technique.empty()) return "empty technique";
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(e.payoff)) return "payoff outside [0,1]";
    if (!unit(e.block)) return "block outside [0,1]";
    if (!unit(e.detect)) return "detect outside [0,1]";
    for (const auto& [pid, eff] : e.policy_effectiveness)
        if (pid.empty() || !unit(eff)) return "bad policy_effectiveness entry";
    return std::nullopt;
}

void AttackGraph::add_edge(const Edge& e) {
    if (auto reason = validate_new_edge(e))
        throw SchemaError("edges[" + e.id + "]", *reason);
    int idx = static_cast<int>(edges_.size());
    edge_idx_[e.id] = idx;
    out_edges_[node_idx_.at(e.src)].push_back(idx);
    in_edges_[node_idx_.at(e.dst)].push_back(idx);
    edges_.push_back(e);
}

const Node* AttackGraph::find_node(const std::string& id) const {
    auto it = node_idx_.find(id);
    return it == node_idx_.end() ? nullptr : &nodes_[it->second];
}

const Edge* AttackGraph::find_edge(const std::string& id) const {
    auto it = edge_idx_.find(id);
    return it == edge_idx_.end() ? nullptr : &edges_[it->second];
}

Edge* AttackGraph::find_edge_mut(const std::string& id) {
    auto it = edge_idx_.find(id);
    return it == edge_idx_.end() ? nullptr : &edges_[it->second];
}

int AttackGraph::node_index(const std::string& id) const {
    auto it = node_idx_.find(id);
    return it == node_idx_.end() ? -1 : it->second;
}

void AttackGraph::finalize() const {
    int entries = 0, objectives = 0;
    for (const auto& n : nodes_) {
        if (n.stage == Stage::Entry) ++entries;
        if (n.stage == Stage::Objective) ++objectives;
    }
    if (entries != 1)
        throw SchemaError("nodes", "expected exactly one ENTRY node, found " + std::to_string(entries));
    if (objectives != 1)
        throw SchemaError("nodes", "expected exactly one OBJECTIVE node, found " + std::to_string(objectives));
}

AttackGraph AttackGraph::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("byte " + std::to_string(e.byte), e.what());
    }
    if (!j.is_object()) throw SchemaError("$", "top level must be an object");
    if (!j.contains("nodes") || !j["nodes"].is_array())
        throw SchemaError("nodes", "missing or not an array");
    if (!j.contains("edges") || !j["edges"].is_array())
        throw SchemaError("edges", "missing or not an array");

    AttackGraph g;
    std::size_t i = 0;
    for (const auto& jn : j["nodes"]) {
        std::string where = "nodes[" + std::to_string(i++) + "]";
        if (!jn.is_object()) throw SchemaError(where, "expected an object");
        Node n;
        n.id = require_string(jn.value("id", json()), where + ".id");
        n.stage = stage_from_name(require_string(jn.value("stage", json()), where + ".stage"));
        g.add_node(n);
    }
    i = 0;
    for (const auto& je : j["edges"]) {
        std::string where = "edges[" + std::to_string(i++) + "]";
        if (!je.is_object()) throw SchemaError(where, "expected an object");
        Edge e;
        e.id = require_string(je.value("id", json()), where + ".id");
        where = "edges[" + e.id + "]";
        e.src = require_string(je.value("src", json()), where + ".src");
        e.dst = require_string(je.value("dst", json()), where + ".dst");
        e.technique = require_string(je.value("technique", json()), where + ".technique");
        e.payoff = require_unit(je.value("payoff", json()), where + ".payoff");
        e.block = require_unit(je.value("block", json()), where + ".block");
        e.detect = require_unit(je.value("detect", json()), where + ".detect");
        if (je.contains("policy_effectiveness")) {
            const auto& pe = je["policy_effectiveness"];
            if (!pe.is_object()) throw SchemaError(where + ".policy_effectiveness", "expected an object");
            for (auto it = pe.begin(); it != pe.end(); ++it)
                e.policy_effectiveness[it.key()] =
                    require_unit(it.value(), where + ".policy_effectiveness." + it.key());
        }
        g.add_edge(e);
    }
    g.finalize();
    return g;
}

std::string AttackGraph::to_json_text(int indent) const {
    json jn = json::array();
    for (const auto& n : nodes_)
        jn.push_back({{"id", n.id}, {"stage", stage_name(n.stage)}});
    json je = json::array();
    for (const auto& e : edges_) {
        json pe = json::object();
        for (const auto& [pid, eff] : e.policy_effectiveness) pe[pid] = eff;
        je.push_back({{"id", e.id},
                      {"src", e.src},
                      {"dst", e.dst},
                      {"technique", e.technique},
                      {"payoff", e.payoff},
                      {"block", e.block},
                      {"detect", e.detect},
                      {"policy_effectiveness", pe}});
    }
    json j{{"nodes", jn}, {"edges", je}};
    return j.dump(indent);
}

namespace {

// Max-product Dijkstra over 1-block factors. `reversed` walks in-edges,
// giving best survival from every node to `source` interpreted as target.
// Factors are in [0,1], so settled nodes are final. Unreachable: -1.
std::vector<double> max_product(const AttackGraph& g, int source, bool reversed) {
    const int n = static_cast<int>(g.nodes().size());
    std::vector<double> best(n, -1.0);
    if (source < 0) return best;
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry> heap;
    best[source] = 1.0;
    heap.push({1.0, -source}); // negative index: deterministic order on ties
    std::vector<char> done(n, 0);
    while (!heap.empty()) {
        auto [p, negu] = heap.top();
        heap.pop();
        int u = -negu;
        if (done[u]) continue;
        done[u] = 1;
        const auto& adj = reversed ? g.in_edges(u) : g.out_edges(u);
        for (int ei : adj) {
            const Edge& e = g.edges()[ei];
            int v = g.node_index(reversed ? e.src : e.dst);
            double cand = p * (1.0 - e.block);
            if (cand > best[v]) {
                best[v] = cand;
                heap.push({cand, -v});
            }
        }
    }
    return best;
}

} // namespace

std::vector<double> survivals_from_entry(const AttackGraph& g) {
    return max_product(g, g.entry_index(), false);
}

std::vector<double> survivals_to_objective(const AttackGraph& g) {
    return max_product(g, g.objective_index(), true);
}

double game_value(const AttackGraph& g) {
    if (!g.has_endpoints()) return 0.0;
    auto fwd = survivals_from_entry(g);
    auto bwd = survivals_to_objective(g);
    double s = 0.0;
    bool any = false;
    for (const auto& e : g.edges()) {
        double f = fwd[g.node_index(e.src)];
        double b = bwd[g.node_index(e.dst)];
        if (f < 0.0 || b < 0.0) continue;
        any = true;
        double term = ((e.payoff * f) * (1.0 - e.block)) * b;
        if (term > s) s = term;
    }
    return any ? s : 0.0;
}

namespace {

// Max-product labels plus, on exact product ties, the lexicographically
// smallest node-index-id sequence. Label-correcting (a node can improve
// lexicographically at equal product); sequences are simple, so it
// terminates. Only critical_path pays for this; game_value stays light.
struct LexLabels {
    std::vector<double> prod;
    std::vector<std::vector<int>> seq; // node indices from the source
};

bool lex_smaller(const AttackGraph& g, const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == b[i]) continue;
        return g.nodes()[a[i]].id < g.nodes()[b[i]].id;
    }
    return a.size() < b.size();
}

LexLabels lex_max_product(const AttackGraph& g, int source, bool reversed) {
    const int n = static_cast<int>(g.nodes().size());
    LexLabels lab;
    lab.prod.assign(n, -1.0);
    lab.seq.assign(n, {});
    if (source < 0) return lab;
    lab.prod[source] = 1.0;
    lab.seq[source] = {source};
    std::vector<int> frontier{source};
    while (!frontier.empty()) {
        std::vector<int> next;
        for (int u : frontier) {
            const auto& adj = reversed ? g.in_edges(u) : g.out_edges(u);
            for (int ei : adj) {
                const Edge& e = g.edges()[ei];
                int v = g.node_index(reversed ? e.src : e.dst);
                if (std::find(lab.seq[u].begin(), lab.seq[u].end(), v) != lab.seq[u].end())
                    continue; // keep sequences simple
                double cand = lab.prod[u] * (1.0 - e.block);
                std::vector<int> cseq = lab.seq[u];
                cseq.push_back(v);
                bool better = cand > lab.prod[v] ||
                              (cand == lab.prod[v] && lex_smaller(g, cseq, lab.seq[v]));
                if (better) {
                    lab.prod[v] = cand;
                    lab.seq[v] = std::move(cseq);
                    next.push_back(v);
                }
            }
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        frontier = std::move(next);
    }
    return lab;
}

// Pick, per hop (u -> v), the edge with the largest survival factor; ties by
// edge id. Returns -1 when no edge joins the pair.
int best_hop_edge(const AttackGraph& g, int u, int v) {
    int pick = -1;
    for (int ei : g.out_edges(u)) {
        const Edge& e = g.edges()[ei];
        if (g.node_index(e.dst) != v) continue;
        if (pick < 0) {
            pick = ei;
            continue;
        }
        const Edge& cur = g.edges()[pick];
        if (e.block < cur.block || (e.block == cur.block && e.id < cur.id)) pick = ei;
    }
    return pick;
}

// Walk a node sequence, resolving each hop to its best-survival edge except
// the pinned one (the decomposition edge the value was scored through).
PathResult assemble(const AttackGraph& g, const std::vector<int>& node_seq,
                    std::size_t pinned_hop, int pinned_edge) {
    PathResult r;
    r.survival = 1.0;
    for (std::size_t i = 0; i < node_seq.size(); ++i) {
        r.node_sequence.push_back(g.nodes()[node_seq[i]].id);
        if (i + 1 < node_seq.size()) {
            int ei = (i == pinned_hop && pinned_edge >= 0)
                         ? pinned_edge
                         : best_hop_edge(g, node_seq[i], node_seq[i + 1]);
            const Edge& e = g.edges()[ei];
            r.edge_sequence.push_back(e.id);
            r.survival *= (1.0 - e.block);
            r.max_payoff = std::max(r.max_payoff, e.payoff);
        }
    }
    r.value = r.survival * r.max_payoff;
    return r;
}

} // namespace

PathResult critical_path(const AttackGraph& g) {
    PathResult empty;
    if (!g.has_endpoints()) return empty;
    auto fwd = lex_max_product(g, g.entry_index(), false);
    auto bwd = lex_max_product(g, g.objective_index(), true);

    double s = 0.0;
    bool any = false;
    std::vector<double> terms(g.edges().size(), -1.0);
    for (std::size_t i = 0; i < g.edges().size(); ++i) {
        const Edge& e = g.edges()[i];
        double f = fwd.prod[g.node_index(e.src)];
        double b = bwd.prod[g.node_index(e.dst)];
        if (f < 0.0 || b < 0.0) continue;
        any = true;
        terms[i] = ((e.payoff * f) * (1.0 - e.block)) * b;
        if (terms[i] > s) s = terms[i];
    }
    if (!any) return empty;

    std::vector<int> best_seq;
    std::size_t best_hop = 0;
    int best_edge = -1;
    for (std::size_t i = 0; i < g.edges().size(); ++i) {
        if (terms[i] != s) continue;
        const Edge& e = g.edges()[i];
        int si = g.node_index(e.src), di = g.node_index(e.dst);
        std::vector<int> seq = fwd.seq[si];
        std::size_t hop = seq.size() - 1;
        const auto& tail = bwd.seq[di]; // runs objective -> dst
        for (auto it = tail.rbegin(); it != tail.rend(); ++it) seq.push_back(*it);
        if (best_edge < 0 || lex_smaller(g, seq, best_seq)) {
            best_seq = std::move(seq);
            best_hop = hop;
            best_edge = static_cast<int>(i);
        }
    }
    return assemble(g, best_seq, best_hop, best_edge);
}

PathResult path_value(const AttackGraph& g, const std::vector<std::string>& node_seq) {
    if (node_seq.size() < 2) throw ParamError("path needs at least two nodes");
    std::vector<int> idx;
    for (const auto& id : node_seq) {
        int i = g.node_index(id);
        if (i < 0) throw ParamError("unknown node '" + id + "'");
        idx.push_back(i);
    }
    for (std::size_t i = 0; i + 1 < idx.size(); ++i)
        if (best_hop_edge(g, idx[i], idx[i + 1]) < 0)
            throw ParamError("no edge " + node_seq[i] + " -> " + node_seq[i + 1]);
    return assemble(g, idx, idx.size(), -1);
}

std::vector<BottleneckEntry> bottleneck_edges(const AttackGraph& g, std::size_t k,
                                              double forced_block) {
    double s = game_value(g);
    AttackGraph work = g;
    std::vector<BottleneckEntry> scores;
    scores.reserve(g.edges().size());
    for (std::size_t i = 0; i < g.edges().size(); ++i) {
        double saved = work.edges_mut()[i].block;
        work.edges_mut()[i].block = forced_block;
        scores.push_back({g.edges()[i].id, s - game_value(work)});
        work.edges_mut()[i].block = saved;
    }
    std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.edge_id < b.edge_id;
    });
    if (scores.size() > k) scores.resize(k);
    return scores;
}

} // namespace edrloop
