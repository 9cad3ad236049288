#include "edrloop/observer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace edrloop {

using nlohmann::json;

KalmanResult kalman_update(double estimate, double p, double z, double r) {
    if (!(r > 0.0)) throw ParamError("measurement noise R must be positive");
    if (p < 0.0) throw ParamError("negative posterior");
    KalmanResult out;
    // K = P/(P+R), evaluated through the complement so that the reference
    // inputs (0.15, 0.05) land on the exact doubles 0.75 and 0.0375.
    double miss = r / (p + r);
    out.gain = 1.0 - miss;
    out.estimate = estimate + out.gain * (z - estimate);
    out.posterior = miss * p;
    return out;
}

double innovation(const Edge& believed, const FilterState& f, const TruthReveal& z) {
    double dd = std::fabs(z.detect - believed.detect);
    double db = std::fabs(z.block - believed.block);
    double dt = (f.traversed == z.traversed) ? 0.0 : 1.0;
    return (1.0 - f.P) * ((dd + db + dt) / 3.0);
}

double measure_edge(BeliefGraph& b, const std::string& edge_id, const TruthReveal& z, double r) {
    if (!(r > 0.0)) throw ParamError("measurement noise R must be positive");
    auto it = b.filters.find(edge_id);
    if (it == b.filters.end()) throw ParamError("edge '" + edge_id + "' not in belief");
    Edge* e = b.graph.find_edge_mut(edge_id);
    FilterState& f = it->second;
    // Prediction error is scored against the pre-update belief; the blend
    // below then folds the measurement in.
    f.last_innovation = innovation(*e, f, z);
    double miss = r / (f.P + r);
    double gain = 1.0 - miss;
    e->block += gain * (z.block - e->block);
    e->detect += gain * (z.detect - e->detect);
    f.traversed = z.traversed;
    f.P = miss * f.P;
    return gain;
}

void reveal_edge(BeliefGraph& b, const Edge& truth_edge, bool traversed, double p_dark) {
    if (b.contains(truth_edge.id))
        throw ParamError("edge '" + truth_edge.id + "' already in belief");
    b.graph.add_edge(truth_edge);
    FilterState f;
    f.P = p_dark;
    f.traversed = traversed;
    f.last_innovation = 0.0;
    b.filters[truth_edge.id] = f;
}

double theta(const BeliefGraph& b) {
    if (b.filters.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [id, f] : b.filters) sum += f.P;
    return sum / static_cast<double>(b.filters.size());
}

double mean_innovation(const BeliefGraph& b) {
    if (b.filters.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [id, f] : b.filters) sum += f.last_innovation;
    return sum / static_cast<double>(b.filters.size());
}

BeliefGraph init_belief(const AttackGraph& truth, double coverage, double p_alerted,
                        Rng& rng, double noise) {
    BeliefGraph b;
    for (const auto& n : truth.nodes()) b.graph.add_node(n);
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    for (const auto& e : truth.edges()) {
        bool alerted = rng.bernoulli(coverage);
        // Noise draws are consumed for every edge so the stream position does
        // not depend on which edges happened to alert.
        double np = rng.uniform(-noise, noise);
        double nb = rng.uniform(-noise, noise);
        double nd = rng.uniform(-noise, noise);
        if (!alerted) continue;
        Edge be = e;
        be.payoff = clamp01(e.payoff + np);
        be.block = clamp01(e.block + nb);
        be.detect = clamp01(e.detect + nd);
        b.graph.add_edge(be);
        FilterState f;
        f.P = p_alerted;
        f.traversed = false;
        b.filters[be.id] = f;
    }
    return b;
}

std::string BeliefGraph::to_json_text(int indent) const {
    json j = json::parse(graph.to_json_text());
    for (auto& je : j["edges"]) {
        const FilterState& f = filters.at(je["id"].get<std::string>());
        je["P"] = f.P;
        je["last_innovation"] = f.last_innovation;
        je["traversed"] = f.traversed;
    }
    return j.dump(indent);
}

BeliefGraph BeliefGraph::from_json_text(const std::string& text) {
    BeliefGraph b;
    b.graph = AttackGraph::from_json_text(text);
    json j = json::parse(text);
    for (const auto& je : j["edges"]) {
        std::string id = je.value("id", "");
        FilterState f;
        f.P = je.value("P", 0.0);
        if (!(f.P > 0.0 && f.P <= 1.0))
            throw SchemaError("edges[" + id + "].P", "value outside (0,1]");
        f.last_innovation = je.value("last_innovation", 0.0);
        f.traversed = je.value("traversed", false);
        b.filters[id] = f;
    }
    return b;
}

} // namespace edrloop
