#include "edrloop/game.hpp"

#include <algorithm>

namespace edrloop {

const char* actuation_outcome_name(ActuationOutcome o) {
    switch (o) {
    case ActuationOutcome::Applied: return "APPLIED";
    case ActuationOutcome::RejectedOffCatalog: return "REJECTED_OFF_CATALOG";
    case ActuationOutcome::RejectedBudget: return "REJECTED_BUDGET";
    }
    return "UNKNOWN";
}

int apply_policy_to_edges(AttackGraph& g, const std::string& policy, PolicyMode mode,
                          double block_cap) {
    int touched = 0;
    for (auto& e : g.edges_mut()) {
        auto it = e.policy_effectiveness.find(policy);
        if (it == e.policy_effectiveness.end()) continue;
        double eff = it->second;
        if (mode == PolicyMode::Block) {
            e.block = std::min(block_cap, e.block + eff);
        } else {
            e.detect = std::min(1.0, e.detect + eff);
        }
        ++touched;
    }
    return touched;
}

Deployment actuate_defender(AttackGraph& truth, BeliefGraph& belief, const Catalogs& cat,
                            DeployedSet& deployed, int& budget_left,
                            const DefenderAction& action, double block_cap) {
    Deployment d;
    d.policy = action.policy;
    d.mode = action.mode;
    if (cat.find_policy(action.policy) == nullptr) {
        d.outcome = ActuationOutcome::RejectedOffCatalog;
        return d;
    }
    if (budget_left <= 0) {
        d.outcome = ActuationOutcome::RejectedBudget;
        return d;
    }
    d.outcome = ActuationOutcome::Applied;
    --budget_left;
    if (!deployed.has(action.policy, action.mode)) {
        deployed.add(action.policy, action.mode);
        d.edges_touched = apply_policy_to_edges(truth, action.policy, action.mode, block_cap);
        apply_policy_to_edges(belief.graph, action.policy, action.mode, block_cap);
    }
    return d;
}

double anticipatory_block(const Catalogs& cat, const DeployedSet& deployed,
                          const std::string& technique, double block_cap) {
    double sum = 0.0;
    for (const auto& p : cat.policies) {
        if (p.mode != PolicyMode::Block) continue;
        if (!deployed.has(p.id, PolicyMode::Block)) continue;
        if (!p.covers(technique)) continue;
        sum += p.effectiveness;
    }
    return std::min(block_cap, sum);
}

double anticipatory_detect(const Catalogs& cat, const DeployedSet& deployed,
                           const std::string& technique, double base_detect) {
    double sum = base_detect;
    for (const auto& p : cat.policies) {
        if (p.mode != PolicyMode::Detect) continue;
        if (!deployed.has(p.id, PolicyMode::Detect)) continue;
        if (!p.covers(technique)) continue;
        sum += p.effectiveness;
    }
    return std::min(1.0, sum);
}

std::vector<DefenderAction> greedy_controller(const BeliefGraph& belief, const Catalogs& cat,
                                              const DeployedSet& deployed, int budget,
                                              double eps_v, double block_cap) {
    std::vector<DefenderAction> picks;
    if (budget <= 0) return picks;

    AttackGraph working = belief.graph;
    DeployedSet local = deployed;
    double s_cur = game_value(working);

    std::vector<std::pair<Edge*, double>> saved;
    auto trial_apply = [&](const std::string& policy) {
        saved.clear();
        for (auto& e : working.edges_mut()) {
            auto it = e.policy_effectiveness.find(policy);
            if (it == e.policy_effectiveness.end()) continue;
            saved.emplace_back(&e, e.block);
            e.block = std::min(block_cap, e.block + it->second);
        }
    };
    auto trial_undo = [&] {
        for (auto& [e, old] : saved) e->block = old;
    };

    for (int slot = 0; slot < budget; ++slot) {
        const Policy* best = nullptr;
        double best_drop = 0.0;
        double best_s = s_cur;
        for (const auto& p : cat.policies) {
            if (p.mode != PolicyMode::Block) continue;
            if (local.has(p.id, PolicyMode::Block)) continue;
            trial_apply(p.id);
            double s_new = game_value(working);
            trial_undo();
            double drop = s_cur - s_new;
            if (drop > best_drop) { // strict: ties keep catalog order
                best_drop = drop;
                best = &p;
                best_s = s_new;
            }
        }
        if (best == nullptr || best_drop < eps_v) break;
        apply_policy_to_edges(working, best->id, PolicyMode::Block, block_cap);
        local.add(best->id, PolicyMode::Block);
        picks.push_back({best->id, PolicyMode::Block});
        s_cur = best_s;
    }
    return picks;
}

AdversaryProposal adversary_oracle(const AttackGraph& truth, const Catalogs& cat,
                                   const DeployedSet& deployed, double eps_v,
                                   double block_cap, double base_detect) {
    (void)base_detect;
    AdversaryProposal best;
    best.s_before = game_value(truth);
    best.s_after = best.s_before;

    std::vector<double> f = survivals_from_entry(truth);
    std::vector<double> b = survivals_to_objective(truth);

    struct Cand {
        const Node* n;
        double f;
        double b;
    };
    std::vector<Cand> nodes;
    nodes.reserve(truth.nodes().size());
    for (const auto& n : truth.nodes()) {
        int i = truth.node_index(n.id);
        nodes.push_back({&n, f[i], b[i]});
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const Cand& x, const Cand& y) { return x.n->id < y.n->id; });
    double max_f = 0.0, max_b = 0.0;
    for (const auto& c : nodes) {
        max_f = std::max(max_f, c.f);
        max_b = std::max(max_b, c.b);
    }

    std::vector<const Technique*> techs;
    techs.reserve(cat.techniques.size());
    for (const auto& t : cat.techniques) techs.push_back(&t);
    std::sort(techs.begin(), techs.end(),
              [](const Technique* x, const Technique* y) { return x->id < y->id; });

    // The candidate edge's own term is its exact resulting game value here:
    // candidate payoffs dominate every in-graph payoff, so routing other
    // edges' paths through the new edge can never beat the new edge's term.
    // Iteration is ascending (technique, src, dst); strict > keeps the first,
    // which also makes the upper-bound skips below order-safe.
    for (const Technique* t : techs) {
        double beta = anticipatory_block(cat, deployed, t->id, block_cap);
        double coef = t->payoff * (1.0 - beta);
        if (coef * max_f * max_b <= best.s_after) continue;
        unsigned mask = 0;
        for (const auto& tr : t->transitions) {
            mask |= 1u << (static_cast<unsigned>(tr.first) * 4 +
                           static_cast<unsigned>(tr.second));
        }
        for (const Cand& u : nodes) {
            if (u.f <= 0.0) continue;
            double cu = coef * u.f;
            if (cu * max_b <= best.s_after) continue;
            unsigned su = static_cast<unsigned>(u.n->stage);
            for (const Cand& v : nodes) {
                if (u.n == v.n || v.b <= 0.0) continue;
                if (u.n->stage == Stage::Entry && v.n->stage == Stage::Objective) continue;
                if ((mask & (1u << (su * 4 + static_cast<unsigned>(v.n->stage)))) == 0) continue;
                double term = cu * v.b;
                if (term > best.s_after) {
                    best.s_after = term;
                    best.technique = t->id;
                    best.src = u.n->id;
                    best.dst = v.n->id;
                    best.inherited_block = beta;
                }
            }
        }
    }

    best.pass = !(best.s_after - best.s_before > eps_v);
    if (best.pass) {
        best.technique.clear();
        best.src.clear();
        best.dst.clear();
        best.inherited_block = 0.0;
        best.s_after = best.s_before;
    }
    return best;
}

Edge make_adversary_edge(const std::string& id, const AdversaryProposal& p,
                         const Catalogs& cat, const DeployedSet& deployed,
                         double block_cap, double base_detect) {
    const Technique* t = cat.find_technique(p.technique);
    Edge e;
    e.id = id;
    e.src = p.src;
    e.dst = p.dst;
    e.technique = p.technique;
    e.payoff = t != nullptr ? t->payoff : 0.0;
    e.block = p.inherited_block;
    e.detect = anticipatory_detect(cat, deployed, p.technique, base_detect);
    for (const auto& pol : cat.policies) {
        if (pol.covers(p.technique)) {
            e.policy_effectiveness[pol.id] = pol.effectiveness;
        }
    }
    (void)block_cap;
    return e;
}

SseResult sse_check(const AttackGraph& truth, const BeliefGraph& belief, const Catalogs& cat,
                    const DeployedSet& deployed, int budget, double eps_v, double block_cap) {
    SseResult r;
    r.defender_static =
        greedy_controller(belief, cat, deployed, budget, eps_v, block_cap).empty();
    r.adversary_pass = adversary_oracle(truth, cat, deployed, eps_v, block_cap).pass;
    r.equilibrium = r.defender_static && r.adversary_pass;
    return r;
}

} // namespace edrloop
