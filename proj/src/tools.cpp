#include "edrloop/tools.hpp"

#include <algorithm>
#include <queue>

#include <nlohmann/json.hpp>

#include "edrloop/errors.hpp"

namespace edrloop {

using nlohmann::json;

const char* role_name(Role r) { return r == Role::Defender ? "defender" : "adversary"; }

namespace {

bool topo_order(const AttackGraph& g, std::vector<int>& order) {
    int n = static_cast<int>(g.nodes().size());
    std::vector<int> indeg(n, 0);
    for (const auto& e : g.edges()) ++indeg[g.node_index(e.dst)];
    std::queue<int> q;
    for (int i = 0; i < n; ++i)
        if (indeg[i] == 0) q.push(i);
    order.clear();
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        order.push_back(u);
        for (int ei : g.out_edges(u)) {
            int v = g.node_index(g.edges()[ei].dst);
            if (--indeg[v] == 0) q.push(v);
        }
    }
    return static_cast<int>(order.size()) == n;
}

void weak_dfs(const AttackGraph& g, int u, int obj, int hops_left, double prod,
              std::vector<char>& on_path, std::vector<int>& edges, WeakPath& best) {
    if (u == obj) {
        if (!best.found || prod > best.survival) {
            best.found = true;
            best.survival = prod;
            best.hops = static_cast<int>(edges.size());
            best.edge_sequence.clear();
            for (int ei : edges) best.edge_sequence.push_back(g.edges()[ei].id);
        }
        return;
    }
    if (hops_left == 0) return;
    if (best.found && prod <= best.survival) return; // survival only shrinks
    for (int ei : g.out_edges(u)) {
        const Edge& e = g.edges()[ei];
        int v = g.node_index(e.dst);
        if (on_path[v]) continue;
        on_path[v] = 1;
        edges.push_back(ei);
        weak_dfs(g, v, obj, hops_left - 1, prod * (1.0 - e.block), on_path, edges, best);
        edges.pop_back();
        on_path[v] = 0;
    }
}

} // namespace

WeakPath find_weakest_path(const AttackGraph& g, int max_hops) {
    if (max_hops < 1) throw ParamError("max_hops must be >= 1");
    WeakPath best;
    if (!g.has_endpoints()) return best;
    int n = static_cast<int>(g.nodes().size());
    int entry = g.entry_index(), obj = g.objective_index();

    std::vector<int> order;
    if (topo_order(g, order)) {
        int h_cap = std::min(max_hops, n - 1);
        // best survival to each node using at most h edges
        std::vector<std::vector<double>> dp(h_cap + 1, std::vector<double>(n, -1.0));
        std::vector<std::vector<int>> parent(h_cap + 1, std::vector<int>(n, -1));
        dp[0][entry] = 1.0;
        for (int h = 1; h <= h_cap; ++h) {
            dp[h] = dp[h - 1];
            for (std::size_t ei = 0; ei < g.edges().size(); ++ei) {
                const Edge& e = g.edges()[ei];
                int u = g.node_index(e.src), v = g.node_index(e.dst);
                if (dp[h - 1][u] < 0.0) continue;
                double cand = dp[h - 1][u] * (1.0 - e.block);
                if (cand > dp[h][v]) {
                    dp[h][v] = cand;
                    parent[h][v] = static_cast<int>(ei);
                }
            }
        }
        if (dp[h_cap][obj] < 0.0) return best;
        int h = h_cap;
        while (h > 0 && dp[h - 1][obj] == dp[h_cap][obj]) --h; // fewest hops for the value
        best.found = true;
        best.survival = dp[h_cap][obj];
        std::vector<int> chain;
        int v = obj;
        while (v != entry) {
            while (parent[h][v] < 0) --h;
            int ei = parent[h][v];
            chain.push_back(ei);
            v = g.node_index(g.edges()[ei].src);
            --h;
        }
        std::reverse(chain.begin(), chain.end());
        for (int ei : chain) best.edge_sequence.push_back(g.edges()[ei].id);
        best.hops = static_cast<int>(chain.size());
    } else {
        if (max_hops > 24) {
            throw ParamError("max_hops above the search bound for cyclic graphs (24)");
        }
        std::vector<char> on_path(n, 0);
        on_path[entry] = 1;
        std::vector<int> edges;
        weak_dfs(g, entry, obj, max_hops, 1.0, on_path, edges, best);
    }
    if (best.found) {
        best.node_sequence.push_back(g.nodes()[entry].id);
        for (const auto& eid : best.edge_sequence) {
            best.node_sequence.push_back(g.find_edge(eid)->dst);
        }
    }
    return best;
}

namespace {

struct ToolError {
    std::string code;
    std::string message;
};

std::string p_str(const json& p, const char* key) {
    if (!p.contains(key) || !p.at(key).is_string()) {
        throw ToolError{"BAD_PARAMS", std::string("missing string param '") + key + "'"};
    }
    return p.at(key).get<std::string>();
}

std::string p_str_opt(const json& p, const char* key, const std::string& fallback) {
    if (!p.contains(key)) return fallback;
    if (!p.at(key).is_string()) {
        throw ToolError{"BAD_PARAMS", std::string("param '") + key + "' must be a string"};
    }
    return p.at(key).get<std::string>();
}

int p_int_opt(const json& p, const char* key, int fallback) {
    if (!p.contains(key)) return fallback;
    if (!p.at(key).is_number_integer()) {
        throw ToolError{"BAD_PARAMS", std::string("param '") + key + "' must be an integer"};
    }
    return p.at(key).get<int>();
}

json path_to_json(const PathResult& p) {
    return json{{"node_sequence", p.node_sequence},
                {"edge_sequence", p.edge_sequence},
                {"survival", p.survival},
                {"max_payoff", p.max_payoff},
                {"value", p.value}};
}

json parse_embedded(const std::string& text) { return json::parse(text); }

PolicyMode mode_param(const json& params) {
    std::string m = p_str_opt(params, "mode", "block");
    try {
        return policy_mode_from_name(m);
    } catch (const SchemaError&) {
        throw ToolError{"BAD_PARAMS", "mode must be 'block' or 'detect'"};
    }
}

json deployed_to_json(const DeployedSet& dep) {
    json arr = json::array();
    for (const auto& [policy, mode] : dep.items) {
        arr.push_back(json{{"policy", policy},
                           {"mode", policy_mode_name(static_cast<PolicyMode>(mode))}});
    }
    return arr;
}

json ok_resp(const json& id, json result) {
    return json{{"id", id}, {"ok", true}, {"result", std::move(result)}};
}

json err_resp(const json& id, const std::string& code, const std::string& message) {
    return json{{"id", id}, {"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

const char* const kDefenderTools[] = {
    "deploy_policy",   "end_turn",        "get_belief_graph", "get_bottlenecks",
    "get_critical_path", "get_game_value", "get_observer_stats", "list_deployed",
    "list_policies",   "simulate_deployment", "simulate_round_ahead", "status",
};

const char* const kAdversaryTools[] = {
    "best_response",  "end_turn",          "evaluate_edge",       "find_weakest_path",
    "get_critical_path", "get_deployed_policies", "get_game_value", "get_survival_map",
    "get_technique_coverage", "get_truth_graph", "list_blocked_techniques",
    "list_techniques", "pass",             "propose_edge",        "status",
};

} // namespace

ToolSession::ToolSession(LoopState state, Role role) : st_(std::move(state)), role_(role) {
    if (role_ == Role::Adversary && st_.cfg.mode != LoopMode::DefenderPlusAttacker) {
        throw ParamError("adversary sessions require defender_plus_attacker mode");
    }
}

std::vector<std::string> ToolSession::tool_names() const {
    std::vector<std::string> names;
    if (role_ == Role::Defender) {
        for (const char* n : kDefenderTools) names.push_back(n);
    } else {
        for (const char* n : kAdversaryTools) names.push_back(n);
    }
    return names;
}

std::string ToolSession::handshake_line() const {
    json j{{"protocol", "edrloop-tools/1"},
           {"role", role_name(role_)},
           {"mode", loop_mode_name(st_.cfg.mode)},
           {"tools", tool_names()}};
    return j.dump();
}

namespace {

// Shared validation for evaluate_edge/propose_edge. Never mutates state.
AdversaryProposal validated_proposal(const LoopState& st, const json& params) {
    std::string tech = p_str(params, "technique");
    std::string src = p_str(params, "src");
    std::string dst = p_str(params, "dst");
    const Technique* t = st.cat.find_technique(tech);
    if (t == nullptr) throw ToolError{"OFF_CATALOG", "unknown technique '" + tech + "'"};
    const Node* u = st.truth.find_node(src);
    if (u == nullptr) throw ToolError{"BAD_PARAMS", "unknown node '" + src + "'"};
    const Node* v = st.truth.find_node(dst);
    if (v == nullptr) throw ToolError{"BAD_PARAMS", "unknown node '" + dst + "'"};
    if (u->id == v->id) throw ToolError{"BYPASS", "self-loops are not admissible"};
    if (u->stage == Stage::Entry && v->stage == Stage::Objective) {
        throw ToolError{"BYPASS", "direct ENTRY->OBJECTIVE edges are not admissible"};
    }
    if (!st.cat.technique_allows(*t, u->stage, v->stage)) {
        throw ToolError{"BYPASS", std::string("technique does not admit ") +
                                      stage_name(u->stage) + "->" + stage_name(v->stage)};
    }
    AdversaryProposal p;
    p.pass = false;
    p.technique = tech;
    p.src = src;
    p.dst = dst;
    p.inherited_block = anticipatory_block(st.cat, st.deployed, tech, st.cfg.block_cap);
    p.s_before = game_value(st.truth);
    std::vector<double> f = survivals_from_entry(st.truth);
    std::vector<double> b = survivals_to_objective(st.truth);
    double fu = f[st.truth.node_index(src)];
    double bv = b[st.truth.node_index(dst)];
    double term = (fu <= 0.0 || bv <= 0.0)
                      ? 0.0
                      : ((t->payoff * fu) * (1.0 - p.inherited_block)) * bv;
    p.s_after = std::max(p.s_before, term);
    return p;
}

void require_running(const LoopState& st) {
    if (st.done) throw ToolError{"BAD_PARAMS", "loop already stopped: " + st.stop_code};
}

} // namespace

std::string ToolSession::handle_line(const std::string& line) {
    json req;
    try {
        req = json::parse(line);
    } catch (const json::exception&) {
        return err_resp(nullptr, "BAD_PARAMS", "request is not valid JSON").dump();
    }
    if (!req.is_object()) {
        return err_resp(nullptr, "BAD_PARAMS", "request must be an object").dump();
    }
    json id = req.contains("id") ? req.at("id") : json(nullptr);
    if (!req.contains("tool") || !req.at("tool").is_string()) {
        return err_resp(id, "BAD_PARAMS", "missing tool name").dump();
    }
    std::string tool = req.at("tool").get<std::string>();
    json params = req.contains("params") ? req.at("params") : json::object();
    if (!params.is_object()) {
        return err_resp(id, "BAD_PARAMS", "params must be an object").dump();
    }

    try {
        const LoopState& st = st_;
        const AttackGraph& truth = st.truth;
        const BeliefGraph& belief = st.belief;
        json result;

        if (tool == "status") {
            result = json{{"role", role_name(role_)},
                          {"mode", loop_mode_name(st.cfg.mode)},
                          {"round", st.round},
                          {"max_rounds", st.cfg.max_rounds},
                          {"done", st.done},
                          {"stop_code", st.stop_code}};
            if (role_ == Role::Defender) {
                json staged = json::array();
                for (const auto& a : staged_) {
                    staged.push_back(
                        json{{"policy", a.policy}, {"mode", policy_mode_name(a.mode)}});
                }
                result["budget"] = st.cfg.budget;
                result["staged"] = staged;
                result["edges_known"] = belief.filters.size();
                result["edges_dark"] = truth.edges().size() - belief.filters.size();
            } else {
                result["move_staged"] =
                    !staged_move_ ? "none" : (staged_move_->pass ? "pass" : "edge");
                result["edges_truth"] = truth.edges().size();
            }
            return ok_resp(id, result).dump();
        }

        if (role_ == Role::Defender) {
            if (tool == "get_belief_graph") {
                result = json{{"graph", parse_embedded(belief.to_json_text())}};
            } else if (tool == "get_game_value") {
                result = json{{"s_belief", game_value(belief.graph)}};
            } else if (tool == "get_critical_path") {
                result = path_to_json(critical_path(belief.graph));
            } else if (tool == "get_bottlenecks") {
                int k = p_int_opt(params, "k", 5);
                if (k < 1) throw ToolError{"BAD_PARAMS", "k must be >= 1"};
                json arr = json::array();
                for (const auto& b : bottleneck_edges(belief.graph, k)) {
                    arr.push_back(json{{"edge_id", b.edge_id}, {"score", b.score}});
                }
                result = json{{"bottlenecks", arr}};
            } else if (tool == "list_policies") {
                result = json{{"policies", parse_embedded(st.cat.to_json_text()).at("policies")}};
            } else if (tool == "list_deployed") {
                result = json{{"deployed", deployed_to_json(st.deployed)}};
            } else if (tool == "simulate_deployment") {
                std::string policy = p_str(params, "policy");
                PolicyMode mode = mode_param(params);
                if (st.cat.find_policy(policy) == nullptr) {
                    throw ToolError{"OFF_CATALOG", "unknown policy '" + policy + "'"};
                }
                AttackGraph clone = belief.graph;
                double s_before = game_value(clone);
                apply_policy_to_edges(clone, policy, mode, st.cfg.block_cap);
                double s_after = game_value(clone);
                result = json{{"s_before", s_before},
                              {"s_after", s_after},
                              {"drop", s_before - s_after}};
            } else if (tool == "simulate_round_ahead") {
                AttackGraph clone = belief.graph;
                DeployedSet dep = st.deployed;
                double s_now = game_value(clone);
                for (const auto& a : staged_) {
                    if (!dep.has(a.policy, a.mode)) {
                        apply_policy_to_edges(clone, a.policy, a.mode, st.cfg.block_cap);
                        dep.add(a.policy, a.mode);
                    }
                }
                double s_projected = game_value(clone);
                BeliefGraph shadow;
                shadow.graph = clone;
                int left = st.cfg.budget - static_cast<int>(staged_.size());
                json suggested = json::array();
                if (left > 0) {
                    for (const auto& a : greedy_controller(shadow, st.cat, dep, left,
                                                           st.cfg.eps_v, st.cfg.block_cap)) {
                        suggested.push_back(
                            json{{"policy", a.policy}, {"mode", policy_mode_name(a.mode)}});
                    }
                }
                double th = theta(belief);
                result = json{{"s_now", s_now},
                              {"s_projected", s_projected},
                              {"theta", th},
                              {"v_projected", s_projected + st.cfg.lambda * th},
                              {"suggested", suggested}};
            } else if (tool == "get_observer_stats") {
                result = json{{"theta", theta(belief)},
                              {"mean_innovation", mean_innovation(belief)},
                              {"edges_known", belief.filters.size()},
                              {"edges_dark", truth.edges().size() - belief.filters.size()}};
            } else if (tool == "deploy_policy") {
                require_running(st);
                std::string policy = p_str(params, "policy");
                PolicyMode mode = mode_param(params);
                if (st.cat.find_policy(policy) == nullptr) {
                    throw ToolError{"OFF_CATALOG", "unknown policy '" + policy + "'"};
                }
                if (static_cast<int>(staged_.size()) >= st.cfg.budget) {
                    throw ToolError{"BUDGET", "turn budget exhausted (" +
                                                  std::to_string(st.cfg.budget) + ")"};
                }
                staged_.push_back({policy, mode});
                result = json{{"staged", staged_.size()},
                              {"budget_left",
                               st.cfg.budget - static_cast<int>(staged_.size())}};
            } else if (tool == "end_turn") {
                require_running(st);
                RoundRecord rec = run_round(st_, staged_);
                staged_.clear();
                result = json{{"record", parse_embedded(rec.to_json_text())},
                              {"done", st_.done},
                              {"stop_code", st_.stop_code}};
            } else {
                throw ToolError{"UNKNOWN_TOOL", "no tool '" + tool + "' for role defender"};
            }
            return ok_resp(id, result).dump();
        }

        // adversary role
        if (tool == "get_truth_graph") {
            result = json{{"graph", parse_embedded(truth.to_json_text())}};
        } else if (tool == "get_game_value") {
            result = json{{"s_truth", game_value(truth)}};
        } else if (tool == "get_critical_path") {
            result = path_to_json(critical_path(truth));
        } else if (tool == "get_survival_map") {
            std::vector<double> f = survivals_from_entry(truth);
            std::vector<double> b = survivals_to_objective(truth);
            json arr = json::array();
            for (const auto& n : truth.nodes()) {
                int i = truth.node_index(n.id);
                json row{{"id", n.id}, {"stage", stage_name(n.stage)}};
                row["from_entry"] = f[i] < 0.0 ? json(nullptr) : json(f[i]);
                row["to_objective"] = b[i] < 0.0 ? json(nullptr) : json(b[i]);
                arr.push_back(row);
            }
            result = json{{"nodes", arr}};
        } else if (tool == "list_techniques") {
            result = json{{"techniques", parse_embedded(st.cat.to_json_text()).at("techniques")}};
        } else if (tool == "list_blocked_techniques") {
            json arr = json::array();
            for (const auto& t : st.cat.techniques) {
                double beta = anticipatory_block(st.cat, st.deployed, t.id, st.cfg.block_cap);
                if (beta <= 0.0) continue;
                arr.push_back(json{{"technique", t.id},
                                   {"anticipated_block", beta},
                                   {"blocked_outright", beta >= st.cfg.block_cap}});
            }
            result = json{{"blocked", arr}};
        } else if (tool == "get_technique_coverage") {
            std::string tech = p_str(params, "technique");
            const Technique* t = st.cat.find_technique(tech);
            if (t == nullptr) throw ToolError{"OFF_CATALOG", "unknown technique '" + tech + "'"};
            json arr = json::array();
            for (const Policy* p : st.cat.policies_covering(tech)) {
                arr.push_back(json{{"policy", p->id},
                                   {"mode", policy_mode_name(p->mode)},
                                   {"effectiveness", p->effectiveness},
                                   {"deployed_block", st.deployed.has(p->id, PolicyMode::Block)},
                                   {"deployed_detect",
                                    st.deployed.has(p->id, PolicyMode::Detect)}});
            }
            result = json{{"technique", tech},
                          {"covering_policies", arr},
                          {"anticipated_block",
                           anticipatory_block(st.cat, st.deployed, tech, st.cfg.block_cap)},
                          {"anticipated_detect",
                           anticipatory_detect(st.cat, st.deployed, tech, 0.1)}};
        } else if (tool == "evaluate_edge") {
            AdversaryProposal p = validated_proposal(st, params);
            result = json{{"technique", p.technique},
                          {"src", p.src},
                          {"dst", p.dst},
                          {"inherited_block", p.inherited_block},
                          {"s_before", p.s_before},
                          {"s_after", p.s_after},
                          {"improvement", p.s_after - p.s_before}};
        } else if (tool == "best_response") {
            AdversaryProposal p = adversary_oracle(truth, st.cat, st.deployed, st.cfg.eps_v,
                                                   st.cfg.block_cap);
            result = json{{"pass", p.pass}};
            if (!p.pass) {
                result["technique"] = p.technique;
                result["src"] = p.src;
                result["dst"] = p.dst;
                result["inherited_block"] = p.inherited_block;
                result["improvement"] = p.s_after - p.s_before;
            }
        } else if (tool == "get_deployed_policies") {
            result = json{{"deployed", deployed_to_json(st.deployed)}};
        } else if (tool == "find_weakest_path") {
            int fallback = std::min(static_cast<int>(truth.nodes().size()) - 1, 64);
            int max_hops = p_int_opt(params, "max_hops", fallback);
            if (max_hops < 1) throw ToolError{"BAD_PARAMS", "max_hops must be >= 1"};
            WeakPath wp = find_weakest_path(truth, max_hops);
            if (!wp.found) {
                result = json{{"found", false}};
            } else {
                result = json{{"found", true},
                              {"node_sequence", wp.node_sequence},
                              {"edge_sequence", wp.edge_sequence},
                              {"survival", wp.survival},
                              {"hops", wp.hops}};
            }
        } else if (tool == "propose_edge") {
            require_running(st);
            if (staged_move_) throw ToolError{"BUDGET", "one move per turn already staged"};
            AdversaryProposal p = validated_proposal(st, params);
            staged_move_ = p;
            result = json{{"staged", "edge"},
                          {"improvement", p.s_after - p.s_before},
                          {"inherited_block", p.inherited_block}};
        } else if (tool == "pass") {
            require_running(st);
            if (staged_move_) throw ToolError{"BUDGET", "one move per turn already staged"};
            AdversaryProposal p;
            p.pass = true;
            staged_move_ = p;
            result = json{{"staged", "pass"}};
        } else if (tool == "end_turn") {
            require_running(st);
            std::vector<DefenderAction> actions = greedy_controller(
                st.belief, st.cat, st.deployed, st.cfg.budget, st.cfg.eps_v, st.cfg.block_cap);
            AdversaryProposal move;
            move.pass = true;
            if (staged_move_) move = *staged_move_;
            RoundRecord rec = run_round(st_, actions, &move);
            staged_move_.reset();
            result = json{{"record", parse_embedded(rec.to_json_text())},
                          {"done", st_.done},
                          {"stop_code", st_.stop_code}};
        } else {
            throw ToolError{"UNKNOWN_TOOL", "no tool '" + tool + "' for role adversary"};
        }
        return ok_resp(id, result).dump();
    } catch (const ToolError& e) {
        return err_resp(id, e.code, e.message).dump();
    } catch (const SchemaError& e) {
        return err_resp(id, "BAD_PARAMS", e.what()).dump();
    } catch (const ParamError& e) {
        return err_resp(id, "BAD_PARAMS", e.what()).dump();
    } catch (const std::exception& e) {
        return err_resp(id, "BAD_PARAMS", e.what()).dump();
    }
}

} // namespace edrloop
