#include "edrloop/loop.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "edrloop/errors.hpp"

namespace edrloop {

using nlohmann::json;

const char* loop_mode_name(LoopMode m) {
    return m == LoopMode::DefenderOnly ? "defender_only" : "defender_plus_attacker";
}

LoopMode loop_mode_from_name(const std::string& name) {
    if (name == "defender_only") return LoopMode::DefenderOnly;
    if (name == "defender_plus_attacker") return LoopMode::DefenderPlusAttacker;
    throw SchemaError("mode", "unknown mode '" + name + "'");
}

LoopConfig LoopConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw SchemaError("config", ex.what());
    }
    if (!j.is_object()) throw SchemaError("config", "expected an object");
    LoopConfig c;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "budget") c.budget = val.get<int>();
            else if (key == "noise_r") c.noise_r = val.get<double>();
            else if (key == "eps_innov") c.eps_innov = val.get<double>();
            else if (key == "eps_v") c.eps_v = val.get<double>();
            else if (key == "max_rounds") c.max_rounds = val.get<int>();
            else if (key == "lambda") c.lambda = val.get<double>();
            else if (key == "seed") c.seed = val.get<std::uint64_t>();
            else if (key == "alert_coverage") c.alert_coverage = val.get<double>();
            else if (key == "p_alerted") c.p_alerted = val.get<double>();
            else if (key == "p_dark") c.p_dark = val.get<double>();
            else if (key == "block_cap") c.block_cap = val.get<double>();
            else if (key == "telemetry_rate") c.telemetry_rate = val.get<double>();
            else if (key == "mode") c.mode = loop_mode_from_name(val.get<std::string>());
            else throw SchemaError("config." + key, "unknown field");
        }
    } catch (const json::exception& ex) {
        throw SchemaError("config", ex.what());
    }
    if (c.budget < 0) throw SchemaError("config.budget", "must be >= 0");
    if (c.max_rounds < 1) throw SchemaError("config.max_rounds", "must be >= 1");
    if (!(c.noise_r > 0.0)) throw SchemaError("config.noise_r", "must be > 0");
    if (!(c.telemetry_rate >= 0.0 && c.telemetry_rate <= 1.0))
        throw SchemaError("config.telemetry_rate", "must be in [0,1]");
    if (!(c.alert_coverage >= 0.0 && c.alert_coverage <= 1.0))
        throw SchemaError("config.alert_coverage", "must be in [0,1]");
    if (!(c.p_alerted > 0.0 && c.p_alerted <= 1.0))
        throw SchemaError("config.p_alerted", "must be in (0,1]");
    if (!(c.p_dark > 0.0 && c.p_dark <= 1.0))
        throw SchemaError("config.p_dark", "must be in (0,1]");
    if (!(c.block_cap >= 0.0 && c.block_cap <= 1.0))
        throw SchemaError("config.block_cap", "must be in [0,1]");
    return c;
}

std::string LoopConfig::to_json_text(int indent) const {
    json j{{"budget", budget},
           {"noise_r", noise_r},
           {"eps_innov", eps_innov},
           {"eps_v", eps_v},
           {"max_rounds", max_rounds},
           {"lambda", lambda},
           {"seed", seed},
           {"alert_coverage", alert_coverage},
           {"p_alerted", p_alerted},
           {"p_dark", p_dark},
           {"block_cap", block_cap},
           {"telemetry_rate", telemetry_rate},
           {"mode", loop_mode_name(mode)}};
    return indent < 0 ? j.dump() : j.dump(indent);
}

namespace {

const char* env_get(const char* name) { return std::getenv(name); }

template <typename F>
void override_if_set(const char* name, F&& apply) {
    const char* raw = env_get(name);
    if (raw == nullptr || *raw == '\0') return;
    try {
        apply(std::string(raw));
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception&) {
        throw ParamError(std::string(name) + ": unparseable value '" + raw + "'");
    }
}

} // namespace

void apply_env_overrides(LoopConfig& cfg) {
    override_if_set("EDRLOOP_BUDGET", [&](const std::string& s) { cfg.budget = std::stoi(s); });
    override_if_set("EDRLOOP_NOISE_R", [&](const std::string& s) { cfg.noise_r = std::stod(s); });
    override_if_set("EDRLOOP_EPS_INNOV",
                    [&](const std::string& s) { cfg.eps_innov = std::stod(s); });
    override_if_set("EDRLOOP_EPS_V", [&](const std::string& s) { cfg.eps_v = std::stod(s); });
    override_if_set("EDRLOOP_MAX_ROUNDS",
                    [&](const std::string& s) { cfg.max_rounds = std::stoi(s); });
    override_if_set("EDRLOOP_LAMBDA", [&](const std::string& s) { cfg.lambda = std::stod(s); });
    override_if_set("EDRLOOP_SEED", [&](const std::string& s) { cfg.seed = std::stoull(s); });
    override_if_set("EDRLOOP_ALERT_COVERAGE",
                    [&](const std::string& s) { cfg.alert_coverage = std::stod(s); });
    override_if_set("EDRLOOP_P_ALERTED",
                    [&](const std::string& s) { cfg.p_alerted = std::stod(s); });
    override_if_set("EDRLOOP_P_DARK", [&](const std::string& s) { cfg.p_dark = std::stod(s); });
    override_if_set("EDRLOOP_BLOCK_CAP",
                    [&](const std::string& s) { cfg.block_cap = std::stod(s); });
    override_if_set("EDRLOOP_TELEMETRY_RATE",
                    [&](const std::string& s) { cfg.telemetry_rate = std::stod(s); });
    override_if_set("EDRLOOP_MODE",
                    [&](const std::string& s) { cfg.mode = loop_mode_from_name(s); });
}

namespace {

bool covered_by_deployment(const Edge& e, const DeployedSet& deployed) {
    for (const auto& [pid, eff] : e.policy_effectiveness) {
        (void)eff;
        if (deployed.has(pid, PolicyMode::Block) || deployed.has(pid, PolicyMode::Detect)) {
            return true;
        }
    }
    return false;
}

} // namespace

LoopState init_loop(const AttackGraph& truth, const Catalogs& cat, const LoopConfig& cfg) {
    truth.finalize();
    LoopState st;
    st.cfg = cfg;
    st.cat = cat;
    st.truth = truth;
    Rng rng_init(derive_seed(cfg.seed, "init"));
    st.belief = init_belief(st.truth, cfg.alert_coverage, cfg.p_alerted, rng_init);
    st.rng_observer = Rng(derive_seed(cfg.seed, "observer"));
    st.budget_left = cfg.budget;

    RoundRecord base;
    base.k = 0;
    base.s_truth = game_value(st.truth);
    base.s_belief = game_value(st.belief.graph);
    base.theta = theta(st.belief);
    base.v = lyapunov(base.s_truth, base.theta, cfg.lambda);
    base.e_obs_count = static_cast<int>(st.belief.filters.size());
    base.mean_innovation = mean_innovation(st.belief);
    st.ledger.push_back(base);
    return st;
}

RoundRecord run_round(LoopState& st, const std::vector<DefenderAction>& defender_actions,
                      const AdversaryProposal* external_adversary) {
    if (st.done) throw ParamError("loop already stopped: " + st.stop_code);
    const LoopConfig& cfg = st.cfg;

    // An external proposal is caller input: vet it before any state changes
    // so a rejected move leaves the loop exactly where it was.
    if (external_adversary != nullptr && !external_adversary->pass &&
        cfg.mode == LoopMode::DefenderPlusAttacker) {
        const AdversaryProposal& p = *external_adversary;
        const Technique* t = st.cat.find_technique(p.technique);
        if (t == nullptr)
            throw ParamError("external proposal: technique '" + p.technique + "' not in catalog");
        const Node* u = st.truth.find_node(p.src);
        const Node* v = st.truth.find_node(p.dst);
        if (u == nullptr) throw ParamError("external proposal: unknown src node '" + p.src + "'");
        if (v == nullptr) throw ParamError("external proposal: unknown dst node '" + p.dst + "'");
        if (p.src == p.dst) throw ParamError("external proposal: self-loop");
        if (u->stage == Stage::Entry && v->stage == Stage::Objective)
            throw ParamError("external proposal: direct entry-to-objective edge");
        if (!st.cat.technique_allows(*t, u->stage, v->stage))
            throw ParamError("external proposal: technique '" + p.technique +
                             "' does not allow this stage transition");
    }

    ++st.round;
    st.budget_left = cfg.budget;

    RoundRecord rec;
    rec.k = st.round;

    // defender turn
    double s_start = game_value(st.truth);
    for (const auto& a : defender_actions) {
        rec.deployments.push_back(actuate_defender(st.truth, st.belief, st.cat, st.deployed,
                                                   st.budget_left, a, cfg.block_cap));
    }
    double s_after_def = game_value(st.truth);
    rec.ds_defender = s_start - s_after_def;

    // observer turn: one telemetry draw per believed edge (always consumed),
    // plus guaranteed measurements on deployment-covered edges
    double theta_prev = theta(st.belief);
    for (auto& [eid, f] : st.belief.filters) {
        (void)f;
        bool drawn = st.rng_observer.bernoulli(cfg.telemetry_rate);
        if (!drawn && !covered_by_deployment(*st.belief.graph.find_edge(eid), st.deployed)) {
            continue;
        }
        const Edge* te = st.truth.find_edge(eid);
        measure_edge(st.belief, eid, TruthReveal{te->block, te->detect, true}, cfg.noise_r);
    }
    double theta_post_obs = theta(st.belief);

    // adversary turn
    int n_new = 0;
    double gamma = 0.0;
    if (cfg.mode == LoopMode::DefenderPlusAttacker) {
        PathResult walk = critical_path(st.truth);
        for (const auto& eid : walk.edge_sequence) {
            const Edge* te = st.truth.find_edge(eid);
            if (st.belief.contains(eid)) {
                measure_edge(st.belief, eid, TruthReveal{te->block, te->detect, true},
                             cfg.noise_r);
            } else {
                reveal_edge(st.belief, *te, true, cfg.p_dark);
                ++n_new;
            }
        }

        AdversaryProposal prop =
            external_adversary != nullptr
                ? *external_adversary
                : adversary_oracle(st.truth, st.cat, st.deployed, cfg.eps_v, cfg.block_cap);
        if (!prop.pass) {
            char idbuf[16];
            std::snprintf(idbuf, sizeof idbuf, "adv%04d", ++st.adv_counter);
            Edge e = make_adversary_edge(idbuf, prop, st.cat, st.deployed, cfg.block_cap);
            st.truth.add_edge(e);
            reveal_edge(st.belief, e, true, cfg.p_dark);
            ++n_new;
            rec.max_new_payoff = e.payoff;
            gamma = e.payoff * (1.0 - e.block);
            rec.has_adversary_edge = true;
            rec.adversary_edge = {prop.technique, prop.src, prop.dst, e.id, e.block};
        }
    }

    double s_final = game_value(st.truth);
    rec.ds_adversary = s_final - s_after_def;
    rec.n_new = n_new;
    rec.e_obs_count = static_cast<int>(st.belief.filters.size());
    rec.s_truth = s_final;
    rec.s_belief = game_value(st.belief.graph);
    rec.theta = theta(st.belief);
    rec.v = lyapunov(rec.s_truth, rec.theta, cfg.lambda);
    rec.mean_innovation = mean_innovation(st.belief);

    rec.iss.gamma = gamma;
    rec.iss.alpha_realized = rec.ds_defender;
    rec.iss.observer_term = cfg.lambda * (theta_prev - theta_post_obs);
    rec.iss.uncertainty_injection = cfg.lambda * n_new * cfg.p_dark;
    rec.iss.iss_condition_held = rec.iss.alpha_realized + rec.iss.observer_term >
                                 rec.iss.gamma + rec.iss.uncertainty_injection;

    // convergence
    st.innov_low_streak = rec.mean_innovation < cfg.eps_innov ? st.innov_low_streak + 1 : 0;
    double v_prev = st.ledger.back().v;
    st.v_plateau_streak = std::fabs(rec.v - v_prev) < cfg.eps_v ? st.v_plateau_streak + 1 : 0;
    SseResult sse = sse_check(st.truth, st.belief, st.cat, st.deployed, cfg.budget, cfg.eps_v,
                              cfg.block_cap);
    std::string reason = stop_reason(sse.equilibrium, st.innov_low_streak >= 2,
                                     st.v_plateau_streak >= 2, st.round >= cfg.max_rounds);
    if (!reason.empty()) {
        st.done = true;
        st.stop_code = reason;
        rec.stop_reason = reason;
    }
    st.ledger.push_back(rec);
    return rec;
}

RunResult run_experiment(const AttackGraph& truth, const Catalogs& cat, const LoopConfig& cfg) {
    LoopState st = init_loop(truth, cat, cfg);
    while (!st.done) {
        std::vector<DefenderAction> actions = greedy_controller(
            st.belief, st.cat, st.deployed, cfg.budget, cfg.eps_v, cfg.block_cap);
        run_round(st, actions);
    }
    RunResult r;
    r.ledger = st.ledger;
    r.stop_code = st.stop_code;
    r.rounds = st.round;
    r.final_s = st.ledger.back().s_truth;
    r.final_v = st.ledger.back().v;
    return r;
}

} // namespace edrloop
