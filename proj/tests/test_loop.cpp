#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "edrloop/harness.hpp"
#include "edrloop/loop.hpp"

using namespace edrloop;

namespace {

AttackGraph bench_graph(std::uint64_t seed = 7) {
    GenSpec spec;
    spec.size = "small";
    spec.seed = seed;
    return generate_graph(spec);
}

LoopConfig base_cfg() {
    LoopConfig cfg;
    cfg.seed = 42;
    return cfg;
}

} // namespace

TEST_CASE("config defaults and strict parsing") {
    LoopConfig cfg = LoopConfig::from_json_text("{}");
    CHECK(cfg.budget == 3);
    CHECK(cfg.noise_r == 0.05);
    CHECK(cfg.eps_innov == 0.05);
    CHECK(cfg.eps_v == 1e-4);
    CHECK(cfg.max_rounds == 10);
    CHECK(cfg.lambda == 1.0);
    CHECK(cfg.seed == 42);
    CHECK(cfg.alert_coverage == 0.6);
    CHECK(cfg.p_alerted == 0.15);
    CHECK(cfg.p_dark == 0.85);
    CHECK(cfg.block_cap == 0.95);
    CHECK(cfg.telemetry_rate == 0.75);
    CHECK(cfg.mode == LoopMode::DefenderOnly);

    cfg = LoopConfig::from_json_text(
        R"({"budget":5,"seed":99,"mode":"defender_plus_attacker","lambda":2.0})");
    CHECK(cfg.budget == 5);
    CHECK(cfg.seed == 99);
    CHECK(cfg.lambda == 2.0);
    CHECK(cfg.mode == LoopMode::DefenderPlusAttacker);

    CHECK_THROWS_AS(LoopConfig::from_json_text(R"({"bugdet":5})"), SchemaError);
    CHECK_THROWS_AS(LoopConfig::from_json_text(R"({"mode":"chaos"})"), SchemaError);
    CHECK_THROWS_AS(LoopConfig::from_json_text(R"({"noise_r":0})"), SchemaError);
    CHECK_THROWS_AS(LoopConfig::from_json_text(R"({"max_rounds":0})"), SchemaError);
    CHECK_THROWS_AS(LoopConfig::from_json_text(R"({"telemetry_rate":1.5})"), SchemaError);
    CHECK_THROWS_AS(LoopConfig::from_json_text(R"({"p_dark":0})"), SchemaError);

    // Round-trips through its own serialization.
    LoopConfig again = LoopConfig::from_json_text(cfg.to_json_text());
    CHECK(again.to_json_text() == cfg.to_json_text());
}

TEST_CASE("environment overrides parse or refuse loudly") {
    LoopConfig cfg = base_cfg();
    setenv("EDRLOOP_BUDGET", "7", 1);
    setenv("EDRLOOP_MODE", "defender_plus_attacker", 1);
    setenv("EDRLOOP_TELEMETRY_RATE", "0.5", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.budget == 7);
    CHECK(cfg.mode == LoopMode::DefenderPlusAttacker);
    CHECK(cfg.telemetry_rate == 0.5);
    unsetenv("EDRLOOP_BUDGET");
    unsetenv("EDRLOOP_MODE");
    unsetenv("EDRLOOP_TELEMETRY_RATE");

    setenv("EDRLOOP_SEED", "banana", 1);
    CHECK_THROWS_AS(apply_env_overrides(cfg), ParamError);
    unsetenv("EDRLOOP_SEED");
}

TEST_CASE("init writes the pre-loop snapshot") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    LoopState st = init_loop(g, cat, base_cfg());
    REQUIRE(st.ledger.size() == 1);
    const RoundRecord& r0 = st.ledger[0];
    CHECK(r0.k == 0);
    CHECK(r0.s_truth == doctest::Approx(game_value(g)).epsilon(1e-15));
    CHECK(r0.theta == doctest::Approx(theta(st.belief)).epsilon(1e-15));
    CHECK(r0.v == doctest::Approx(r0.s_truth + r0.theta).epsilon(1e-15));
    CHECK(r0.stop_reason.empty());
    CHECK(!st.done);
    CHECK(st.round == 0);
    // Coverage splits the truth roughly 60/40.
    CHECK(st.belief.filters.size() > 20);
    CHECK(st.belief.filters.size() < 45);
    CHECK(st.belief.filters.size() == st.belief.graph.edges().size());
}

TEST_CASE("rounds follow actuation -> telemetry -> record") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    LoopState st = init_loop(g, cat, base_cfg());
    double s0 = st.ledger[0].s_truth;

    RoundRecord r = run_round(st, {{"cl-egress-filter", PolicyMode::Block}});
    CHECK(r.k == 1);
    REQUIRE(r.deployments.size() == 1);
    CHECK(r.deployments[0].outcome == ActuationOutcome::Applied);
    CHECK(r.ds_defender == doctest::Approx(s0 - r.s_truth).epsilon(1e-12));
    CHECK(r.ds_adversary == 0.0);
    CHECK(!r.has_adversary_edge); // defender-only mode
    CHECK(r.n_new == 0);
    CHECK(r.e_obs_count == static_cast<int>(st.belief.filters.size()));
    CHECK(r.mean_innovation > 0.05); // first telemetry sweep is surprising
    CHECK(r.iss.gamma == 0.0);
    CHECK(r.iss.alpha_realized == doctest::Approx(r.ds_defender).epsilon(1e-15));
    CHECK(st.round == 1);

    // Off-catalog and over-budget actions are recorded, not applied.
    RoundRecord r2 = run_round(st, {{"ghost", PolicyMode::Block},
                                    {"ep-macro-block", PolicyMode::Block},
                                    {"ep-script-block", PolicyMode::Block},
                                    {"ep-smb-hardening", PolicyMode::Block},
                                    {"cl-waf-shield", PolicyMode::Block}});
    REQUIRE(r2.deployments.size() == 5);
    CHECK(r2.deployments[0].outcome == ActuationOutcome::RejectedOffCatalog);
    CHECK(r2.deployments[1].outcome == ActuationOutcome::Applied);
    CHECK(r2.deployments[2].outcome == ActuationOutcome::Applied);
    CHECK(r2.deployments[3].outcome == ActuationOutcome::Applied);
    CHECK(r2.deployments[4].outcome == ActuationOutcome::RejectedBudget);
}

TEST_CASE("budget resets every round") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    LoopConfig cfg = base_cfg();
    cfg.budget = 1;
    LoopState st = init_loop(g, cat, cfg);
    auto r1 = run_round(st, {{"cl-egress-filter", PolicyMode::Block},
                             {"cl-waf-shield", PolicyMode::Block}});
    CHECK(r1.deployments[1].outcome == ActuationOutcome::RejectedBudget);
    auto r2 = run_round(st, {{"cl-waf-shield", PolicyMode::Block}});
    CHECK(r2.deployments[0].outcome == ActuationOutcome::Applied);
}

TEST_CASE("defender-only run certificates hold") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    RunResult res = run_experiment(g, cat, base_cfg());
    CHECK(res.rounds >= 2);
    CHECK(res.stop_code == "INNOVATION");
    CHECK(res.ledger.back().stop_reason == res.stop_code);
    CHECK(check_value_monotone(res.ledger, 1e-12).ok);
    CHECK(check_lyapunov_monotone(res.ledger, 1e-12).ok);
    CHECK(check_iss_bound(res.ledger, 1e-12).ok);
    CHECK(res.final_s <= res.ledger[0].s_truth);
    // No adversary: every record shows zero spike and no new edges.
    for (const auto& r : res.ledger) {
        CHECK(r.ds_adversary == 0.0);
        CHECK(r.n_new == 0);
        CHECK(r.iss.uncertainty_injection == 0.0);
    }
}

TEST_CASE("adversarial run certificates hold") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    LoopConfig cfg = base_cfg();
    cfg.mode = LoopMode::DefenderPlusAttacker;
    RunResult res = run_experiment(g, cat, cfg);
    CHECK(res.rounds >= 2);
    auto iss = check_iss_bound(res.ledger, 1e-12);
    CHECK(iss.spikes_ok);
    CHECK(iss.drift_ok);
    bool saw_edge = false;
    int truth_edges = static_cast<int>(g.edges().size());
    for (const auto& r : res.ledger) {
        if (!r.has_adversary_edge) continue;
        saw_edge = true;
        CHECK(r.adversary_edge.edge_id.substr(0, 3) == "adv");
        CHECK(r.ds_adversary <= r.iss.gamma + 1e-12);
        CHECK(r.max_new_payoff <= 0.9);
    }
    CHECK(saw_edge);
    (void)truth_edges;
}

TEST_CASE("external adversary proposals are validated and applied") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    LoopConfig cfg = base_cfg();
    cfg.mode = LoopMode::DefenderPlusAttacker;
    LoopState st = init_loop(g, cat, cfg);

    AdversaryProposal pass;
    pass.pass = true;
    RoundRecord r1 = run_round(st, {}, &pass);
    CHECK(!r1.has_adversary_edge);
    CHECK(r1.ds_adversary == 0.0);

    AdversaryProposal move;
    move.pass = false;
    move.technique = "T1041";
    move.src = st.truth.nodes()[st.truth.entry_index()].id;
    move.dst = "does-not-exist";
    CHECK_THROWS_AS(run_round(st, {}, &move), ParamError);
}

TEST_CASE("stopped loops refuse further rounds") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    RunResult res = run_experiment(g, cat, base_cfg());
    LoopState st = init_loop(g, cat, base_cfg());
    while (!st.done) run_round(st, {});
    CHECK_THROWS_AS(run_round(st, {}), ParamError);
    (void)res;
}

TEST_CASE("max rounds is the stop of last resort") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    LoopConfig cfg = base_cfg();
    cfg.eps_innov = 0.0; // innovation can never be "low enough"
    cfg.eps_v = 0.0;     // nor the value plateau
    cfg.max_rounds = 3;
    LoopState st = init_loop(g, cat, cfg);
    RunResult res = run_experiment(g, cat, cfg);
    CHECK(res.rounds == 3);
    CHECK(res.stop_code == "MAX_ROUNDS");
    (void)st;
}

TEST_CASE("identical seeds replay byte-identically") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    LoopConfig cfg = base_cfg();
    for (LoopMode m : {LoopMode::DefenderOnly, LoopMode::DefenderPlusAttacker}) {
        cfg.mode = m;
        RunResult a = run_experiment(g, cat, cfg);
        RunResult b = run_experiment(g, cat, cfg);
        CHECK(ledger_to_jsonl(a.ledger) == ledger_to_jsonl(b.ledger));
    }
    cfg.mode = LoopMode::DefenderOnly;
    cfg.seed = 43; // a different seed must actually change something
    RunResult c = run_experiment(g, cat, cfg);
    cfg.seed = 42;
    RunResult d = run_experiment(g, cat, cfg);
    CHECK(ledger_to_jsonl(c.ledger) != ledger_to_jsonl(d.ledger));
}

TEST_CASE("filter uncertainty only contracts for measured edges") {
    AttackGraph g = bench_graph();
    Catalogs cat = default_catalogs();
    LoopState st = init_loop(g, cat, base_cfg());
    auto before = st.belief.filters;
    run_round(st, {});
    int contracted = 0;
    for (const auto& [id, f] : st.belief.filters) {
        CHECK(f.P <= before.at(id).P + 1e-15);
        if (f.P < before.at(id).P) ++contracted;
    }
    CHECK(contracted > 0);
    // theta is the mean P, so it contracts too.
    CHECK(st.ledger.back().theta < st.ledger[0].theta);
}
