#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edrloop/catalog.hpp"
#include "edrloop/certificate.hpp"
#include "edrloop/game.hpp"
#include "edrloop/graph.hpp"
#include "edrloop/observer.hpp"
#include "edrloop/rng.hpp"

namespace edrloop {

enum class LoopMode { DefenderOnly, DefenderPlusAttacker };

const char* loop_mode_name(LoopMode m);
LoopMode loop_mode_from_name(const std::string& name); // throws SchemaError

struct LoopConfig {
    int budget = 3;
    double noise_r = 0.05;
    double eps_innov = 0.05;
    double eps_v = 1e-4;
    int max_rounds = 10;
    double lambda = 1.0;
    std::uint64_t seed = 42;
    double alert_coverage = 0.6;
    double p_alerted = 0.15;
    double p_dark = 0.85;
    double block_cap = 0.95;
    double telemetry_rate = 0.75;
    LoopMode mode = LoopMode::DefenderOnly;

    static LoopConfig from_json_text(const std::string& text); // strict keys
    std::string to_json_text(int indent = -1) const;
};

// EDRLOOP_<FIELD> environment variables override the corresponding field
// (EDRLOOP_BUDGET, EDRLOOP_SEED, EDRLOOP_MODE, ...). Unparseable values
// throw ParamError.
void apply_env_overrides(LoopConfig& cfg);

struct LoopState {
    LoopConfig cfg;
    Catalogs cat;
    AttackGraph truth;
    BeliefGraph belief;
    DeployedSet deployed;
    int round = 0;
    int budget_left = 0;
    int adv_counter = 0;
    bool done = false;
    std::string stop_code;
    std::vector<RoundRecord> ledger; // [0] is the pre-loop snapshot
    Rng rng_observer{0};
    int innov_low_streak = 0;
    int v_plateau_streak = 0;
};

// Builds the belief from the alerted subset, seeds the subsystem RNG
// streams, and writes the k=0 snapshot record.
LoopState init_loop(const AttackGraph& truth, const Catalogs& cat, const LoopConfig& cfg);

// One full round, in order: defender actuation (vector order, budget-gated),
// matched telemetry with Kalman updates, adversary move, ledger append,
// convergence check. `external_adversary` replaces the internal best-response
// oracle when non-null (pass=true means the adversary passes); it is ignored
// in defender-only mode. Throws ParamError once the loop has stopped.
RoundRecord run_round(LoopState& st, const std::vector<DefenderAction>& defender_actions,
                      const AdversaryProposal* external_adversary = nullptr);

struct RunResult {
    std::vector<RoundRecord> ledger;
    std::string stop_code;
    int rounds = 0;
    double final_s = 0.0;
    double final_v = 0.0;
};

// Greedy defender vs. the configured adversary until a stop rule fires.
RunResult run_experiment(const AttackGraph& truth, const Catalogs& cat, const LoopConfig& cfg);

} // namespace edrloop
