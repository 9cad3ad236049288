#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "edrloop/catalog.hpp"
#include "edrloop/graph.hpp"
#include "edrloop/observer.hpp"

namespace edrloop {

struct DefenderAction {
    std::string policy;
    PolicyMode mode = PolicyMode::Block;
};

enum class ActuationOutcome { Applied, RejectedOffCatalog, RejectedBudget };

const char* actuation_outcome_name(ActuationOutcome o);

struct Deployment {
    std::string policy;
    PolicyMode mode = PolicyMode::Block;
    ActuationOutcome outcome = ActuationOutcome::Applied;
    int edges_touched = 0; // truth-side count
};

// (policy, mode) pairs already live. Re-deploying an existing pair is
// accepted, touches nothing, and still consumes a budget slot.
struct DeployedSet {
    std::set<std::pair<std::string, int>> items;

    bool has(const std::string& policy, PolicyMode mode) const {
        return items.count({policy, static_cast<int>(mode)}) > 0;
    }
    void add(const std::string& policy, PolicyMode mode) {
        items.insert({policy, static_cast<int>(mode)});
    }
};

// Raise block (block mode, capped at block_cap) or detect (detect mode,
// capped at 1) on every edge whose effectiveness map names the policy, by the
// edge's own stored effectiveness. Returns touched-edge count.
int apply_policy_to_edges(AttackGraph& g, const std::string& policy, PolicyMode mode,
                          double block_cap);

// Validated actuation: off-catalog and over-budget proposals are rejected as
// values and touch neither graph. Applied actions hit truth and belief
// identically (the defender knows its own deployments) and decrement budget.
Deployment actuate_defender(AttackGraph& truth, BeliefGraph& belief, const Catalogs& cat,
                            DeployedSet& deployed, int& budget_left,
                            const DefenderAction& action, double block_cap);

// Sum of deployed block-mode policy effectiveness covering the technique,
// capped. This is the block a new adversary edge inherits at birth.
double anticipatory_block(const Catalogs& cat, const DeployedSet& deployed,
                          const std::string& technique, double block_cap);
double anticipatory_detect(const Catalogs& cat, const DeployedSet& deployed,
                           const std::string& technique, double base_detect);

// Budget-bounded greedy ranking on the belief: repeatedly take the
// not-yet-deployed block-mode policy with the largest believed game-value
// drop, stopping when the best remaining drop is below eps_v. Ties resolve
// by catalog order.
std::vector<DefenderAction> greedy_controller(const BeliefGraph& belief, const Catalogs& cat,
                                              const DeployedSet& deployed, int budget,
                                              double eps_v, double block_cap);

struct AdversaryProposal {
    bool pass = true;
    std::string technique;
    std::string src;
    std::string dst;
    double inherited_block = 0.0;
    double s_before = 0.0;
    double s_after = 0.0;
};

// Best response over all (technique, src, dst) with an allowed stage
// transition, no self-loops, no ENTRY->OBJECTIVE bypass. The candidate edge
// inherits anticipatory block; PASS when no candidate lifts the game value by
// more than eps_v. Ties break on (technique id, src id, dst id) ascending.
AdversaryProposal adversary_oracle(const AttackGraph& truth, const Catalogs& cat,
                                   const DeployedSet& deployed, double eps_v,
                                   double block_cap, double base_detect = 0.1);

// Materialize an accepted proposal as an edge (effectiveness map populated
// from covering policies so later deployments can reach it).
Edge make_adversary_edge(const std::string& id, const AdversaryProposal& p,
                         const Catalogs& cat, const DeployedSet& deployed,
                         double block_cap, double base_detect = 0.1);

struct SseResult {
    bool equilibrium = false;
    bool defender_static = false; // greedy proposes nothing
    bool adversary_pass = false;  // oracle passes
};

// Stackelberg equilibrium probe on a snapshot: neither side improves by a
// unilateral deviation. Pure (no state touched).
SseResult sse_check(const AttackGraph& truth, const BeliefGraph& belief, const Catalogs& cat,
                    const DeployedSet& deployed, int budget, double eps_v, double block_cap);

} // namespace edrloop
