#pragma once

#include <string>
#include <vector>

#include "edrloop/game.hpp"

namespace edrloop {

struct IssTerms {
    double gamma = 0.0;               // worst admissible spike this round
    double alpha_realized = 0.0;      // defender-turn drop in the true game value
    double observer_term = 0.0;       // lambda-weighted uncertainty contraction
    double uncertainty_injection = 0.0; // lambda * n_new * p_max
    bool iss_condition_held = false;  // alpha + observer > gamma + injection
};

struct AdversaryEdgeRecord {
    std::string technique;
    std::string src;
    std::string dst;
    std::string edge_id;
    double inherited_block = 0.0;
};

// One ledger line. k = 0 is the pre-loop snapshot; rounds are 1-based.
struct RoundRecord {
    int k = 0;
    double s_truth = 0.0;
    double s_belief = 0.0;
    double theta = 0.0;
    double v = 0.0;
    std::vector<Deployment> deployments;
    bool has_adversary_edge = false;
    AdversaryEdgeRecord adversary_edge;
    int n_new = 0;         // edges that entered the belief this round
    int e_obs_count = 0;   // belief edge count at round end
    double max_new_payoff = 0.0; // over adversary-created edges this round
    double ds_defender = 0.0;    // >= 0: how far the defender pushed S down
    double ds_adversary = 0.0;   // >= 0: how far the adversary pushed S up
    double mean_innovation = 0.0;
    IssTerms iss;
    std::string stop_reason; // empty until the loop stops

    std::string to_json_text() const;
    static RoundRecord from_json_text(const std::string& text);
};

double lyapunov(double s, double theta, double lambda);

std::string ledger_to_jsonl(const std::vector<RoundRecord>& ledger);
std::vector<RoundRecord> ledger_from_jsonl(const std::string& text);

struct MonotoneCheck {
    bool ok = true;
    int first_violation = -1; // k of the offending record
    double worst_rise = 0.0;
};

// True game value never rises / Lyapunov value never rises, within tol.
// Meaningful for runs without an adversary.
MonotoneCheck check_value_monotone(const std::vector<RoundRecord>& ledger, double tol);
MonotoneCheck check_lyapunov_monotone(const std::vector<RoundRecord>& ledger, double tol);

struct IssBoundCheck {
    bool ok = true;
    bool spikes_ok = true; // every adversary spike <= gamma
    bool drift_ok = true;  // V(k) <= V(k-1) - alpha + gamma + injection
    int first_violation = -1;
    int rounds_condition_held = 0; // strict-contraction rounds (informational)
};

IssBoundCheck check_iss_bound(const std::vector<RoundRecord>& ledger, double tol);

struct DecayFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double sse = 0.0;
    int points = 0;
    bool degenerate = false;
};

// Least-squares fit of y[i] ~ a * b^i + c. b is found by log-spaced grid
// search plus golden-section refinement; a and c are solved in closed form
// for each b. Needs >= 3 points and a non-flat series.
DecayFit fit_decay(const std::vector<double>& y);

struct InnovationDecayCheck {
    bool ok = false;
    DecayFit fit;
};

// Geometric innovation decay: fit the per-round mean innovation series
// (k >= 1) and require the decay base to land in [lo, hi].
InnovationDecayCheck check_innovation_decay(const std::vector<RoundRecord>& ledger,
                                            double lo = 0.05, double hi = 0.3);

// Highest-precedence stop reason, or "" if none triggered.
std::string stop_reason(bool sse, bool innovation_low, bool v_plateau, bool max_rounds);

} // namespace edrloop
