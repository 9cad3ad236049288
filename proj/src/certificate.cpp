#include "edrloop/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "edrloop/errors.hpp"

namespace edrloop {

using nlohmann::json;

double lyapunov(double s, double theta, double lambda) { return s + lambda * theta; }

namespace {

json deployment_to_json(const Deployment& d) {
    return json{{"policy", d.policy},
                {"mode", policy_mode_name(d.mode)},
                {"outcome", actuation_outcome_name(d.outcome)},
                {"edges_touched", d.edges_touched}};
}

Deployment deployment_from_json(const json& j) {
    Deployment d;
    d.policy = j.at("policy").get<std::string>();
    d.mode = policy_mode_from_name(j.at("mode").get<std::string>());
    std::string outcome = j.at("outcome").get<std::string>();
    if (outcome == "APPLIED") d.outcome = ActuationOutcome::Applied;
    else if (outcome == "REJECTED_OFF_CATALOG") d.outcome = ActuationOutcome::RejectedOffCatalog;
    else if (outcome == "REJECTED_BUDGET") d.outcome = ActuationOutcome::RejectedBudget;
    else throw SchemaError("deployments.outcome", "unknown outcome '" + outcome + "'");
    d.edges_touched = j.at("edges_touched").get<int>();
    return d;
}

} // namespace

std::string RoundRecord::to_json_text() const {
    json j;
    j["k"] = k;
    j["s_truth"] = s_truth;
    j["s_belief"] = s_belief;
    j["theta"] = theta;
    j["v"] = v;
    j["deployments"] = json::array();
    for (const auto& d : deployments) j["deployments"].push_back(deployment_to_json(d));
    if (has_adversary_edge) {
        j["adversary_edge"] = json{{"technique", adversary_edge.technique},
                                   {"src", adversary_edge.src},
                                   {"dst", adversary_edge.dst},
                                   {"edge_id", adversary_edge.edge_id},
                                   {"inherited_block", adversary_edge.inherited_block}};
    } else {
        j["adversary_edge"] = nullptr;
    }
    j["n_new"] = n_new;
    j["e_obs_count"] = e_obs_count;
    j["max_new_payoff"] = max_new_payoff;
    j["ds_defender"] = ds_defender;
    j["ds_adversary"] = ds_adversary;
    j["mean_innovation"] = mean_innovation;
    j["iss"] = json{{"gamma", iss.gamma},
                    {"alpha_realized", iss.alpha_realized},
                    {"observer_term", iss.observer_term},
                    {"uncertainty_injection", iss.uncertainty_injection},
                    {"iss_condition_held", iss.iss_condition_held}};
    j["stop_reason"] = stop_reason;
    return j.dump();
}

RoundRecord RoundRecord::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw SchemaError("ledger", ex.what());
    }
    try {
        RoundRecord r;
        r.k = j.at("k").get<int>();
        r.s_truth = j.at("s_truth").get<double>();
        r.s_belief = j.at("s_belief").get<double>();
        r.theta = j.at("theta").get<double>();
        r.v = j.at("v").get<double>();
        for (const auto& dj : j.at("deployments")) {
            r.deployments.push_back(deployment_from_json(dj));
        }
        if (!j.at("adversary_edge").is_null()) {
            const json& a = j.at("adversary_edge");
            r.has_adversary_edge = true;
            r.adversary_edge.technique = a.at("technique").get<std::string>();
            r.adversary_edge.src = a.at("src").get<std::string>();
            r.adversary_edge.dst = a.at("dst").get<std::string>();
            r.adversary_edge.edge_id = a.at("edge_id").get<std::string>();
            r.adversary_edge.inherited_block = a.at("inherited_block").get<double>();
        }
        r.n_new = j.at("n_new").get<int>();
        r.e_obs_count = j.at("e_obs_count").get<int>();
        r.max_new_payoff = j.at("max_new_payoff").get<double>();
        r.ds_defender = j.at("ds_defender").get<double>();
        r.ds_adversary = j.at("ds_adversary").get<double>();
        r.mean_innovation = j.at("mean_innovation").get<double>();
        const json& i = j.at("iss");
        r.iss.gamma = i.at("gamma").get<double>();
        r.iss.alpha_realized = i.at("alpha_realized").get<double>();
        r.iss.observer_term = i.at("observer_term").get<double>();
        r.iss.uncertainty_injection = i.at("uncertainty_injection").get<double>();
        r.iss.iss_condition_held = i.at("iss_condition_held").get<bool>();
        r.stop_reason = j.at("stop_reason").get<std::string>();
        return r;
    } catch (const json::exception& ex) {
        throw SchemaError("ledger", ex.what());
    }
}

std::string ledger_to_jsonl(const std::vector<RoundRecord>& ledger) {
    std::string out;
    for (const auto& r : ledger) {
        out += r.to_json_text();
        out += '\n';
    }
    return out;
}

std::vector<RoundRecord> ledger_from_jsonl(const std::string& text) {
    std::vector<RoundRecord> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(RoundRecord::from_json_text(line));
    }
    return out;
}

MonotoneCheck check_value_monotone(const std::vector<RoundRecord>& ledger, double tol) {
    MonotoneCheck c;
    for (size_t i = 1; i < ledger.size(); ++i) {
        double rise = ledger[i].s_truth - ledger[i - 1].s_truth;
        if (rise > tol) {
            c.ok = false;
            if (c.first_violation < 0) c.first_violation = ledger[i].k;
            c.worst_rise = std::max(c.worst_rise, rise);
        }
    }
    return c;
}

MonotoneCheck check_lyapunov_monotone(const std::vector<RoundRecord>& ledger, double tol) {
    MonotoneCheck c;
    for (size_t i = 1; i < ledger.size(); ++i) {
        double rise = ledger[i].v - ledger[i - 1].v;
        if (rise > tol) {
            c.ok = false;
            if (c.first_violation < 0) c.first_violation = ledger[i].k;
            c.worst_rise = std::max(c.worst_rise, rise);
        }
    }
    return c;
}

IssBoundCheck check_iss_bound(const std::vector<RoundRecord>& ledger, double tol) {
    IssBoundCheck c;
    for (size_t i = 1; i < ledger.size(); ++i) {
        const RoundRecord& r = ledger[i];
        bool spike_ok = r.ds_adversary <= r.iss.gamma + tol;
        double bound = ledger[i - 1].v - r.iss.alpha_realized + r.iss.gamma +
                       r.iss.uncertainty_injection;
        bool drift_ok = r.v <= bound + tol;
        if (!spike_ok) c.spikes_ok = false;
        if (!drift_ok) c.drift_ok = false;
        if ((!spike_ok || !drift_ok) && c.first_violation < 0) c.first_violation = r.k;
        if (r.iss.iss_condition_held) ++c.rounds_condition_held;
    }
    c.ok = c.spikes_ok && c.drift_ok;
    return c;
}

namespace {

// Closed-form least squares for y ~ a*x + c with x_i = b^i.
double solve_affine(const std::vector<double>& y, double b, double& a, double& c) {
    size_t n = y.size();
    double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
    double x = 1.0;
    for (size_t i = 0; i < n; ++i) {
        sx += x;
        sxx += x * x;
        sy += y[i];
        sxy += x * y[i];
        x *= b;
    }
    double det = sxx * static_cast<double>(n) - sx * sx;
    if (std::fabs(det) < 1e-12) {
        a = 0.0;
        c = sy / static_cast<double>(n);
    } else {
        a = (sxy * static_cast<double>(n) - sx * sy) / det;
        c = (sxx * sy - sx * sxy) / det;
    }
    double sse = 0.0;
    x = 1.0;
    for (size_t i = 0; i < n; ++i) {
        double r = a * x + c - y[i];
        sse += r * r;
        x *= b;
    }
    return sse;
}

} // namespace

DecayFit fit_decay(const std::vector<double>& y) {
    DecayFit fit;
    fit.points = static_cast<int>(y.size());
    if (y.size() < 3) {
        fit.degenerate = true;
        return fit;
    }
    auto [mn, mx] = std::minmax_element(y.begin(), y.end());
    if (*mx - *mn < 1e-9) {
        fit.degenerate = true;
        fit.c = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        return fit;
    }

    const int grid = 240;
    const double lo = 1e-3, hi = 0.98;
    double best_b = lo, best_sse = 0.0;
    int best_i = 0;
    for (int i = 0; i < grid; ++i) {
        double t = static_cast<double>(i) / (grid - 1);
        double b = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
        double a, c;
        double sse = solve_affine(y, b, a, c);
        if (i == 0 || sse < best_sse) {
            best_sse = sse;
            best_b = b;
            best_i = i;
        }
    }

    auto grid_b = [&](int i) {
        i = std::clamp(i, 0, grid - 1);
        double t = static_cast<double>(i) / (grid - 1);
        return std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    };
    double left = grid_b(best_i - 1), right = grid_b(best_i + 1);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a_dum, c_dum;
    double x1 = right - gr * (right - left);
    double x2 = left + gr * (right - left);
    double f1 = solve_affine(y, x1, a_dum, c_dum);
    double f2 = solve_affine(y, x2, a_dum, c_dum);
    for (int it = 0; it < 80 && right - left > 1e-12; ++it) {
        if (f1 < f2) {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - gr * (right - left);
            f1 = solve_affine(y, x1, a_dum, c_dum);
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + gr * (right - left);
            f2 = solve_affine(y, x2, a_dum, c_dum);
        }
    }
    double refined = 0.5 * (left + right);
    double ra, rc;
    double rsse = solve_affine(y, refined, ra, rc);
    if (rsse <= best_sse) {
        fit.b = refined;
        fit.a = ra;
        fit.c = rc;
        fit.sse = rsse;
    } else {
        fit.b = best_b;
        fit.sse = solve_affine(y, best_b, fit.a, fit.c);
    }
    return fit;
}

InnovationDecayCheck check_innovation_decay(const std::vector<RoundRecord>& ledger, double lo,
                                            double hi) {
    InnovationDecayCheck c;
    std::vector<double> series;
    for (const auto& r : ledger) {
        if (r.k >= 1) series.push_back(r.mean_innovation);
    }
    c.fit = fit_decay(series);
    c.ok = !c.fit.degenerate && c.fit.a > 0.0 && c.fit.b >= lo && c.fit.b <= hi;
    return c;
}

std::string stop_reason(bool sse, bool innovation_low, bool v_plateau, bool max_rounds) {
    if (sse) return "SSE";
    if (innovation_low) return "INNOVATION";
    if (v_plateau) return "V_PLATEAU";
    if (max_rounds) return "MAX_ROUNDS";
    return "";
}

} // namespace edrloop
