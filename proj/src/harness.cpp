#include "edrloop/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "edrloop/certificate.hpp"
#include "edrloop/errors.hpp"
#include "edrloop/rng.hpp"

namespace edrloop {

using nlohmann::json;

namespace {

struct PolicyRow {
    const char* id;
    const char* domain;
    PolicyMode mode;
    double eff;
    const char* covers;
};

struct TechRow {
    const char* id;
    const char* moves; // comma list of stage pairs, E/F/L/O per char
};

const PolicyRow kPolicies[] = {
    {"ep-macro-block", "endpoint", PolicyMode::Block, 0.45, "T1566.001,T1566.002,T1189,T1091"},
    {"ep-usb-device-control", "endpoint", PolicyMode::Block, 0.50,
     "T1091,T1200,T1052.001,T1025"},
    {"cl-waf-shield", "cloud", PolicyMode::Block, 0.40, "T1190,T1189,T1195.002"},
    {"id-legacy-auth-block", "identity", PolicyMode::Block, 0.55, "T1133,T1078,T1550.002"},
    {"id-mfa-enforce", "identity", PolicyMode::Block, 0.50,
     "T1078,T1078.002,T1199,T1021.001"},
    {"ep-script-block", "endpoint", PolicyMode::Block, 0.50, "T1059.001,T1059.003,T1053.005"},
    {"ep-child-proc-block", "endpoint", PolicyMode::Block, 0.45,
     "T1059.001,T1547.001,T1543.003,T1574.002"},
    {"ep-priv-esc-guard", "endpoint", PolicyMode::Block, 0.40,
     "T1068,T1134,T1548.002,T1055"},
    {"ep-registry-guard", "endpoint", PolicyMode::Block, 0.35, "T1112,T1547.001,T1562.001"},
    {"ep-lsass-cred-guard", "endpoint", PolicyMode::Block, 0.60,
     "T1003.001,T1558.003,T1550.002"},
    {"id-kerberos-armor", "identity", PolicyMode::Block, 0.45,
     "T1558.003,T1550.003,T1484.001"},
    {"ep-rdp-lockdown", "endpoint", PolicyMode::Block, 0.50, "T1021.001,T1563.002,T1210"},
    {"ep-smb-hardening", "endpoint", PolicyMode::Block, 0.45, "T1021.002,T1570,T1080,T1039"},
    {"id-winrm-restrict", "identity", PolicyMode::Block, 0.40, "T1021.006,T1021.004"},
    {"id-priv-session-guard", "identity", PolicyMode::Block, 0.45,
     "T1098,T1556.003,T1134"},
    {"cl-lateral-sg-lockdown", "cloud", PolicyMode::Block, 0.50,
     "T1210,T1021.004,T1046,T1135,T1018,T1087.002"},
    {"cl-egress-filter", "cloud", PolicyMode::Block, 0.55,
     "T1041,T1048.003,T1567.002,T1020,T1537"},
    {"ep-ransomware-shield", "endpoint", PolicyMode::Block, 0.60, "T1486,T1490,T1485"},
    {"cl-s3-public-block", "cloud", PolicyMode::Block, 0.50, "T1530,T1213.002,T1537"},
    {"ep-data-guard", "endpoint", PolicyMode::Block, 0.45,
     "T1005,T1025,T1039,T1114.002,T1560.001"},
    {"ep-edr-telemetry-boost", "endpoint", PolicyMode::Detect, 0.30,
     "T1055,T1059.001,T1068"},
    {"ep-proc-tree-audit", "endpoint", PolicyMode::Detect, 0.25,
     "T1543.003,T1053.005,T1547.001"},
    {"id-signin-anomaly-alert", "identity", PolicyMode::Detect, 0.30,
     "T1078,T1078.002,T1133"},
    {"id-token-replay-alert", "identity", PolicyMode::Detect, 0.25,
     "T1550.002,T1550.003,T1134"},
    {"id-dcsync-alert", "identity", PolicyMode::Detect, 0.35, "T1003.001,T1558.003"},
    {"cl-cloudtrail-analytics", "cloud", PolicyMode::Detect, 0.30,
     "T1530,T1098,T1484.001"},
    {"cl-flow-log-monitor", "cloud", PolicyMode::Detect, 0.25,
     "T1041,T1048.003,T1046,T1018"},
    {"ep-memory-scan-audit", "endpoint", PolicyMode::Detect, 0.30, "T1055,T1134"},
    {"ep-script-trace-audit", "endpoint", PolicyMode::Detect, 0.25,
     "T1059.001,T1059.003,T1112"},
    {"cl-imds-access-alert", "cloud", PolicyMode::Detect, 0.35, "T1530,T1567.002"},
};

const TechRow kTechniques[] = {
    {"T1566.001", "EF"},   {"T1566.002", "EF"},   {"T1190", "EF"},
    {"T1133", "EF"},       {"T1078", "EF,FL"},    {"T1091", "EF,LL"},
    {"T1195.002", "EF"},   {"T1199", "EF"},       {"T1189", "EF"},
    {"T1200", "EF"},       {"T1059.001", "FF"},   {"T1059.003", "FF"},
    {"T1547.001", "FF"},   {"T1543.003", "FF"},   {"T1053.005", "FF,LL"},
    {"T1055", "FF"},       {"T1068", "FF"},       {"T1134", "FF"},
    {"T1548.002", "FF"},   {"T1574.002", "FF"},   {"T1112", "FF"},
    {"T1562.001", "FF"},   {"T1027", "FF"},       {"T1036.005", "FF"},
    {"T1003.001", "FL"},   {"T1558.003", "FL"},   {"T1021.001", "FL,LL"},
    {"T1021.002", "FL,LL"}, {"T1021.006", "FL,LL"}, {"T1550.002", "FL,LL"},
    {"T1563.002", "FL"},   {"T1135", "FL"},       {"T1018", "FL"},
    {"T1046", "FL"},       {"T1049", "FL"},       {"T1087.002", "FL"},
    {"T1021.004", "LL"},   {"T1080", "LL"},       {"T1570", "LL"},
    {"T1210", "LL,FL"},    {"T1534", "LL"},       {"T1550.003", "LL"},
    {"T1078.002", "LL,FL"}, {"T1098", "LL"},      {"T1556.003", "LL"},
    {"T1484.001", "LL"},   {"T1482", "LL,FL"},    {"T1615", "LL,FF"},
    {"T1041", "LO,FO"},    {"T1048.003", "LO"},   {"T1567.002", "LO"},
    {"T1486", "LO"},       {"T1490", "LO"},       {"T1485", "LO"},
    {"T1530", "LO,FO"},    {"T1005", "LO"},       {"T1039", "LO"},
    {"T1025", "LO"},       {"T1114.002", "LO"},   {"T1213.002", "LO"},
    {"T1020", "FO"},       {"T1052.001", "FO"},   {"T1537", "FO,LO"},
    {"T1560.001", "FO,LO"}, {"T1074.002", "FO"},  {"T1119", "FO"},
};

const double kUniformPayoff = 0.9;

Stage stage_of_char(char c) {
    switch (c) {
    case 'E': return Stage::Entry;
    case 'F': return Stage::Foothold;
    case 'L': return Stage::Lateral;
    case 'O': return Stage::Objective;
    }
    throw ParamError(std::string("bad stage letter '") + c + "'");
}

std::vector<std::string> split_commas(const char* s) {
    std::vector<std::string> out;
    std::string cur;
    for (const char* p = s; *p; ++p) {
        if (*p == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += *p;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace

Catalogs default_catalogs() {
    Catalogs cat;
    for (const auto& row : kPolicies) {
        Policy p;
        p.id = row.id;
        p.domain = row.domain;
        p.mode = row.mode;
        p.effectiveness = row.eff;
        p.covered_techniques = split_commas(row.covers);
        cat.policies.push_back(std::move(p));
    }
    for (const auto& row : kTechniques) {
        Technique t;
        t.id = row.id;
        t.payoff = kUniformPayoff;
        for (const auto& mv : split_commas(row.moves)) {
            t.transitions.emplace_back(stage_of_char(mv[0]), stage_of_char(mv[1]));
        }
        cat.techniques.push_back(std::move(t));
    }
    return cat;
}

namespace {

struct PairKey {
    int src;
    int dst;
    bool operator<(const PairKey& o) const {
        return src != o.src ? src < o.src : dst < o.dst;
    }
};

AttackGraph build_layered(int n_nodes, int n_edges, const Catalogs& cat, Rng& rng) {
    int inner = n_nodes - 2;
    int nf = std::max(1, inner * 2 / 5);
    int nl = inner - nf;
    if (nl < 1) throw ParamError("too few nodes for a layered graph");

    std::vector<std::string> ids;
    std::vector<Stage> stages;
    ids.push_back("entry");
    stages.push_back(Stage::Entry);
    char buf[16];
    for (int i = 1; i <= nf; ++i) {
        std::snprintf(buf, sizeof buf, "f%03d", i);
        ids.push_back(buf);
        stages.push_back(Stage::Foothold);
    }
    for (int i = 1; i <= nl; ++i) {
        std::snprintf(buf, sizeof buf, "l%03d", i);
        ids.push_back(buf);
        stages.push_back(Stage::Lateral);
    }
    ids.push_back("objective");
    stages.push_back(Stage::Objective);

    const int entry = 0;
    const int f0 = 1;                 // first foothold
    const int l0 = 1 + nf;            // first lateral
    const int obj = n_nodes - 1;
    auto fnode = [&](int i) { return f0 + i; }; // i in [0, nf)
    auto lnode = [&](int i) { return l0 + i; }; // i in [0, nl)

    std::set<PairKey> used;
    std::vector<PairKey> order;
    auto add_pair = [&](int s, int d) {
        if (used.insert({s, d}).second) order.push_back({s, d});
    };

    // spine
    add_pair(entry, fnode(0));
    add_pair(fnode(0), lnode(0));
    add_pair(lnode(0), obj);

    // every foothold reachable
    for (int i = 1; i < nf; ++i) {
        if (rng.bernoulli(0.5) || i == 1) add_pair(entry, fnode(i));
        else add_pair(fnode(static_cast<int>(rng.next_below(i))), fnode(i));
    }
    // every lateral reachable
    for (int i = 1; i < nl; ++i) {
        if (rng.bernoulli(0.6) || i == 1) {
            add_pair(fnode(static_cast<int>(rng.next_below(nf))), lnode(i));
        } else {
            add_pair(lnode(static_cast<int>(rng.next_below(i))), lnode(i));
        }
    }
    // every foothold leads somewhere
    for (int i = 0; i < nf; ++i) {
        add_pair(fnode(i), lnode(static_cast<int>(rng.next_below(nl))));
    }
    // every lateral leads onward; the last must hit the objective
    for (int i = 0; i < nl; ++i) {
        if (i + 1 >= nl || rng.bernoulli(0.3)) {
            add_pair(lnode(i), obj);
        } else {
            add_pair(lnode(i), lnode(i + 1 + static_cast<int>(rng.next_below(nl - i - 1))));
        }
    }
    if (static_cast<int>(order.size()) > n_edges) {
        throw ParamError("edge budget below connectivity minimum for this size");
    }

    // all remaining admissible pairs in canonical order
    std::vector<PairKey> pool;
    auto offer = [&](int s, int d) {
        if (used.count({s, d}) == 0) pool.push_back({s, d});
    };
    for (int i = 0; i < nf; ++i) offer(entry, fnode(i));
    for (int i = 0; i < nf; ++i)
        for (int j = i + 1; j < nf; ++j) offer(fnode(i), fnode(j));
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nl; ++j) offer(fnode(i), lnode(j));
    for (int i = 0; i < nl; ++i)
        for (int j = i + 1; j < nl; ++j) offer(lnode(i), lnode(j));
    for (int i = 0; i < nl; ++i) offer(lnode(i), obj);
    for (int i = 0; i < nf; ++i) offer(fnode(i), obj);

    int need = n_edges - static_cast<int>(order.size());
    if (need > static_cast<int>(pool.size())) {
        throw ParamError("edge budget exceeds admissible pair capacity for this size");
    }
    for (int i = 0; i < need; ++i) { // partial Fisher-Yates
        std::size_t j = i + rng.next_below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        order.push_back(pool[i]);
    }

    // stage-pair -> candidate techniques, catalog order
    std::map<std::pair<int, int>, std::vector<const Technique*>> by_move;
    for (const auto& t : cat.techniques) {
        for (const auto& mv : t.transitions) {
            by_move[{static_cast<int>(mv.first), static_cast<int>(mv.second)}].push_back(&t);
        }
    }

    AttackGraph g;
    for (int i = 0; i < n_nodes; ++i) g.add_node({ids[i], stages[i]});
    int eid = 0;
    for (const auto& pk : order) {
        Edge e;
        std::snprintf(buf, sizeof buf, "e%04d", ++eid);
        e.id = buf;
        e.src = ids[pk.src];
        e.dst = ids[pk.dst];
        auto& cands =
            by_move[{static_cast<int>(stages[pk.src]), static_cast<int>(stages[pk.dst])}];
        if (cands.empty()) throw ParamError("no technique admits a generated stage pair");
        const Technique* t = cands[rng.next_below(cands.size())];
        e.technique = t->id;
        switch (stages[pk.dst]) {
        case Stage::Foothold: e.payoff = rng.uniform(0.2, 0.5); break;
        case Stage::Lateral: e.payoff = rng.uniform(0.4, 0.7); break;
        default: e.payoff = rng.uniform(0.7, kUniformPayoff); break;
        }
        e.block = rng.uniform(0.0, 0.15);
        e.detect = 0.1;
        for (const Policy* p : cat.policies_covering(t->id)) {
            e.policy_effectiveness[p->id] = p->effectiveness;
        }
        g.add_edge(e);
    }
    g.finalize();
    return g;
}

} // namespace

AttackGraph generate_graph(const GenSpec& spec) {
    int nodes = spec.nodes, edges = spec.edges;
    if (nodes <= 0 || edges <= 0) {
        if (spec.size == "small") {
            nodes = 20;
            edges = 50;
        } else if (spec.size == "medium") {
            nodes = 64;
            edges = 200;
        } else if (spec.size == "large") {
            nodes = 240;
            edges = 800;
        } else {
            throw ParamError("unknown size '" + spec.size + "'");
        }
    }
    if (nodes < 4) throw ParamError("need at least 4 nodes");
    Catalogs cat = default_catalogs();
    for (int attempt = 0; attempt < 8; ++attempt) {
        Rng rng(derive_seed(spec.seed, "gen." + std::to_string(attempt)));
        AttackGraph g = build_layered(nodes, edges, cat, rng);
        if (game_value(g) >= 0.01) return g;
    }
    throw ParamError("generation repeatedly produced a near-zero-value graph");
}

Interval wilson_interval(int successes, int trials, double z) {
    if (trials <= 0) return {0.0, 1.0};
    double n = trials;
    double p = static_cast<double>(successes) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (p + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // The closed form hits the boundary exactly at 0/n and n/n; snap there so
    // rounding residue from the sqrt never leaks into reports.
    double lo = (successes == 0) ? 0.0 : std::max(0.0, center - half);
    double hi = (successes == trials) ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Interval bootstrap_ci(const std::vector<double>& values, int resamples, std::uint64_t seed,
                      double lo_pct, double hi_pct) {
    if (values.empty()) return {0.0, 0.0};
    if (values.size() == 1) return {values[0], values[0]};
    Rng rng(derive_seed(seed, "bootstrap"));
    std::vector<double> meds;
    meds.reserve(resamples);
    std::vector<double> sample(values.size());
    for (int r = 0; r < resamples; ++r) {
        for (auto& s : sample) s = values[rng.next_below(values.size())];
        meds.push_back(median(sample));
    }
    std::sort(meds.begin(), meds.end());
    auto pct = [&](double p) {
        double idx = p / 100.0 * static_cast<double>(meds.size() - 1);
        std::size_t lo = static_cast<std::size_t>(idx);
        if (lo + 1 >= meds.size()) return meds.back();
        double frac = idx - static_cast<double>(lo);
        return meds[lo] * (1.0 - frac) + meds[lo + 1] * frac;
    };
    return {pct(lo_pct), pct(hi_pct)};
}

double round_sig(double x, int digits) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    digits = std::clamp(digits, 1, 17);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return std::strtod(buf, nullptr);
}

CorpusReport run_corpus(int n_graphs, const std::string& size, std::uint64_t seed,
                        const LoopConfig& base_cfg) {
    if (n_graphs < 1) throw ParamError("n_graphs must be >= 1");
    Catalogs cat = default_catalogs();
    CorpusReport rep;
    rep.size = size;
    rep.mode = base_cfg.mode;
    rep.n_graphs = n_graphs;
    rep.seed = seed;

    std::vector<double> rounds, gaps, fit_bs;
    for (int i = 0; i < n_graphs; ++i) {
        char gid[16];
        std::snprintf(gid, sizeof gid, "g%03d", i);
        GenSpec gs;
        gs.size = size;
        gs.seed = derive_seed(seed, std::string("graph/") + gid);
        AttackGraph g = generate_graph(gs);
        LoopConfig cfg = base_cfg;
        cfg.seed = derive_seed(seed, std::string("loop/") + gid);
        RunResult res = run_experiment(g, cat, cfg);

        GraphOutcome o;
        o.graph_id = gid;
        o.rounds = res.rounds;
        o.stop_code = res.stop_code;
        o.value_monotone = check_value_monotone(res.ledger, 1e-12).ok;
        o.lyapunov_monotone = check_lyapunov_monotone(res.ledger, 1e-12).ok;
        o.iss_ok = check_iss_bound(res.ledger, 1e-12).ok;
        o.final_s = res.final_s;
        o.final_v = res.final_v;
        const RoundRecord& last = res.ledger.back();
        o.final_gap = std::fabs(last.s_truth - last.s_belief);
        InnovationDecayCheck idc = check_innovation_decay(res.ledger);
        o.fit_b = idc.fit.degenerate ? 0.0 : idc.fit.b;
        o.fit_ok = idc.ok;
        rep.graphs.push_back(o);

        rounds.push_back(static_cast<double>(res.rounds));
        gaps.push_back(o.final_gap);
        if (!idc.fit.degenerate) fit_bs.push_back(idc.fit.b);

        rep.agg.value_monotone_pass += o.value_monotone ? 1 : 0;
        rep.agg.lyapunov_monotone_pass += o.lyapunov_monotone ? 1 : 0;
        rep.agg.iss_pass += o.iss_ok ? 1 : 0;
        rep.agg.fit_pass += o.fit_ok ? 1 : 0;
        rep.agg.stop_reasons[o.stop_code] += 1;
    }
    std::sort(rep.graphs.begin(), rep.graphs.end(),
              [](const GraphOutcome& a, const GraphOutcome& b) { return a.graph_id < b.graph_id; });

    int both = 0;
    for (const auto& o : rep.graphs) both += (o.value_monotone && o.lyapunov_monotone) ? 1 : 0;
    rep.agg.monotone_wilson = wilson_interval(both, n_graphs);
    rep.agg.iss_wilson = wilson_interval(rep.agg.iss_pass, n_graphs);
    double sum = 0.0;
    for (double r : rounds) sum += r;
    rep.agg.mean_rounds = sum / static_cast<double>(n_graphs);
    rep.agg.median_rounds = median(rounds);
    rep.agg.rounds_ci = bootstrap_ci(rounds);
    rep.agg.median_gap = median(gaps);
    rep.agg.gap_ci = bootstrap_ci(gaps);
    rep.agg.median_fit_b = median(fit_bs);
    return rep;
}

std::string CorpusReport::to_json_text(int indent) const {
    auto num = [](double v) { return round_sig(v, 12); };
    json graphs_j = json::array();
    for (const auto& o : graphs) {
        graphs_j.push_back(json{{"graph_id", o.graph_id},
                                {"rounds", o.rounds},
                                {"stop_code", o.stop_code},
                                {"value_monotone", o.value_monotone},
                                {"lyapunov_monotone", o.lyapunov_monotone},
                                {"iss_ok", o.iss_ok},
                                {"final_s", num(o.final_s)},
                                {"final_v", num(o.final_v)},
                                {"final_gap", num(o.final_gap)},
                                {"fit_b", num(o.fit_b)},
                                {"fit_ok", o.fit_ok}});
    }
    json agg_j{{"value_monotone_pass", agg.value_monotone_pass},
               {"lyapunov_monotone_pass", agg.lyapunov_monotone_pass},
               {"monotone_wilson", {num(agg.monotone_wilson.lo), num(agg.monotone_wilson.hi)}},
               {"iss_pass", agg.iss_pass},
               {"iss_wilson", {num(agg.iss_wilson.lo), num(agg.iss_wilson.hi)}},
               {"mean_rounds", num(agg.mean_rounds)},
               {"median_rounds", num(agg.median_rounds)},
               {"rounds_ci", {num(agg.rounds_ci.lo), num(agg.rounds_ci.hi)}},
               {"median_gap", num(agg.median_gap)},
               {"gap_ci", {num(agg.gap_ci.lo), num(agg.gap_ci.hi)}},
               {"median_fit_b", num(agg.median_fit_b)},
               {"fit_pass", agg.fit_pass},
               {"stop_reasons", agg.stop_reasons}};
    json j{{"size", size},
           {"mode", loop_mode_name(mode)},
           {"n_graphs", n_graphs},
           {"seed", seed},
           {"aggregates", agg_j},
           {"graphs", graphs_j}};
    return indent < 0 ? j.dump() : j.dump(indent);
}

} // namespace edrloop
