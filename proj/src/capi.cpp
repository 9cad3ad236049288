#include "edrloop/edrloop.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "edrloop/certificate.hpp"
#include "edrloop/errors.hpp"
#include "edrloop/harness.hpp"
#include "edrloop/loop.hpp"
#include "edrloop/tools.hpp"

using nlohmann::json;

struct edrl_graph {
    edrloop::AttackGraph g;
};

struct edrl_session {
    edrloop::ToolSession session;
};

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& msg) { t_last_error = msg; }

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p != nullptr) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

template <typename F>
edrl_status guarded(F&& f) {
    try {
        return f();
    } catch (const edrloop::SchemaError& e) {
        set_error(e.what());
        return EDRL_ERR_SCHEMA;
    } catch (const edrloop::ParamError& e) {
        set_error(e.what());
        return EDRL_ERR_PARAM;
    } catch (const std::exception& e) {
        set_error(e.what());
        return EDRL_ERR_INTERNAL;
    } catch (...) {
        set_error("unknown failure");
        return EDRL_ERR_INTERNAL;
    }
}

edrl_status need(bool ok, const char* what) {
    if (!ok) {
        set_error(std::string("null argument: ") + what);
        return EDRL_ERR_NULL_ARG;
    }
    return EDRL_OK;
}

edrloop::LoopConfig config_from(const char* config_json) {
    if (config_json == nullptr || *config_json == '\0') return {};
    return edrloop::LoopConfig::from_json_text(config_json);
}

edrloop::Catalogs catalogs_from(const char* catalogs_json) {
    if (catalogs_json == nullptr || *catalogs_json == '\0') {
        return edrloop::default_catalogs();
    }
    return edrloop::Catalogs::from_json_text(catalogs_json);
}

json fit_to_json(const edrloop::DecayFit& f) {
    return json{{"a", f.a},         {"b", f.b},
                {"c", f.c},         {"sse", f.sse},
                {"points", f.points}, {"degenerate", f.degenerate}};
}

json ledger_checks_json(const std::vector<edrloop::RoundRecord>& ledger, double tol) {
    edrloop::MonotoneCheck vm = edrloop::check_value_monotone(ledger, tol);
    edrloop::MonotoneCheck lm = edrloop::check_lyapunov_monotone(ledger, tol);
    edrloop::IssBoundCheck ib = edrloop::check_iss_bound(ledger, tol);
    edrloop::InnovationDecayCheck idc = edrloop::check_innovation_decay(ledger);
    return json{
        {"value_monotone",
         {{"ok", vm.ok}, {"first_violation", vm.first_violation}, {"worst_rise", vm.worst_rise}}},
        {"lyapunov_monotone",
         {{"ok", lm.ok}, {"first_violation", lm.first_violation}, {"worst_rise", lm.worst_rise}}},
        {"iss",
         {{"ok", ib.ok},
          {"spikes_ok", ib.spikes_ok},
          {"drift_ok", ib.drift_ok},
          {"first_violation", ib.first_violation},
          {"rounds_condition_held", ib.rounds_condition_held}}},
        {"innovation_decay", {{"ok", idc.ok}, {"fit", fit_to_json(idc.fit)}}}};
}

} // namespace

extern "C" {

const char* edrl_version(void) { return "1.0.0"; }

const char* edrl_last_error(void) { return t_last_error.c_str(); }

void edrl_string_free(char* s) { std::free(s); }

edrl_status edrl_graph_parse(const char* json_text, edrl_graph** out) {
    if (edrl_status st = need(json_text != nullptr, "json_text"); st != EDRL_OK) return st;
    if (edrl_status st = need(out != nullptr, "out"); st != EDRL_OK) return st;
    return guarded([&] {
        auto g = edrloop::AttackGraph::from_json_text(json_text);
        g.finalize();
        *out = new edrl_graph{std::move(g)};
        return EDRL_OK;
    });
}

edrl_status edrl_graph_generate(const char* size, uint64_t seed, int nodes, int edges,
                                edrl_graph** out) {
    if (edrl_status st = need(size != nullptr, "size"); st != EDRL_OK) return st;
    if (edrl_status st = need(out != nullptr, "out"); st != EDRL_OK) return st;
    return guarded([&] {
        edrloop::GenSpec spec;
        spec.size = size;
        spec.seed = seed;
        spec.nodes = nodes;
        spec.edges = edges;
        *out = new edrl_graph{edrloop::generate_graph(spec)};
        return EDRL_OK;
    });
}

void edrl_graph_free(edrl_graph* g) { delete g; }

edrl_status edrl_graph_to_json(const edrl_graph* g, int indent, char** out) {
    if (edrl_status st = need(g != nullptr, "g"); st != EDRL_OK) return st;
    if (edrl_status st = need(out != nullptr, "out"); st != EDRL_OK) return st;
    return guarded([&] {
        *out = dup_string(g->g.to_json_text(indent));
        return EDRL_OK;
    });
}

edrl_status edrl_graph_game_value(const edrl_graph* g, double* out) {
    if (edrl_status st = need(g != nullptr, "g"); st != EDRL_OK) return st;
    if (edrl_status st = need(out != nullptr, "out"); st != EDRL_OK) return st;
    return guarded([&] {
        *out = edrloop::game_value(g->g);
        return EDRL_OK;
    });
}

edrl_status edrl_graph_critical_path(const edrl_graph* g, char** json_out) {
    if (edrl_status st = need(g != nullptr, "g"); st != EDRL_OK) return st;
    if (edrl_status st = need(json_out != nullptr, "json_out"); st != EDRL_OK) return st;
    return guarded([&] {
        edrloop::PathResult p = edrloop::critical_path(g->g);
        json j{{"node_sequence", p.node_sequence},
               {"edge_sequence", p.edge_sequence},
               {"survival", p.survival},
               {"max_payoff", p.max_payoff},
               {"value", p.value}};
        *json_out = dup_string(j.dump());
        return EDRL_OK;
    });
}

edrl_status edrl_graph_bottlenecks(const edrl_graph* g, int k, char** json_out) {
    if (edrl_status st = need(g != nullptr, "g"); st != EDRL_OK) return st;
    if (edrl_status st = need(json_out != nullptr, "json_out"); st != EDRL_OK) return st;
    return guarded([&] {
        if (k < 1) throw edrloop::ParamError("k must be >= 1");
        json arr = json::array();
        for (const auto& b : edrloop::bottleneck_edges(g->g, static_cast<std::size_t>(k))) {
            arr.push_back(json{{"edge_id", b.edge_id}, {"score", b.score}});
        }
        *json_out = dup_string(json{{"bottlenecks", arr}}.dump());
        return EDRL_OK;
    });
}

edrl_status edrl_default_catalogs(int indent, char** json_out) {
    if (edrl_status st = need(json_out != nullptr, "json_out"); st != EDRL_OK) return st;
    return guarded([&] {
        *json_out = dup_string(edrloop::default_catalogs().to_json_text(indent));
        return EDRL_OK;
    });
}

edrl_status edrl_catalogs_parse(const char* json_text, int indent, char** json_out) {
    if (edrl_status st = need(json_text != nullptr, "json_text"); st != EDRL_OK) return st;
    if (edrl_status st = need(json_out != nullptr, "json_out"); st != EDRL_OK) return st;
    return guarded([&] {
        *json_out = dup_string(edrloop::Catalogs::from_json_text(json_text).to_json_text(indent));
        return EDRL_OK;
    });
}

edrl_status edrl_config_resolve(const char* config_json, int apply_env, char** json_out) {
    if (edrl_status st = need(json_out != nullptr, "json_out"); st != EDRL_OK) return st;
    return guarded([&] {
        edrloop::LoopConfig cfg = config_from(config_json);
        if (apply_env != 0) edrloop::apply_env_overrides(cfg);
        *json_out = dup_string(cfg.to_json_text());
        return EDRL_OK;
    });
}

edrl_status edrl_run_experiment(const edrl_graph* g, const char* config_json,
                                const char* catalogs_json, char** summary_json_out,
                                char** ledger_jsonl_out) {
    if (edrl_status st = need(g != nullptr, "g"); st != EDRL_OK) return st;
    return guarded([&] {
        edrloop::LoopConfig cfg = config_from(config_json);
        edrloop::Catalogs cat = catalogs_from(catalogs_json);
        edrloop::RunResult res = edrloop::run_experiment(g->g, cat, cfg);
        if (summary_json_out != nullptr) {
            json j{{"stop_code", res.stop_code},
                   {"rounds", res.rounds},
                   {"final_s", res.final_s},
                   {"final_v", res.final_v},
                   {"checks", ledger_checks_json(res.ledger, 1e-12)}};
            *summary_json_out = dup_string(j.dump());
        }
        if (ledger_jsonl_out != nullptr) {
            *ledger_jsonl_out = dup_string(edrloop::ledger_to_jsonl(res.ledger));
        }
        return EDRL_OK;
    });
}

edrl_status edrl_run_corpus(int n_graphs, const char* size, uint64_t seed,
                            const char* config_json, int indent, char** report_json_out) {
    if (edrl_status st = need(size != nullptr, "size"); st != EDRL_OK) return st;
    if (edrl_status st = need(report_json_out != nullptr, "report_json_out"); st != EDRL_OK)
        return st;
    return guarded([&] {
        edrloop::LoopConfig cfg = config_from(config_json);
        edrloop::CorpusReport rep = edrloop::run_corpus(n_graphs, size, seed, cfg);
        *report_json_out = dup_string(rep.to_json_text(indent));
        return EDRL_OK;
    });
}

edrl_status edrl_check_ledger(const char* ledger_jsonl, double tol, char** checks_json_out) {
    if (edrl_status st = need(ledger_jsonl != nullptr, "ledger_jsonl"); st != EDRL_OK) return st;
    if (edrl_status st = need(checks_json_out != nullptr, "checks_json_out"); st != EDRL_OK)
        return st;
    return guarded([&] {
        auto ledger = edrloop::ledger_from_jsonl(ledger_jsonl);
        *checks_json_out = dup_string(ledger_checks_json(ledger, tol).dump());
        return EDRL_OK;
    });
}

edrl_status edrl_fit_decay(const double* y, size_t n, char** fit_json_out) {
    if (edrl_status st = need(y != nullptr || n == 0, "y"); st != EDRL_OK) return st;
    if (edrl_status st = need(fit_json_out != nullptr, "fit_json_out"); st != EDRL_OK) return st;
    return guarded([&] {
        std::vector<double> series(y, y + n);
        *fit_json_out = dup_string(fit_to_json(edrloop::fit_decay(series)).dump());
        return EDRL_OK;
    });
}

edrl_status edrl_session_open(const edrl_graph* g, const char* role, const char* config_json,
                              const char* catalogs_json, edrl_session** out) {
    if (edrl_status st = need(g != nullptr, "g"); st != EDRL_OK) return st;
    if (edrl_status st = need(role != nullptr, "role"); st != EDRL_OK) return st;
    if (edrl_status st = need(out != nullptr, "out"); st != EDRL_OK) return st;
    return guarded([&] {
        std::string r = role;
        edrloop::Role parsed;
        if (r == "defender") parsed = edrloop::Role::Defender;
        else if (r == "adversary") parsed = edrloop::Role::Adversary;
        else throw edrloop::ParamError("role must be 'defender' or 'adversary'");
        edrloop::LoopConfig cfg = config_from(config_json);
        edrloop::Catalogs cat = catalogs_from(catalogs_json);
        edrloop::LoopState st = edrloop::init_loop(g->g, cat, cfg);
        *out = new edrl_session{edrloop::ToolSession(std::move(st), parsed)};
        return EDRL_OK;
    });
}

void edrl_session_free(edrl_session* s) { delete s; }

edrl_status edrl_session_handshake(const edrl_session* s, char** line_out) {
    if (edrl_status st = need(s != nullptr, "s"); st != EDRL_OK) return st;
    if (edrl_status st = need(line_out != nullptr, "line_out"); st != EDRL_OK) return st;
    return guarded([&] {
        *line_out = dup_string(s->session.handshake_line());
        return EDRL_OK;
    });
}

edrl_status edrl_session_handle(edrl_session* s, const char* request_line,
                                char** response_line_out) {
    if (edrl_status st = need(s != nullptr, "s"); st != EDRL_OK) return st;
    if (edrl_status st = need(request_line != nullptr, "request_line"); st != EDRL_OK) return st;
    if (edrl_status st = need(response_line_out != nullptr, "response_line_out"); st != EDRL_OK)
        return st;
    return guarded([&] {
        *response_line_out = dup_string(s->session.handle_line(request_line));
        return EDRL_OK;
    });
}

} // extern "C"
