#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "edrloop/edrloop.h"

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

[[noreturn]] void die(edrl_status st) {
    std::cerr << "error (" << st << "): " << edrl_last_error() << "\n";
    std::exit(1);
}

void check(edrl_status st) {
    if (st != EDRL_OK) die(st);
}

std::string take(char* s) {
    std::string out = s == nullptr ? "" : s;
    edrl_string_free(s);
    return out;
}

struct ConfigFlags {
    std::string config_path;
    int budget = 0;
    double noise_r = 0, eps_innov = 0, eps_v = 0, lambda = 0;
    double alert_coverage = 0, p_alerted = 0, p_dark = 0, block_cap = 0, telemetry_rate = 0;
    int max_rounds = 0;
    std::uint64_t seed = 0;
    std::string mode;

    CLI::Option* o_budget = nullptr;
    CLI::Option* o_noise_r = nullptr;
    CLI::Option* o_eps_innov = nullptr;
    CLI::Option* o_eps_v = nullptr;
    CLI::Option* o_max_rounds = nullptr;
    CLI::Option* o_lambda = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_alert_coverage = nullptr;
    CLI::Option* o_p_alerted = nullptr;
    CLI::Option* o_p_dark = nullptr;
    CLI::Option* o_block_cap = nullptr;
    CLI::Option* o_telemetry_rate = nullptr;
    CLI::Option* o_mode = nullptr;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "config JSON file");
        o_budget = app->add_option("--budget", budget, "deployments per round");
        o_noise_r = app->add_option("--noise-r", noise_r, "measurement noise R");
        o_eps_innov = app->add_option("--eps-innov", eps_innov, "innovation stop threshold");
        o_eps_v = app->add_option("--eps-v", eps_v, "value plateau threshold");
        o_max_rounds = app->add_option("--max-rounds", max_rounds, "round cap");
        o_lambda = app->add_option("--lambda", lambda, "uncertainty weight in V");
        o_seed = app->add_option("--seed", seed, "loop RNG seed");
        o_alert_coverage =
            app->add_option("--alert-coverage", alert_coverage, "initial belief coverage");
        o_p_alerted = app->add_option("--p-alerted", p_alerted, "initial P for alerted edges");
        o_p_dark = app->add_option("--p-dark", p_dark, "P for newly revealed edges");
        o_block_cap = app->add_option("--block-cap", block_cap, "max achievable block");
        o_telemetry_rate =
            app->add_option("--telemetry-rate", telemetry_rate, "per-edge measurement rate");
        o_mode = app->add_option("--mode", mode,
                                 "defender_only | defender_plus_attacker");
    }

    // defaults < config file < EDRLOOP_* env < explicit flags
    std::string resolve() const {
        std::string base;
        if (!config_path.empty()) base = read_file(config_path);
        char* resolved = nullptr;
        check(edrl_config_resolve(base.empty() ? nullptr : base.c_str(), 1, &resolved));
        json j = json::parse(take(resolved));
        if (o_budget->count()) j["budget"] = budget;
        if (o_noise_r->count()) j["noise_r"] = noise_r;
        if (o_eps_innov->count()) j["eps_innov"] = eps_innov;
        if (o_eps_v->count()) j["eps_v"] = eps_v;
        if (o_max_rounds->count()) j["max_rounds"] = max_rounds;
        if (o_lambda->count()) j["lambda"] = lambda;
        if (o_seed->count()) j["seed"] = seed;
        if (o_alert_coverage->count()) j["alert_coverage"] = alert_coverage;
        if (o_p_alerted->count()) j["p_alerted"] = p_alerted;
        if (o_p_dark->count()) j["p_dark"] = p_dark;
        if (o_block_cap->count()) j["block_cap"] = block_cap;
        if (o_telemetry_rate->count()) j["telemetry_rate"] = telemetry_rate;
        if (o_mode->count()) j["mode"] = mode;
        return j.dump();
    }
};

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (text.empty() || text.back() != '\n') std::cout << "\n";
    } else {
        write_file(out_path, text.back() == '\n' ? text : text + "\n");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"attack-graph control loop simulator"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "emit a synthetic attack graph");
    std::string gen_size = "small", gen_out;
    std::uint64_t gen_seed = 42;
    int gen_nodes = 0, gen_edges = 0, gen_indent = 2;
    gen->add_option("--size", gen_size, "small | medium | large");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--nodes", gen_nodes, "node count override");
    gen->add_option("--edges", gen_edges, "edge count override");
    gen->add_option("--indent", gen_indent, "JSON indent (-1 = compact)");
    gen->add_option("-o,--output", gen_out, "output file (default stdout)");

    // run
    auto* run = app.add_subcommand("run", "run one control-loop experiment");
    std::string run_graph, run_ledger, run_summary;
    int run_indent = 2;
    ConfigFlags run_cfg;
    run->add_option("--graph", run_graph, "attack graph JSON file")->required();
    run->add_option("--ledger", run_ledger, "write the round ledger (JSON Lines)");
    run->add_option("--summary", run_summary, "write the run summary (default stdout)");
    run->add_option("--indent", run_indent, "summary indent (-1 = compact)");
    run_cfg.attach(run);

    // corpus
    auto* corpus = app.add_subcommand("corpus", "run a benchmark corpus");
    int corpus_n = 50, corpus_indent = 2;
    std::string corpus_size = "small", corpus_out;
    std::uint64_t corpus_seed = 42;
    ConfigFlags corpus_cfg;
    corpus->add_option("--n", corpus_n, "number of graphs");
    corpus->add_option("--size", corpus_size, "small | medium | large");
    corpus->add_option("--corpus-seed", corpus_seed, "corpus derivation seed");
    corpus->add_option("--indent", corpus_indent, "report indent (-1 = compact)");
    corpus->add_option("-o,--output", corpus_out, "report file (default stdout)");
    corpus_cfg.attach(corpus);

    // validate
    auto* validate = app.add_subcommand("validate", "check graph/catalog/ledger documents");
    std::string val_graph, val_catalogs, val_ledger;
    double val_tol = 1e-12;
    validate->add_option("--graph", val_graph, "attack graph JSON file");
    validate->add_option("--catalogs", val_catalogs, "catalog JSON file");
    validate->add_option("--ledger", val_ledger, "round ledger JSON Lines file");
    validate->add_option("--tol", val_tol, "certificate tolerance");

    // serve-tools
    auto* serve = app.add_subcommand("serve-tools", "NDJSON tool session on stdio");
    std::string serve_graph, serve_role = "defender", serve_catalogs;
    ConfigFlags serve_cfg;
    serve->add_option("--graph", serve_graph, "attack graph JSON file")->required();
    serve->add_option("--role", serve_role, "defender | adversary");
    serve->add_option("--catalogs", serve_catalogs, "catalog JSON file (default built-in)");
    serve_cfg.attach(serve);

    // fit-decay
    auto* fit = app.add_subcommand("fit-decay", "fit a*b^k + c to a series");
    std::string fit_input, fit_ledger;
    fit->add_option("--input", fit_input, "JSON array of numbers");
    fit->add_option("--ledger", fit_ledger, "extract per-round mean innovation from a ledger");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            edrl_graph* g = nullptr;
            check(edrl_graph_generate(gen_size.c_str(), gen_seed, gen_nodes, gen_edges, &g));
            char* text = nullptr;
            check(edrl_graph_to_json(g, gen_indent, &text));
            emit(take(text), gen_out);
            edrl_graph_free(g);
        } else if (run->parsed()) {
            std::string graph_text = read_file(run_graph);
            edrl_graph* g = nullptr;
            check(edrl_graph_parse(graph_text.c_str(), &g));
            std::string cfg = run_cfg.resolve();
            char* summary = nullptr;
            char* ledger = nullptr;
            check(edrl_run_experiment(g, cfg.c_str(), nullptr, &summary, &ledger));
            edrl_graph_free(g);
            std::string summary_s = take(summary);
            if (run_indent >= 0) summary_s = json::parse(summary_s).dump(run_indent);
            if (!run_ledger.empty()) write_file(run_ledger, take(ledger));
            else edrl_string_free(ledger);
            emit(summary_s, run_summary);
        } else if (corpus->parsed()) {
            std::string cfg = corpus_cfg.resolve();
            char* report = nullptr;
            check(edrl_run_corpus(corpus_n, corpus_size.c_str(), corpus_seed, cfg.c_str(),
                                  corpus_indent, &report));
            emit(take(report), corpus_out);
        } else if (validate->parsed()) {
            bool any = false;
            if (!val_graph.empty()) {
                any = true;
                std::string text = read_file(val_graph);
                edrl_graph* g = nullptr;
                check(edrl_graph_parse(text.c_str(), &g));
                double s = 0.0;
                check(edrl_graph_game_value(g, &s));
                json doc = json::parse(text);
                std::cout << "graph: OK (" << doc["nodes"].size() << " nodes, "
                          << doc["edges"].size() << " edges, game value " << s << ")\n";
                edrl_graph_free(g);
            }
            if (!val_catalogs.empty()) {
                any = true;
                std::string text = read_file(val_catalogs);
                char* norm = nullptr;
                check(edrl_catalogs_parse(text.c_str(), -1, &norm));
                json doc = json::parse(take(norm));
                std::cout << "catalogs: OK (" << doc["policies"].size() << " policies, "
                          << doc["techniques"].size() << " techniques)\n";
            }
            if (!val_ledger.empty()) {
                any = true;
                std::string text = read_file(val_ledger);
                char* checks = nullptr;
                check(edrl_check_ledger(text.c_str(), val_tol, &checks));
                std::cout << json::parse(take(checks)).dump(2) << "\n";
            }
            if (!any) {
                std::cerr << "nothing to validate: pass --graph, --catalogs, or --ledger\n";
                return 1;
            }
        } else if (serve->parsed()) {
            std::string graph_text = read_file(serve_graph);
            edrl_graph* g = nullptr;
            check(edrl_graph_parse(graph_text.c_str(), &g));
            std::string cfg = serve_cfg.resolve();
            std::string cats;
            if (!serve_catalogs.empty()) cats = read_file(serve_catalogs);
            edrl_session* s = nullptr;
            check(edrl_session_open(g, serve_role.c_str(), cfg.c_str(),
                                    cats.empty() ? nullptr : cats.c_str(), &s));
            edrl_graph_free(g);
            char* hello = nullptr;
            check(edrl_session_handshake(s, &hello));
            std::cout << take(hello) << "\n" << std::flush;
            std::string line;
            while (std::getline(std::cin, line)) {
                if (line.empty()) continue;
                char* resp = nullptr;
                check(edrl_session_handle(s, line.c_str(), &resp));
                std::cout << take(resp) << "\n" << std::flush;
            }
            edrl_session_free(s);
        } else if (fit->parsed()) {
            std::vector<double> series;
            if (!fit_input.empty()) {
                json arr = json::parse(read_file(fit_input));
                for (const auto& v : arr) series.push_back(v.get<double>());
            } else if (!fit_ledger.empty()) {
                std::istringstream in(read_file(fit_ledger));
                std::string line;
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    json rec = json::parse(line);
                    if (rec.at("k").get<int>() >= 1) {
                        series.push_back(rec.at("mean_innovation").get<double>());
                    }
                }
            } else {
                std::cerr << "fit-decay needs --input or --ledger\n";
                return 1;
            }
            char* fit_json = nullptr;
            check(edrl_fit_decay(series.data(), series.size(), &fit_json));
            std::cout << json::parse(take(fit_json)).dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
