/* C interface to the adversarial control-loop simulator. All functions
 * return edrl_status; outputs are heap strings released with
 * edrl_string_free. On failure edrl_last_error() describes the problem. */
#ifndef EDRLOOP_H
#define EDRLOOP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EDRL_API __declspec(dllexport)
#else
#define EDRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum edrl_status {
    EDRL_OK = 0,
    EDRL_ERR_NULL_ARG = 1,
    EDRL_ERR_SCHEMA = 2,   /* malformed input document */
    EDRL_ERR_PARAM = 3,    /* out-of-domain argument */
    EDRL_ERR_INTERNAL = 4
} edrl_status;

typedef struct edrl_graph edrl_graph;
typedef struct edrl_session edrl_session;

EDRL_API const char* edrl_version(void);
/* Thread-local; owned by the library, valid until the next failing call. */
EDRL_API const char* edrl_last_error(void);
EDRL_API void edrl_string_free(char* s);

EDRL_API edrl_status edrl_graph_parse(const char* json_text, edrl_graph** out);
/* size: small | medium | large; nodes/edges 0 = preset for the size. */
EDRL_API edrl_status edrl_graph_generate(const char* size, uint64_t seed, int nodes,
                                         int edges, edrl_graph** out);
EDRL_API void edrl_graph_free(edrl_graph* g);
EDRL_API edrl_status edrl_graph_to_json(const edrl_graph* g, int indent, char** out);
EDRL_API edrl_status edrl_graph_game_value(const edrl_graph* g, double* out);
EDRL_API edrl_status edrl_graph_critical_path(const edrl_graph* g, char** json_out);
EDRL_API edrl_status edrl_graph_bottlenecks(const edrl_graph* g, int k, char** json_out);

EDRL_API edrl_status edrl_default_catalogs(int indent, char** json_out);
/* Validates a catalog document and returns its normalized form. */
EDRL_API edrl_status edrl_catalogs_parse(const char* json_text, int indent, char** json_out);
/* Fill defaults, apply the JSON (NULL = all defaults), then optionally the
 * EDRLOOP_* environment overrides; returns the resolved config document. */
EDRL_API edrl_status edrl_config_resolve(const char* config_json, int apply_env,
                                         char** json_out);

/* One experiment. catalogs_json NULL = built-in catalog. Outputs a summary
 * document and the per-round ledger as JSON Lines. */
EDRL_API edrl_status edrl_run_experiment(const edrl_graph* g, const char* config_json,
                                         const char* catalogs_json, char** summary_json_out,
                                         char** ledger_jsonl_out);
EDRL_API edrl_status edrl_run_corpus(int n_graphs, const char* size, uint64_t seed,
                                     const char* config_json, int indent,
                                     char** report_json_out);
EDRL_API edrl_status edrl_check_ledger(const char* ledger_jsonl, double tol,
                                       char** checks_json_out);
EDRL_API edrl_status edrl_fit_decay(const double* y, size_t n, char** fit_json_out);

/* role: defender | adversary. The session owns a private copy of the loop. */
EDRL_API edrl_status edrl_session_open(const edrl_graph* g, const char* role,
                                       const char* config_json, const char* catalogs_json,
                                       edrl_session** out);
EDRL_API void edrl_session_free(edrl_session* s);
EDRL_API edrl_status edrl_session_handshake(const edrl_session* s, char** line_out);
EDRL_API edrl_status edrl_session_handle(edrl_session* s, const char* request_line,
                                         char** response_line_out);

#ifdef __cplusplus
}
#endif

#endif /* EDRLOOP_H */
