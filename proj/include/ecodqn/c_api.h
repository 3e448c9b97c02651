#ifndef ECODQN_C_API_H
#define ECODQN_C_API_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ECODQN_API __declspec(dllexport)
#else
#define ECODQN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ecodqn_status {
    ECODQN_OK = 0,
    ECODQN_ERR_CONFIG = 2,
    ECODQN_ERR_DATA = 3,
    ECODQN_ERR_NUMERIC = 4,
    ECODQN_ERR_INTERNAL = 5,
    ECODQN_ERR_ARGUMENT = 6
} ecodqn_status;

typedef struct ecodqn_graph ecodqn_graph;
typedef struct ecodqn_corpus ecodqn_corpus;
typedef struct ecodqn_config ecodqn_config;
typedef struct ecodqn_report ecodqn_report;
typedef struct ecodqn_solution ecodqn_solution;

/* Message for the most recent failure on the calling thread ("" if none). */
ECODQN_API const char *ecodqn_last_error(void);
ECODQN_API const char *ecodqn_version(void);

/* ---- graphs ---------------------------------------------------------- */

/* family: "er" or "ba". */
ECODQN_API ecodqn_status ecodqn_graph_generate(const char *family, size_t vertices, double er_p, size_t ba_attach,
                                               int signed_weights, uint64_t seed, ecodqn_graph **out);
/* GSet text format. */
ECODQN_API ecodqn_status ecodqn_graph_read(const char *path, ecodqn_graph **out);
ECODQN_API ecodqn_status ecodqn_graph_write(const ecodqn_graph *g, const char *path);
ECODQN_API size_t ecodqn_graph_vertices(const ecodqn_graph *g);
ECODQN_API size_t ecodqn_graph_edges(const ecodqn_graph *g);
ECODQN_API uint64_t ecodqn_graph_hash(const ecodqn_graph *g);
/* membership: one byte per vertex, nonzero = in S. */
ECODQN_API ecodqn_status ecodqn_graph_cut(const ecodqn_graph *g, const uint8_t *membership, double *out);
ECODQN_API void ecodqn_graph_free(ecodqn_graph *g);

/* ---- corpora --------------------------------------------------------- */

ECODQN_API ecodqn_status ecodqn_corpus_generate(const char *dir, const char *family, size_t vertices, double er_p,
                                                size_t ba_attach, int signed_weights, size_t count, uint64_t seed);
/* A corpus directory or a single graph file. */
ECODQN_API ecodqn_status ecodqn_corpus_open(const char *path, ecodqn_corpus **out);
ECODQN_API size_t ecodqn_corpus_size(const ecodqn_corpus *c);
/* Borrowed; valid while the corpus lives. */
ECODQN_API const ecodqn_graph *ecodqn_corpus_graph(const ecodqn_corpus *c, size_t i);
ECODQN_API const char *ecodqn_corpus_id(const ecodqn_corpus *c, size_t i);
ECODQN_API void ecodqn_corpus_free(ecodqn_corpus *c);

/* ---- training -------------------------------------------------------- */

ECODQN_API ecodqn_status ecodqn_config_load(const char *path, ecodqn_config **out);
ECODQN_API ecodqn_status ecodqn_config_parse(const char *text, ecodqn_config **out);
/* Overrides one key; the result is revalidated. */
ECODQN_API ecodqn_status ecodqn_config_set(ecodqn_config *cfg, const char *key, const char *value);
/* Canonical "key = value" text; owned by the config until the next call. */
ECODQN_API const char *ecodqn_config_text(ecodqn_config *cfg);
ECODQN_API void ecodqn_config_free(ecodqn_config *cfg);

/* Called after each eval_period chunk of steps with the latest holdout ratio;
   return nonzero to stop early. */
typedef int (*ecodqn_progress_fn)(size_t env_steps, size_t total_steps, double mean_ratio, void *user);

/* Trains and writes the checkpoint and learning-curve CSV. When resume_path is
   non-NULL, continues from that checkpoint instead (cfg may then be NULL). */
ECODQN_API ecodqn_status ecodqn_train(const ecodqn_config *cfg, const char *resume_path, const char *checkpoint_path,
                                      const char *curve_path, ecodqn_progress_fn progress, void *user);

/* ---- evaluation ------------------------------------------------------ */

typedef struct ecodqn_eval_options {
    size_t episodes;
    uint64_t seed;
    size_t threads;
    const char *agent;         /* label in reports; may be NULL */
    const char *graph_set;     /* label in reports; may be NULL */
    const char *registry_path; /* best-known cut ledger; may be NULL */
} ecodqn_eval_options;

/* method: "eco" (greedy Q-network from checkpoint_path), "mca-rev" or "mca-irrev". */
ECODQN_API ecodqn_status ecodqn_evaluate(const char *method, const char *checkpoint_path, const ecodqn_corpus *corpus,
                                         const ecodqn_eval_options *opts, ecodqn_report **out);
ECODQN_API double ecodqn_report_mean_ratio(const ecodqn_report *r);
ECODQN_API double ecodqn_report_lower_quartile(const ecodqn_report *r);
ECODQN_API double ecodqn_report_upper_quartile(const ecodqn_report *r);
ECODQN_API double ecodqn_report_single_try_ratio(const ecodqn_report *r);
ECODQN_API double ecodqn_report_seconds_per_action(const ecodqn_report *r);
ECODQN_API size_t ecodqn_report_episode_count(const ecodqn_report *r);
/* Per-episode CSV, per-graph JSONL and one-row summary CSV. */
ECODQN_API ecodqn_status ecodqn_report_write(const ecodqn_report *r, const char *episodes_csv, const char *graphs_jsonl,
                                             const char *summary_csv);
ECODQN_API void ecodqn_report_free(ecodqn_report *r);

/* ---- single instances ------------------------------------------------ */

/* method: "eco", "mca-rev", "mca-irrev" or "exact". checkpoint_path is required for "eco". */
ECODQN_API ecodqn_status ecodqn_solve(const ecodqn_graph *g, const char *method, const char *checkpoint_path,
                                      size_t episodes, uint64_t seed, size_t threads, ecodqn_solution **out);
ECODQN_API double ecodqn_solution_cut(const ecodqn_solution *s);
ECODQN_API double ecodqn_solution_seconds(const ecodqn_solution *s);
ECODQN_API size_t ecodqn_solution_vertices(const ecodqn_solution *s);
/* One byte per vertex. */
ECODQN_API const uint8_t *ecodqn_solution_membership(const ecodqn_solution *s);
/* JSON object with method, cut, membership, episodes and timing. */
ECODQN_API ecodqn_status ecodqn_solution_write(const ecodqn_solution *s, const char *path);
ECODQN_API void ecodqn_solution_free(ecodqn_solution *s);

/* ---- behaviour ------------------------------------------------------- */

/* Greedy traces of a reversible checkpoint on every corpus graph, averaged per
   step and smoothed with a trailing window; writes the series CSV. */
ECODQN_API ecodqn_status ecodqn_behavior(const char *checkpoint_path, const ecodqn_corpus *corpus, uint64_t seed,
                                         size_t window, size_t threads, const char *series_csv, size_t *steps_out);

#ifdef __cplusplus
}
#endif

#endif /* ECODQN_C_API_H */
