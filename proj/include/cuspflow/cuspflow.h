#ifndef CUSPFLOW_CUSPFLOW_H
#define CUSPFLOW_CUSPFLOW_H

/* C interface of the cuspflow library. Objects are opaque handles released
 * with the matching *_free function (NULL is accepted). Every call that can
 * fail returns a cf_status; the message of the last failure on the calling
 * thread is available from cf_last_error(). Strings returned as const char*
 * stay valid until the owning handle is freed unless stated otherwise. */

#include <stddef.h>
#include <stdint.h>

#if defined(CUSPFLOW_BUILDING_LIBRARY)
#define CF_API __attribute__((visibility("default")))
#else
#define CF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cf_status {
  CF_OK = 0,
  CF_INVALID_ARGUMENT = 1,
  CF_PRECONDITION_FAILED = 2,
  CF_BUDGET_EXCEEDED = 3,
  CF_ITERATION_CAP_EXCEEDED = 4,
  CF_ILL_CONDITIONED = 5,
  CF_NON_FINITE = 6,
  CF_PARSE_ERROR = 7,
  CF_SCHEMA_MISMATCH = 8,
  CF_IO_ERROR = 9,
  CF_INTERNAL_ERROR = 100
} cf_status;

typedef struct cf_lattice cf_lattice;
typedef struct cf_word cf_word;
typedef struct cf_sumset cf_sumset;
typedef struct cf_config cf_config;
typedef struct cf_report cf_report;
typedef struct cf_aggregate cf_aggregate;

CF_API const char* cf_version(void);
CF_API const char* cf_status_name(cf_status status);
/* Empty string when the last call on this thread succeeded. */
CF_API const char* cf_last_error(void);

/* ---- lattices: columns of an m x m matrix, column-major ---- */
CF_API cf_status cf_lattice_from_basis(int m, const double* basis, cf_lattice** out);
CF_API cf_status cf_lattice_sample(int m, uint64_t seed, uint64_t index, cf_lattice** out);
CF_API int cf_lattice_dim(const cf_lattice* lattice);
/* Unimodular (rescaled) basis, m*m doubles column-major. */
CF_API cf_status cf_lattice_basis(const cf_lattice* lattice, double* out);
/* Shortest vector length; coefficients (m entries, may be NULL) in the given basis. */
CF_API cf_status cf_lattice_systole(const cf_lattice* lattice, double* length, long long* coefficients);
CF_API void cf_lattice_free(cf_lattice* lattice);

/* ---- words in elementary matrices of SL(m, Z), 1-based indices ---- */
/* One "i j k" line per letter; '#' starts a comment. */
CF_API cf_status cf_word_parse(int m, const char* text, cf_word** out);
CF_API cf_status cf_word_unipotent(int i, int j, long long k, int m, cf_word** out);
/* Exact decomposition of a row-major m x m integer matrix of determinant 1. */
CF_API cf_status cf_word_decompose(int m, const long long* entries, cf_word** out);
CF_API size_t cf_word_length(const cf_word* word);
CF_API int cf_word_factor_count(const cf_word* word);
CF_API double cf_word_log_cost(const cf_word* word);
/* Row-major product; CF_PRECONDITION_FAILED if an entry does not fit in 64 bits. */
CF_API cf_status cf_word_eval(const cf_word* word, long long* entries);
CF_API const char* cf_word_text(const cf_word* word);
CF_API void cf_word_free(cf_word* word);

/* ---- symmetric subsets of B_n(Z^2) ---- */
CF_API cf_status cf_sumset_random(int n, double p, uint64_t seed, uint64_t index, cf_sumset** out);
/* points holds count (a, b) pairs; the set must be closed under negation. */
CF_API cf_status cf_sumset_from_points(int n, const int* points, size_t count, cf_sumset** out);
CF_API int cf_sumset_radius(const cf_sumset* set);
CF_API double cf_sumset_density(const cf_sumset* set);
CF_API cf_status cf_sumset_verify_cover(const cf_sumset* set, double delta, int* covered);
/* Smallest k with B_n inside B_f + (at most k summands); -1 if none up to k_cap. */
CF_API cf_status cf_sumset_minimal_k(const cf_sumset* set, int f_radius, long long k_cap, long long* k);
CF_API cf_status cf_sumset_save(const cf_sumset* set, const char* path);
CF_API cf_status cf_sumset_load(const char* path, cf_sumset** out);
CF_API void cf_sumset_free(cf_sumset* set);

/* ---- experiments ---- */
CF_API size_t cf_experiment_count(void);
/* NULL past the end. Static storage. */
CF_API const char* cf_experiment_id(size_t index);
/* Parameters, defaults and CSV columns. Static storage. */
CF_API cf_status cf_experiment_help(const char* id, const char** text);

CF_API cf_status cf_config_new(const char* experiment, cf_config** out);
CF_API cf_status cf_config_parse(const char* toml_text, cf_config** out);
CF_API cf_status cf_config_load(const char* path, cf_config** out);
CF_API const char* cf_config_experiment(const cf_config* config);
CF_API cf_status cf_config_set_experiment(cf_config* config, const char* experiment);
CF_API cf_status cf_config_set_seed(cf_config* config, uint64_t seed);
CF_API cf_status cf_config_set_threads(cf_config* config, int threads);
/* A non-positive budget removes the cap. */
CF_API cf_status cf_config_set_budget(cf_config* config, double budget);
/* value is a JSON literal, e.g. "1000" or "[0.3, 0.5]". */
CF_API cf_status cf_config_set_param(cf_config* config, const char* name, const char* json_value);
/* Checks every parameter; on failure cf_last_error lists all problems. */
CF_API cf_status cf_config_validate(const cf_config* config, double* work_units);
CF_API void cf_config_free(cf_config* config);

CF_API cf_status cf_run(const cf_config* config, cf_report** out);
CF_API int cf_report_passed(const cf_report* report);
CF_API double cf_report_wall_seconds(const cf_report* report);
/* summary.json contents. */
CF_API const char* cf_report_summary(const cf_report* report);
/* CSV tables, summary.json and run_meta.json into dir (created if missing). */
CF_API cf_status cf_report_write(const cf_report* report, const char* dir);
CF_API void cf_report_free(cf_report* report);

/* paths are summary.json files or run directories. */
CF_API cf_status cf_aggregate_files(const char* const* paths, size_t count, cf_aggregate** out);
CF_API int cf_aggregate_passed(const cf_aggregate* aggregate);
CF_API const char* cf_aggregate_text(const cf_aggregate* aggregate);
CF_API void cf_aggregate_free(cf_aggregate* aggregate);

#ifdef __cplusplus
}
#endif

#endif
