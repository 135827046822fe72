#ifndef SPOTCHECK_H
#define SPOTCHECK_H

#include <stddef.h>
#include <stdint.h>

#if defined(SPOTCHECK_BUILDING_LIBRARY)
#define SC_API __attribute__((visibility("default")))
#else
#define SC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  SC_OK = 0,
  SC_ERR_VALIDATION = 2, /* bad input, configuration or constraint violation */
  SC_ERR_NUMERICAL = 3,  /* divergence, non-finite values, degenerate data */
  SC_ERR_IO = 4,
  SC_ERR_INTERNAL = 5
} sc_status;

typedef struct sc_suite sc_suite;
typedef struct sc_outputs sc_outputs;
typedef struct sc_hypotheses sc_hypotheses;

/* Message of the last failing call on this thread; empty after success. */
SC_API const char* sc_last_error(void);

/* Frees strings returned through char** out-parameters. */
SC_API void sc_string_free(char* s);

/* Reads a JSON or TOML configuration file into a JSON document. */
SC_API sc_status sc_config_load(const char* path, char** json_out);

/* Suites. `config_json` may be NULL for defaults. */
SC_API sc_status sc_suite_generate(const char* config_json, uint64_t seed, const char* out_dir, sc_suite** out);
SC_API sc_status sc_suite_open(const char* dir, sc_suite** out);
SC_API size_t sc_suite_size(const sc_suite* suite);
SC_API const char* sc_suite_ec_id(const sc_suite* suite, size_t index);
SC_API void sc_suite_free(sc_suite* suite);

/* Fits the classifier of every trained EC (or verifies the oracle of every oracle
   EC), records verification status. Summary is a JSON array, one entry per EC. */
SC_API sc_status sc_suite_train(sc_suite* suite, const char* config_json, uint64_t seed, char** summary_json);

/* Writes a new run directory with hypotheses per EC. With `import_path` the
   hypotheses are read from `<import_path>/<ec_id>.json` (or from the file itself
   when `ec_id` is given) instead of running PlaneSpot. */
SC_API sc_status sc_suite_discover(sc_suite* suite, const char* config_json, uint64_t seed, const char* import_path,
                                   const char* ec_id, char** summary_json);

/* Scores every run that has hypotheses but no report yet. */
SC_API sc_status sc_suite_eval(sc_suite* suite, char** summary_json);

/* Grid search on a tuning suite; `evaluation` may be NULL. Writes sweep.csv. */
SC_API sc_status sc_suite_sweep(const sc_suite* tuning, const sc_suite* evaluation, const char* config_json,
                                uint64_t seed, const char* out_dir, char** table_json);

/* Aggregate tables and scatter exports over the scored runs of the given suites. */
SC_API sc_status sc_report(const char* const* suite_dirs, size_t count, const char* out_dir);

/* Model outputs (CSV interchange) and single-shot discovery / scoring. */
SC_API sc_status sc_outputs_read_csv(const char* path, sc_outputs** out);
SC_API size_t sc_outputs_count(const sc_outputs* outputs);
SC_API void sc_outputs_free(sc_outputs* outputs);

SC_API sc_status sc_planespot(const sc_outputs* outputs, const char* config_json, uint64_t seed, sc_hypotheses** out);
SC_API sc_status sc_hypotheses_read_json(const char* path, sc_hypotheses** out);
SC_API sc_status sc_hypotheses_to_json(const sc_hypotheses* hyps, char** json_out);
SC_API size_t sc_hypotheses_count(const sc_hypotheses* hyps);
SC_API void sc_hypotheses_free(sc_hypotheses* hyps);

/* `truths_json`: array of image-id arrays. Report JSON as written per run. */
SC_API sc_status sc_evaluate(const sc_hypotheses* hyps, const char* truths_json, const char* config_json,
                             char** report_json);

#ifdef __cplusplus
}
#endif

#endif
