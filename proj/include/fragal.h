#ifndef FRAGAL_H
#define FRAGAL_H

/*
 * fragal — importance-sampling active learning for parametric seismic
 * fragility curves.
 *
 * C interface to the shared library: opaque handles and integer error
 * codes. On any nonzero return, fragal_last_error() gives a thread-local
 * human-readable message. Strings returned through char** are heap
 * allocated and must be released with fragal_string_free().
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
  FRAGAL_OK = 0,
  FRAGAL_ERR_INVALID_ARGUMENT = 1,
  FRAGAL_ERR_IO = 2,
  FRAGAL_ERR_SINGULAR = 3,
  FRAGAL_ERR_DEGENERATE = 4,
  FRAGAL_ERR_RUNTIME = 5
};

typedef struct fragal_config fragal_config;

const char* fragal_version(void);

/* Message for the most recent failure on this thread ("" if none). */
const char* fragal_last_error(void);

void fragal_string_free(char* s);

/* Configuration ----------------------------------------------------------- */

/* Load a study configuration from a JSON file. The file may reference a
 * named preset via {"preset": "..."}; explicit keys override preset
 * defaults. */
int fragal_config_load(const char* path, fragal_config** out);

int fragal_config_from_json(const char* json_text, fragal_config** out);

/* Built-in preset by name (see fragal_preset_names). */
int fragal_config_preset(const char* name, fragal_config** out);

/* Newline-separated list of preset names. */
int fragal_preset_names(char** out_text);

int fragal_config_to_json(const fragal_config* cfg, char** out_text);

/* Full validation; FRAGAL_ERR_INVALID_ARGUMENT with a reason on failure. */
int fragal_config_validate(const fragal_config* cfg);

/* Base seed stored in the configuration (CLI --seed overrides it). */
int fragal_config_get_seed(const fragal_config* cfg, uint64_t* out);

void fragal_config_free(fragal_config* cfg);

/* Operations --------------------------------------------------------------- */

/* Generate the oscillator signal pool + test set into out_dir. */
int fragal_gen_pool(const fragal_config* cfg, const char* out_dir,
                    uint64_t seed, int threads);

/* Run the configured study into out_dir (tables + manifest). Outputs are
 * byte-identical for identical (config, seed) regardless of threads. */
int fragal_run_study(const fragal_config* cfg, const char* out_dir,
                     uint64_t seed, int threads);

/* Build report/ (figure data + summary) inside an existing study dir. */
int fragal_report(const char* study_dir);

/* Small direct computations ------------------------------------------------ */

/* Lognormal fragility value Phi((x - log alpha)/beta) at x = log IM. */
int fragal_fragility_prob(double alpha, double beta, double log_im,
                          double* out);

/* prob-quantile of the chi-square distribution (dof = 2 supported). */
int fragal_chi2_quantile(int dof, double prob, double* out);

#ifdef __cplusplus
}
#endif

#endif /* FRAGAL_H */
