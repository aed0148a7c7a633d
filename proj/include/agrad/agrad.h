/* SPDX-FileCopyrightText: 2026 The agrad authors
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef AGRAD_AGRAD_H
#define AGRAD_AGRAD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define AGRAD_API __declspec(dllexport)
#else
#define AGRAD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every function returns one of these. On failure, agrad_last_error() holds a
 * message for the calling thread until its next call into the library. */
typedef enum agrad_status {
  AGRAD_OK = 0,
  AGRAD_ERR_CONFIG = 2, /* invalid configuration value or file content */
  AGRAD_ERR_IO = 3,
  AGRAD_ERR_SHAPE = 4,
  AGRAD_ERR_INVALID_ARGUMENT = 5, /* null pointer or unknown enum string */
  AGRAD_ERR_NUMERIC = 6,
  AGRAD_ERR_STATE = 7,
  AGRAD_ERR_INTERNAL = 9
} agrad_status;

typedef struct agrad_activation agrad_activation;
typedef struct agrad_experiment agrad_experiment;

AGRAD_API const char* agrad_version(void);
AGRAD_API const char* agrad_last_error(void);
/* Dotted config field of the last AGRAD_ERR_CONFIG, or "" when unknown. */
AGRAD_API const char* agrad_last_error_field(void);

/* Strings returned through char** out-parameters are owned by the caller. */
AGRAD_API void agrad_string_free(char* s);

/* ---- quantized noise ---------------------------------------------------- */

AGRAD_API agrad_status agrad_error_probability(int bits, double sigma, double* out);
AGRAD_API agrad_status agrad_sigma_from_ep(int bits, double ep, double* out);
/* out may alias x. */
AGRAD_API agrad_status agrad_reduce_precision(const double* x, size_t n, int bits, double* out);

/* ---- activations -------------------------------------------------------- */

/* kind: relu, leaky-relu, gelu, silu, scaled-gelu, interp-relu-gelu,
 * interp-relu-silu, identity. */
AGRAD_API agrad_status agrad_activation_create(const char* kind, double s, double i, double alpha,
                                               agrad_activation** out);
AGRAD_API void agrad_activation_destroy(agrad_activation* act);
AGRAD_API agrad_status agrad_activation_eval(const agrad_activation* act, const double* x, size_t n, double* out);
AGRAD_API agrad_status agrad_activation_derivative(const agrad_activation* act, const double* x, size_t n,
                                                   double* out);
/* Gradient step discontinuity |f'(x0-) - f'(x0+)|. */
AGRAD_API agrad_status agrad_activation_gsd(const agrad_activation* act, double x0, double eps, double* out);
AGRAD_API agrad_status agrad_activation_ebp(const agrad_activation* act, int bits, double window, double* out);

/* ---- experiments -------------------------------------------------------- */

AGRAD_API agrad_status agrad_experiment_load_file(const char* path, agrad_experiment** out);
AGRAD_API agrad_status agrad_experiment_load_json(const char* json, agrad_experiment** out);
AGRAD_API void agrad_experiment_destroy(agrad_experiment* exp);

AGRAD_API agrad_status agrad_experiment_set_out_dir(agrad_experiment* exp, const char* dir);
AGRAD_API agrad_status agrad_experiment_set_seed(agrad_experiment* exp, uint64_t seed);
AGRAD_API agrad_status agrad_experiment_set_workers(agrad_experiment* exp, size_t workers);
AGRAD_API agrad_status agrad_experiment_set_cap(agrad_experiment* exp, size_t cap);
/* "csv" or "json". */
AGRAD_API agrad_status agrad_experiment_set_format(agrad_experiment* exp, const char* format);
/* Receives one progress line at a time; may be NULL. */
typedef void (*agrad_log_fn)(const char* line, void* user);
AGRAD_API agrad_status agrad_experiment_set_log(agrad_experiment* exp, agrad_log_fn fn, void* user);

/* Resolved configuration as JSON, and its content digest. */
AGRAD_API agrad_status agrad_experiment_config_json(const agrad_experiment* exp, char** out);
AGRAD_API agrad_status agrad_experiment_digest(const agrad_experiment* exp, char** out);
/* "train", "sweep", "analyze-gsd", ... */
AGRAD_API agrad_status agrad_experiment_mode(const agrad_experiment* exp, char** out);

/* Runs the configured mode. *record_json receives the record (or the sweep
 * summary). A diverged training run is AGRAD_OK with status "diverged". */
AGRAD_API agrad_status agrad_experiment_run(agrad_experiment* exp, char** record_json);
/* Like run but refuses configs whose mode is not "sweep". */
AGRAD_API agrad_status agrad_experiment_sweep(agrad_experiment* exp, char** summary_json);
/* Writes train.csv / test.csv for the synthetic dataset section. */
AGRAD_API agrad_status agrad_experiment_generate_dataset(agrad_experiment* exp, char** summary_json);

/* Writes plotdata-<kind>.{csv,json} from the records under dir. expected may
 * be NULL; otherwise cells of that experiment without records are errors. */
AGRAD_API agrad_status agrad_emit(const char* dir, const char* kind, const char* format,
                                  const agrad_experiment* expected, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* AGRAD_AGRAD_H */
