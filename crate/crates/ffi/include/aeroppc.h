#ifndef AEROPPC_H
#define AEROPPC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. Zero is success.
 */
typedef enum AeroppcStatus {
  AEROPPC_STATUS_OK = 0,
  AEROPPC_STATUS_NULL_POINTER = 1,
  AEROPPC_STATUS_INVALID_UTF8 = 2,
  AEROPPC_STATUS_INVALID_ARGUMENT = 3,
  AEROPPC_STATUS_BUFFER_TOO_SMALL = 4,
  AEROPPC_STATUS_OUT_OF_RANGE = 5,
  AEROPPC_STATUS_CONFIG_INVALID = 10,
  AEROPPC_STATUS_IO = 11,
  AEROPPC_STATUS_NON_FINITE_STATE = 12,
  AEROPPC_STATUS_NEAR_SINGULAR_ATTITUDE = 13,
  AEROPPC_STATUS_INFEASIBLE_ENVELOPE = 14,
  AEROPPC_STATUS_DEGENERATE_THRUST = 15,
  AEROPPC_STATUS_NEGATIVE_TIME = 16,
  AEROPPC_STATUS_NON_SKEW_INPUT = 17,
  AEROPPC_STATUS_YAW_ALIGNMENT_SINGULARITY = 18,
  AEROPPC_STATUS_INSUFFICIENT_HISTORY = 19,
  AEROPPC_STATUS_PANIC = 99,
} AeroppcStatus;

/**
 * Controller variants accepted by `aeroppc_trial_run`.
 */
typedef enum AeroppcVariant {
  AEROPPC_VARIANT_PROPOSED = 0,
  AEROPPC_VARIANT_NO_PRESET = 1,
  AEROPPC_VARIANT_NO_ESO = 2,
  AEROPPC_VARIANT_PID = 3,
} AeroppcVariant;

/**
 * Opaque experiment configuration.
 */
typedef struct AeroppcConfig AeroppcConfig;

/**
 * Opaque scalar variable-gain observer.
 */
typedef struct AeroppcEso AeroppcEso;

/**
 * Opaque trial result: the row-major trace and its metadata.
 */
typedef struct AeroppcTrial AeroppcTrial;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static name of a status code, e.g. `"ConfigInvalid"`.
 */
const char *aeroppc_status_name(int status);

/**
 * Copies the last failure message of this thread into `buf` and returns
 * the size it needs including the NUL. Truncates when `len` is smaller.
 */
size_t aeroppc_last_error(char *buf, size_t len);

/**
 * The shipped default configuration.
 */
enum AeroppcStatus aeroppc_config_default(struct AeroppcConfig **out);

/**
 * Parses and validates a TOML configuration.
 */
enum AeroppcStatus aeroppc_config_from_toml(const char *toml, struct AeroppcConfig **out);

/**
 * Loads and validates a TOML configuration file.
 */
enum AeroppcStatus aeroppc_config_load(const char *path, struct AeroppcConfig **out);

/**
 * SHA-256 of the canonical configuration, as 64 hex characters.
 */
enum AeroppcStatus aeroppc_config_hash(const struct AeroppcConfig *config,
                                       char *buf,
                                       size_t len,
                                       size_t *needed);

void aeroppc_config_free(struct AeroppcConfig *config);

/**
 * Runs one closed-loop trial of `scenario` with the given variant and seed.
 */
enum AeroppcStatus aeroppc_trial_run(const struct AeroppcConfig *config,
                                     const char *scenario,
                                     int variant,
                                     uint64_t seed,
                                     struct AeroppcTrial **out);

/**
 * Number of trace rows (control ticks), or 0 for a null handle.
 */
size_t aeroppc_trial_rows(const struct AeroppcTrial *trial);

/**
 * Number of trace columns.
 */
size_t aeroppc_trial_columns(void);

/**
 * Name of trace column `column`.
 */
enum AeroppcStatus aeroppc_trial_column_name(size_t column, char *buf, size_t len, size_t *needed);

/**
 * Borrowed pointer to the row-major trace, valid until the trial is freed.
 * Null for a null handle.
 */
const double *aeroppc_trial_data(const struct AeroppcTrial *trial);

/**
 * One trace value.
 */
enum AeroppcStatus aeroppc_trial_value(const struct AeroppcTrial *trial,
                                       size_t row,
                                       size_t column,
                                       double *out);

/**
 * Writes the trace as CSV.
 */
enum AeroppcStatus aeroppc_trial_write_csv(const struct AeroppcTrial *trial, const char *path);

/**
 * Metadata and summary metrics as a JSON object.
 */
enum AeroppcStatus aeroppc_trial_summary_json(const struct AeroppcTrial *trial,
                                              char *buf,
                                              size_t len,
                                              size_t *needed);

/**
 * SHA-256 of the trace values, as 64 hex characters.
 */
enum AeroppcStatus aeroppc_trial_sha256(const struct AeroppcTrial *trial,
                                        char *buf,
                                        size_t len,
                                        size_t *needed);

void aeroppc_trial_free(struct AeroppcTrial *trial);

/**
 * Scalar observer with gain parameters `w`, `d`, started at `y1_initial`.
 */
enum AeroppcStatus aeroppc_eso_new(double alpha,
                                   double epsilon,
                                   double w,
                                   double d,
                                   double y1_initial,
                                   struct AeroppcEso **out);

/**
 * One observer tick: estimate from `y1`, then advance with input `u`.
 */
enum AeroppcStatus aeroppc_eso_step(struct AeroppcEso *eso,
                                    double y1,
                                    double u,
                                    double dt,
                                    double *estimate);

void aeroppc_eso_free(struct AeroppcEso *eso);

/**
 * Observer gain `g(e)`.
 */
enum AeroppcStatus aeroppc_gain_g(double e, double w, double d, double *out);

/**
 * Single-axis envelope `ρ(t)`.
 */
enum AeroppcStatus aeroppc_rho_at(double rho0, double rho_inf, double decay, double t, double *out);

/**
 * Single-axis preset trajectory `β(t)` and its first two derivatives.
 * Any of the output pointers may be null.
 */
enum AeroppcStatus aeroppc_beta_at(double error0,
                                   double error_rate0,
                                   double c,
                                   double decay,
                                   double t,
                                   double *beta,
                                   double *dbeta,
                                   double *ddbeta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AEROPPC_H */
