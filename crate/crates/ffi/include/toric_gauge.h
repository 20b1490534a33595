#ifndef TORIC_GAUGE_H
#define TORIC_GAUGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TgStatus {
  TG_STATUS_OK = 0,
  TG_STATUS_NULL_POINTER = 1,
  TG_STATUS_INVALID_ARGUMENT = 2,
  TG_STATUS_CONFIG = 3,
  TG_STATUS_BUDGET = 4,
  TG_STATUS_IO = 5,
  TG_STATUS_BUFFER_TOO_SMALL = 6,
  TG_STATUS_PANIC = 7,
} TgStatus;

/**
 * Parsed run configuration.
 */
typedef struct TgConfig TgConfig;

/**
 * Tables produced by one experiment.
 */
typedef struct TgResult TgResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tg_version(void);

/**
 * Message of the last failed call on this thread.
 *
 * # Safety
 * `buf` must point to `len` writable bytes or be null; `needed` must be null or writable.
 */
enum TgStatus tg_last_error(char *buf, size_t len, size_t *needed);

/**
 * Parses configuration text. An empty string gives the defaults.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum TgStatus tg_config_parse(const char *text, struct TgConfig **out);

/**
 * Overrides the master seed.
 *
 * # Safety
 * `cfg` must come from [`tg_config_parse`].
 */
enum TgStatus tg_config_set_seed(struct TgConfig *cfg, uint64_t seed);

/**
 * Overrides the number of trials per point.
 *
 * # Safety
 * `cfg` must come from [`tg_config_parse`].
 */
enum TgStatus tg_config_set_trials(struct TgConfig *cfg, size_t trials);

/**
 * Canonical text of a configuration.
 *
 * # Safety
 * `cfg` must come from [`tg_config_parse`]; see [`tg_last_error`] for the buffer contract.
 */
enum TgStatus tg_config_text(const struct TgConfig *cfg, char *buf, size_t len, size_t *needed);

/**
 * # Safety
 * `cfg` must come from [`tg_config_parse`] and not be used afterwards. Null is ignored.
 */
void tg_config_free(struct TgConfig *cfg);

/**
 * Runs an experiment by name: `validate`, `sample`, `wilson`, `decode`,
 * `phase-scan`, `fidelity-scan` or `realmeas`.
 *
 * # Safety
 * `cfg` must come from [`tg_config_parse`], `experiment` must be NUL-terminated and `out` writable.
 */
enum TgStatus tg_run(const struct TgConfig *cfg, const char *experiment, struct TgResult **out);

/**
 * 1 if every check of a `validate` run passed (always 1 for other experiments), else 0.
 *
 * # Safety
 * `res` must come from [`tg_run`].
 */
int32_t tg_result_ok(const struct TgResult *res);

/**
 * # Safety
 * `res` must come from [`tg_run`].
 */
size_t tg_result_table_count(const struct TgResult *res);

/**
 * File name of table `index`.
 *
 * # Safety
 * `res` must come from [`tg_run`]; see [`tg_last_error`] for the buffer contract.
 */
enum TgStatus tg_result_table_name(const struct TgResult *res,
                                   size_t index,
                                   char *buf,
                                   size_t len,
                                   size_t *needed);

/**
 * CSV text of table `index`, header included.
 *
 * # Safety
 * `res` must come from [`tg_run`]; see [`tg_last_error`] for the buffer contract.
 */
enum TgStatus tg_result_table_csv(const struct TgResult *res,
                                  size_t index,
                                  char *buf,
                                  size_t len,
                                  size_t *needed);

/**
 * # Safety
 * `res` must come from [`tg_run`] and not be used afterwards. Null is ignored.
 */
void tg_result_free(struct TgResult *res);

/**
 * Logical failure rate on a `d`×`d` torus over `t_steps` rounds with an open time boundary.
 * `decoder` is 0 for maximum likelihood, 1 for matching. Pass `INFINITY` for a perfect preparation.
 *
 * # Safety
 * `rate` and `stderr` must be writable.
 */
enum TgStatus tg_failure_rate(size_t d,
                              size_t t_steps,
                              double beta0,
                              double beta,
                              double k,
                              int32_t decoder,
                              size_t trials,
                              uint64_t seed,
                              double *rate,
                              double *stderr);

/**
 * Distance of the realistic readout at angle `t` from the nearest ideal projector, maximised over outcomes.
 *
 * # Safety
 * `out` must be writable.
 */
enum TgStatus tg_coherent_error_magnitude(double t,
                                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TORIC_GAUGE_H */
