/* C interface to the tilewalk locomotion stack. Generated; do not edit. */

#ifndef TILEWALK_H
#define TILEWALK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Episode progress reported by [`tw_env_step`].
 */
typedef enum TwDone {
  /**
   * The episode continues.
   */
  TwRunning = 0,
  /**
   * Early termination (fall, forbidden contact, divergence).
   */
  TwTerminated = 1,
  /**
   * The phase cap was reached.
   */
  TwTruncated = 2,
} TwDone;

/**
 * Status code of every fallible call.
 */
typedef enum TwStatus {
  /**
   * Success.
   */
  TwOk = 0,
  /**
   * A required pointer argument was null.
   */
  TwNullPointer = 1,
  /**
   * An argument failed validation (bad scenario name, non-UTF-8 path).
   */
  TwInvalidArgument = 2,
  /**
   * The call is illegal in the current state (step before reset, step
   * after the episode ended).
   */
  TwBadState = 3,
  /**
   * A file could not be read or parsed.
   */
  TwIo = 4,
  /**
   * The checkpoint's network shape does not match this build.
   */
  TwShapeMismatch = 5,
  /**
   * The callee panicked; the handle may be poisoned and should only be
   * destroyed.
   */
  TwPanic = 6,
} TwStatus;

/**
 * An environment instance plus its episode bookkeeping.
 */
typedef struct TwEnv TwEnv;

/**
 * A loaded policy checkpoint (network plus observation normalizer).
 */
typedef struct TwPolicy TwPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the current thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `cap` bytes. Returns the full
 * message length including the terminator (0 when no error is stored), so
 * callers can detect truncation.
 */
uintptr_t tw_last_error(char *buf, uintptr_t cap);

/**
 * Number of components in an observation vector.
 */
uintptr_t tw_obs_dim(void);

/**
 * Number of components in an action vector.
 */
uintptr_t tw_act_dim(void);

/**
 * Creates an environment on the named terrain scenario (`"rigid"`,
 * `"t_c2"`..`"t_c5"`, `"t_v2"`, `"t_v8"`) with default robot, physics,
 * and episode settings. On success writes the handle to `out`.
 *
 * # Safety
 * `scenario` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TwStatus tw_env_create(const char *scenario, uint64_t seed, struct TwEnv **out);

/**
 * Frees an environment handle. Null is ignored.
 *
 * # Safety
 * `env` must be a handle from [`tw_env_create`] not yet destroyed.
 */
void tw_env_destroy(struct TwEnv *env);

/**
 * Starts a fresh episode and writes its first observation to `obs_out`
 * (length [`tw_obs_dim`]).
 *
 * # Safety
 * `env` must be a live handle; `obs_out` must point to `tw_obs_dim()`
 * writable doubles.
 */
enum TwStatus tw_env_reset(struct TwEnv *env, double *obs_out);

/**
 * Advances one gait phase under `action` (length [`tw_act_dim`],
 * components clamped to [-1, 1]). Writes the next observation, the phase
 * reward, and the episode progress flag.
 *
 * # Safety
 * `env` must be a live handle; `action` must point to `tw_act_dim()`
 * readable doubles; `obs_out` to `tw_obs_dim()` writable doubles;
 * `reward_out` and `done_out` to one writable value each.
 */
enum TwStatus tw_env_step(struct TwEnv *env,
                          const double *action,
                          double *obs_out,
                          double *reward_out,
                          enum TwDone *done_out);

/**
 * Loads a checkpoint written by the trainer. On success writes the handle
 * to `out`. Rejects files whose network does not map `tw_obs_dim()`
 * observations to `tw_act_dim()` actions.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TwStatus tw_policy_load(const char *path, struct TwPolicy **out);

/**
 * Frees a policy handle. Null is ignored.
 *
 * # Safety
 * `policy` must be a handle from [`tw_policy_load`] not yet destroyed.
 */
void tw_policy_destroy(struct TwPolicy *policy);

/**
 * Computes the deterministic (mean) action for one observation,
 * applying the checkpoint's observation normalization when present.
 *
 * # Safety
 * `policy` must be a live handle; `obs` must point to `tw_obs_dim()`
 * readable doubles and `action_out` to `tw_act_dim()` writable doubles.
 */
enum TwStatus tw_policy_act(const struct TwPolicy *policy, const double *obs, double *action_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TILEWALK_H */
