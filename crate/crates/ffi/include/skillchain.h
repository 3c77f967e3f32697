#ifndef SKILLCHAIN_H
#define SKILLCHAIN_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_NULL_ARGUMENT = 1,
  SC_STATUS_INVALID_UTF8 = 2,
  SC_STATUS_INVALID_CONFIG = 3,
  SC_STATUS_IO = 4,
  SC_STATUS_FORMAT = 5,
  SC_STATUS_TRAINING = 6,
  SC_STATUS_INVALID_ARGUMENT = 7,
  SC_STATUS_BUFFER_TOO_SMALL = 8,
  SC_STATUS_INTERNAL = 9,
} ScStatus;

// Stages of an experiment that can be run one at a time.
typedef enum ScStage {
  SC_STAGE_COLLECT_DEMOS = 0,
  SC_STAGE_TRAIN_SKILLS = 1,
  // Chaining policy or baseline, depending on the configured method.
  SC_STAGE_TRAIN_POLICY = 2,
  SC_STAGE_EVALUATE = 3,
  SC_STAGE_CALIBRATE = 4,
} ScStage;

// An analytic chain world with exact dynamic-programming values.
typedef struct ScChainWorld ScChainWorld;

// A parsed experiment configuration.
typedef struct ScExperiment ScExperiment;

// Evaluation summary.
typedef struct ScEvalMetrics {
  double success_rate;
  double subtask_completion;
  double rollout_length;
  uint64_t episodes;
} ScEvalMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (truncated to
// fit) and returns its full length in bytes.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
uintptr_t sc_last_error(char *buf, uintptr_t cap);

// Parses a TOML experiment configuration.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum ScStatus sc_experiment_from_toml(const char *text, struct ScExperiment **out);

// Releases an experiment handle; null is ignored.
//
// # Safety
// `exp` must come from [`sc_experiment_from_toml`] and not be used again.
void sc_experiment_free(struct ScExperiment *exp);

// Replaces the output directory.
//
// # Safety
// `exp` must be a live handle and `dir` a NUL-terminated string.
enum ScStatus sc_experiment_set_out_dir(struct ScExperiment *exp, const char *dir);

// Writes the configuration hash used in every output file name.
//
// # Safety
// `exp` must be a live handle and `buf` point to `cap` writable bytes.
enum ScStatus sc_experiment_hash(const struct ScExperiment *exp, char *buf, uintptr_t cap);

// Runs one stage for one seed, reading earlier stages' outputs from the
// output directory.
//
// # Safety
// `exp` must be a live handle.
enum ScStatus sc_experiment_run_stage(const struct ScExperiment *exp,
                                      uint64_t seed,
                                      enum ScStage stage);

// Evaluates the stored policy of `seed`.
//
// # Safety
// `exp` must be a live handle and `out` a valid pointer.
enum ScStatus sc_experiment_evaluate(const struct ScExperiment *exp,
                                     uint64_t seed,
                                     struct ScEvalMetrics *out);

// Runs every stage for every seed. `failed_stages` receives the number of
// stages that failed; their messages are in the run manifest.
//
// # Safety
// `exp` must be a live handle and `failed_stages` a valid pointer.
enum ScStatus sc_experiment_run(const struct ScExperiment *exp, uint32_t *failed_stages);

// Creates a chain world: the peaked three-subtask world, or with
// `conflict` set the one where greedy subgoals are globally poor.
//
// # Safety
// `out` must be a valid pointer.
enum ScStatus sc_chain_world_new(bool conflict, struct ScChainWorld **out);

// Releases a chain world; null is ignored.
//
// # Safety
// `world` must come from [`sc_chain_world_new`] and not be used again.
void sc_chain_world_free(struct ScChainWorld *world);

// Number of subtasks.
//
// # Safety
// `world` must be a live handle and `out` a valid pointer.
enum ScStatus sc_chain_world_num_subtasks(const struct ScChainWorld *world, uint32_t *out);

// Exact value of boundary state `x` before subtask `i` (1-based) on an
// `n`-point grid, under the optimal chaining policy or, with `optimal`
// false, under uniformly random subgoals.
//
// # Safety
// `world` must be a live handle and `out` a valid pointer.
enum ScStatus sc_chain_world_value(const struct ScChainWorld *world,
                                   uint32_t i,
                                   double x,
                                   uint32_t n,
                                   bool optimal,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKILLCHAIN_H */
