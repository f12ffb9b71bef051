/* C interface to the reorientation simulator. */
#ifndef REORIENT_REORIENT_H
#define REORIENT_REORIENT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RB_API __declspec(dllexport)
#else
#define RB_API __attribute__((visibility("default")))
#endif

typedef enum rb_status {
  RB_OK = 0,
  RB_ERROR = 1,           /* internal failure */
  RB_EPISODE_FAILED = 2,  /* the episode ran but did not succeed */
  RB_INVALID_INPUT = 3,   /* bad arguments, files or configuration */
} rb_status;

typedef struct rb_context rb_context;

/* Receives one human-readable line per benchmark step. */
typedef void (*rb_progress_fn)(const char* line, void* user);

/* `config_json` overrides defaults and may be NULL. */
RB_API rb_status rb_context_create(const char* config_json, rb_context** out);
RB_API void rb_context_destroy(rb_context* ctx);
/* Message of the last failed call on `ctx`; empty when none. */
RB_API const char* rb_last_error(const rb_context* ctx);
/* Frees strings returned through `char**` out-parameters. */
RB_API void rb_string_free(char* s);

/* Writes a seeded pile (scene JSON) and container goal (task JSON). */
RB_API rb_status rb_make_task(rb_context* ctx, uint64_t seed, const char* scene_path, const char* task_path);

/* `kind` is "pickability" or "waypoint". `n_records` may be NULL. */
RB_API rb_status rb_generate_dataset(rb_context* ctx, const char* kind, int episodes, uint64_t seed,
                                     const char* out_path, size_t* n_records);

/* Trains on a JSON-Lines dataset and writes the best-validation weights.
 * `lr` <= 0 and `epochs` <= 0 keep the configured values. `report_json`
 * (may be NULL) receives the training curve. */
RB_API rb_status rb_train(rb_context* ctx, const char* kind, const char* data_path, double lr, int epochs,
                          uint64_t seed, const char* out_path, char** report_json);

/* Runs one episode. `policy` is "learned" (needs `weights_dir` holding
 * pickability.json and waypoint.json) or "heuristic". `export_dir` (may be
 * NULL) receives scene OBJ snapshots and one trajectory JSON per stage.
 * Returns RB_EPISODE_FAILED when the episode does not succeed; the result is
 * still written to `result_json` (may be NULL). */
RB_API rb_status rb_run_episode(rb_context* ctx, const char* scene_path, const char* task_path, const char* policy,
                                const char* weights_dir, const char* export_dir, uint64_t seed, char** result_json);

/* Seeded benchmark of both policies; writes the JSON report to `report_path`
 * (may be NULL) and to `report_json` (may be NULL). */
RB_API rb_status rb_bench(rb_context* ctx, int n_tasks, uint64_t seed, const char* weights_dir,
                          const char* report_path, rb_progress_fn progress, void* user, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
