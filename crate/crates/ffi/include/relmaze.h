#ifndef RELMAZE_H
#define RELMAZE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes. Zero is success.
typedef enum RmStatus {
  RM_OK = 0,
  RM_NULL_ARGUMENT = 1,
  RM_INVALID_UTF8 = 2,
  RM_PARSE_ERROR = 3,
  RM_INVALID_ARGUMENT = 4,
  RM_RUN_ERROR = 5,
  RM_PANIC = 6,
} RmStatus;

// Proposers available through the C interface.
typedef enum RmProposer {
  RM_PROPOSER_ORACLE = 0,
  RM_PROPOSER_GREEDY_BLIND = 1,
  RM_PROPOSER_UNIFORM_RANDOM = 2,
} RmProposer;

// Opaque maze handle.
typedef struct RmMaze RmMaze;

// Opaque training result handle.
typedef struct RmRun RmRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread. Empty after a
// successful call. Owned by the library; valid until the next call.
const char *rm_last_error(void);

// Static description of a status code.
const char *rm_status_str(enum RmStatus status);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void rm_string_free(char *s);

// Parses a maze from a JSON document or an ASCII grid.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum RmStatus rm_maze_from_text(const char *text, struct RmMaze **out);

// # Safety
// `maze` must come from [`rm_maze_from_text`] and not be freed twice.
void rm_maze_free(struct RmMaze *maze);

// # Safety
// `maze` must be a live handle; `height` and `width` must be writable.
enum RmStatus rm_maze_size(const struct RmMaze *maze, size_t *height, size_t *width);

// Shortest path length from start to goal, or -1 when unreachable.
//
// # Safety
// `maze` must be a live handle; `out` must be writable.
enum RmStatus rm_maze_shortest_path(const struct RmMaze *maze, int64_t *out);

// Relation-network text of the maze. Free with [`rm_string_free`].
//
// # Safety
// `maze` must be a live handle; `out` must be writable.
enum RmStatus rm_maze_render_relations(const struct RmMaze *maze, char **out);

// Canonical JSON form of the maze. Free with [`rm_string_free`].
//
// # Safety
// `maze` must be a live handle; `out` must be writable.
enum RmStatus rm_maze_to_json(const struct RmMaze *maze, char **out);

// Trains on `maze` with a two-stage reverse-walk curriculum and the given
// proposer. `total_episodes` bounds the whole run (0 selects the default).
//
// # Safety
// `maze` must be a live handle; `out` must be writable.
enum RmStatus rm_run_s2rcql(const struct RmMaze *maze,
                            enum RmProposer proposer,
                            double epsilon,
                            uint64_t seed,
                            size_t total_episodes,
                            struct RmRun **out);

// # Safety
// `run` must come from [`rm_run_s2rcql`] and not be freed twice.
void rm_run_free(struct RmRun *run);

// Whether the scored episode from the real start reached the goal, and its
// step count.
//
// # Safety
// `run` must be a live handle; `success` and `steps` must be writable.
enum RmStatus rm_run_outcome(const struct RmRun *run, bool *success, size_t *steps);

// Number of training episodes the run used.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum RmStatus rm_run_episodes(const struct RmRun *run, size_t *out);

// Tab-separated Q-table snapshot. Free with [`rm_string_free`].
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum RmStatus rm_run_qtable(const struct RmRun *run, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELMAZE_H */
