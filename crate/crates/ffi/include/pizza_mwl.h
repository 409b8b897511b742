#ifndef PIZZA_MWL_H
#define PIZZA_MWL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmwlStatus {
  PMWL_STATUS_OK = 0,
  PMWL_STATUS_NULL_POINTER = 1,
  PMWL_STATUS_INVALID_UTF8 = 2,
  PMWL_STATUS_INVALID_JSON = 3,
  PMWL_STATUS_CONFIG_INVALID = 4,
  PMWL_STATUS_INVALID_ARGUMENT = 5,
  PMWL_STATUS_SIGNAL_ERROR = 6,
  PMWL_STATUS_LOG_CORRUPT = 7,
  PMWL_STATUS_PANIC = 8,
} PmwlStatus;

// Streaming workload pipeline.
typedef struct PmwlPipeline PmwlPipeline;

// Order program for one config.
typedef struct PmwlSequence PmwlSequence;

// Pure session core: feed it inputs, get envelopes back.
typedef struct PmwlSession PmwlSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until
// the next call on the same thread; do not free.
const char *pmwl_last_error(void);

// Frees a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void pmwl_string_free(char *s);

// Static version string; do not free.
const char *pmwl_version(void);

// Builds the order program. `config_json` may be NULL for defaults;
// absent fields take defaults.
//
// # Safety
// `config_json` is NULL or a NUL-terminated string; `out` is writable.
enum PmwlStatus pmwl_sequence_generate(const char *config_json, struct PmwlSequence **out);

// Number of orders; 0 for NULL.
//
// # Safety
// `seq` is NULL or a live handle.
size_t pmwl_sequence_len(const struct PmwlSequence *seq);

// # Safety
// `seq` is a live handle; `out` is writable.
enum PmwlStatus pmwl_sequence_is_target(const struct PmwlSequence *seq, size_t index, bool *out);

// The full program (config, hash, orders) as JSON.
//
// # Safety
// `seq` is a live handle; `out` is writable.
enum PmwlStatus pmwl_sequence_to_json(const struct PmwlSequence *seq, char **out);

// # Safety
// `seq` is NULL or a live handle, not used afterwards.
void pmwl_sequence_free(struct PmwlSequence *seq);

// Streaming pipeline. `config_json` may be NULL for defaults; otherwise a
// complete pipeline config object.
//
// # Safety
// `config_json` is NULL or a NUL-terminated string; `out` is writable.
enum PmwlStatus pmwl_pipeline_new(const char *config_json, struct PmwlPipeline **out);

// Pushes `channels × frames` samples in microvolts, channel-major
// (`samples[c * frames + i]`), starting at `start_time_s`. Writes a JSON
// array of the workload samples completed by this chunk.
//
// # Safety
// `pipe` is a live handle; `samples` points to `channels * frames`
// doubles; `out` is writable.
enum PmwlStatus pmwl_pipeline_push(struct PmwlPipeline *pipe,
                                   const double *samples,
                                   size_t channels,
                                   size_t frames,
                                   double start_time_s,
                                   char **out);

// # Safety
// `pipe` is NULL or a live handle, not used afterwards.
void pmwl_pipeline_free(struct PmwlPipeline *pipe);

// New session in the configuring phase. `config_json` may be NULL.
//
// # Safety
// `session_id` is a NUL-terminated string; `config_json` is NULL or one;
// `out` is writable.
enum PmwlStatus pmwl_session_new(const char *session_id,
                                 const char *config_json,
                                 uint64_t wall_clock_unix_ms,
                                 struct PmwlSession **out);

// Applies one client message from connection `conn`. Writes the
// resulting envelopes as a JSON array of `{"to", "message"}`. Protocol
// errors are envelopes, not failures; only unparsable JSON fails.
//
// # Safety
// `session` is a live handle; `message_json` is a NUL-terminated string;
// `out` is writable.
enum PmwlStatus pmwl_session_handle_message(struct PmwlSession *session,
                                            uint64_t conn,
                                            const char *message_json,
                                            char **out);

// Advances the session clock by `dt_us` microseconds.
//
// # Safety
// `session` is a live handle; `out` is writable.
enum PmwlStatus pmwl_session_tick(struct PmwlSession *session, uint64_t dt_us, char **out);

// Feeds one workload sample (as produced by the pipeline) to the session.
//
// # Safety
// `session` is a live handle; `sample_json` is a NUL-terminated string;
// `out` is writable.
enum PmwlStatus pmwl_session_workload(struct PmwlSession *session,
                                      const char *sample_json,
                                      char **out);

// # Safety
// `session` is a live handle; `out` is writable.
enum PmwlStatus pmwl_session_disconnect(struct PmwlSession *session, uint64_t conn, char **out);

// Public session state as JSON.
//
// # Safety
// `session` is a live handle; `out` is writable.
enum PmwlStatus pmwl_session_state(const struct PmwlSession *session, char **out);

// The session log so far, one JSON record per line.
//
// # Safety
// `session` is a live handle; `out` is writable.
enum PmwlStatus pmwl_session_log(const struct PmwlSession *session, char **out);

// # Safety
// `session` is NULL or a live handle, not used afterwards.
void pmwl_session_free(struct PmwlSession *session);

// Replays a JSON-lines session log and writes the final state. Fails with
// `LOG_CORRUPT` when any recorded output is not reproduced.
//
// # Safety
// `log_jsonl` is a NUL-terminated string; `out` is writable.
enum PmwlStatus pmwl_replay_log(const char *log_jsonl, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIZZA_MWL_H */
