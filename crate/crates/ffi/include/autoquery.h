#ifndef AUTOQUERY_H
#define AUTOQUERY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AqStatus {
  AQ_STATUS_OK = 0,
  AQ_STATUS_NULL_POINTER = 1,
  AQ_STATUS_INVALID_UTF8 = 2,
  AQ_STATUS_INVALID_ARGUMENT = 3,
  AQ_STATUS_DATA_ERROR = 4,
  /**
   * The pipeline has not been run since its inputs last changed.
   */
  AQ_STATUS_NOT_READY = 5,
  AQ_STATUS_PANIC = 6,
} AqStatus;

/**
 * Opaque pipeline handle.
 */
typedef struct AqPipeline AqPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a pipeline with the built-in lexicons.
 */
struct AqPipeline *aq_pipeline_new(void);

/**
 * # Safety
 * `p` must come from [`aq_pipeline_new`] and not be used afterwards.
 */
void aq_pipeline_free(struct AqPipeline *p);

/**
 * Adds `text` as a new document of corpus `corpus_id`, creating the
 * corpus on first use.
 *
 * # Safety
 * Pointers must be valid; strings must be NUL-terminated.
 */
enum AqStatus aq_pipeline_add_text(struct AqPipeline *p, const char *corpus_id, const char *body);

/**
 * Runs every stage with threshold `theta` and `topk` answers per query.
 *
 * # Safety
 * `p` must be a live pipeline.
 */
enum AqStatus aq_pipeline_run(struct AqPipeline *p, double theta, size_t topk);

/**
 * Number of queries after pruning and answering.
 *
 * # Safety
 * `p` must be a live pipeline and `out` writable.
 */
enum AqStatus aq_pipeline_query_count(struct AqPipeline *p, size_t *out);

/**
 * Queries as a JSON array. Free the result with [`aq_string_free`].
 *
 * # Safety
 * `p` must be a live pipeline and `out` writable.
 */
enum AqStatus aq_pipeline_queries_json(struct AqPipeline *p, char **out);

/**
 * Share of live queries answered at or above `theta`.
 *
 * # Safety
 * `p` must be a live pipeline and `out` writable.
 */
enum AqStatus aq_pipeline_coverage(struct AqPipeline *p, double theta, double *out);

/**
 * Wilson score interval for `k` successes out of `n`.
 *
 * # Safety
 * `lo` and `hi` must be writable.
 */
enum AqStatus aq_wilson_interval(size_t k, size_t n, double z, double *lo, double *hi);

/**
 * Tokens, tags and chunks of one sentence as JSON. Free the result with
 * [`aq_string_free`].
 *
 * # Safety
 * `sentence` must be NUL-terminated and `out` writable.
 */
enum AqStatus aq_analyze_sentence_json(const char *sentence, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void aq_string_free(char *s);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *aq_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUTOQUERY_H */
