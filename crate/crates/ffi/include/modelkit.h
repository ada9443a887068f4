#ifndef MODELKIT_H
#define MODELKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum MkStatus {
  MK_STATUS_OK = 0,
  MK_STATUS_NULL_POINTER = 1,
  MK_STATUS_INVALID_UTF8 = 2,
  MK_STATUS_SYNTAX = 3,
  MK_STATUS_UNKNOWN_NAME = 4,
  MK_STATUS_BAD_ARGUMENT = 5,
  MK_STATUS_DIMENSION_MISMATCH = 6,
  MK_STATUS_NUMERICAL = 7,
  MK_STATUS_IO = 8,
  MK_STATUS_BUFFER_TOO_SMALL = 9,
  MK_STATUS_PANIC = 10,
} MkStatus;

/**
 * A model built from an expression.
 */
typedef struct MkModel MkModel;

/**
 * A seeded random stream.
 */
typedef struct MkStream MkStream;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a model from an expression such as `truncate(normal, min=0)`.
 * On success `*out` owns a handle to release with [`mk_model_free`].
 *
 * # Safety
 * `expr` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MkStatus mk_model_from_expr(const char *expr, struct MkModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `m` must come from [`mk_model_from_expr`] and not be used afterwards.
 */
void mk_model_free(struct MkModel *m);

/**
 * Number of parameter values, pinned ones included.
 *
 * # Safety
 * `m` and `out` must be valid pointers.
 */
enum MkStatus mk_model_param_count(const struct MkModel *m, size_t *out);

/**
 * Width of one data row, or 0 when rows vary in length.
 *
 * # Safety
 * `m` and `out` must be valid pointers.
 */
enum MkStatus mk_model_data_dim(const struct MkModel *m, size_t *out);

/**
 * Copies the model's default parameter values into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum MkStatus mk_model_default_params(const struct MkModel *m, double *buf, size_t len);

/**
 * Log-likelihood of `rows` x `cols` row-major data at `params`.
 *
 * # Safety
 * Buffers must hold the stated number of doubles; `out` must be valid.
 */
enum MkStatus mk_model_log_likelihood(const struct MkModel *m,
                                      const double *data,
                                      size_t rows,
                                      size_t cols,
                                      const double *params,
                                      size_t n_params,
                                      double *out);

/**
 * Estimates parameters on `rows` x `cols` data and writes all parameter
 * values (pinned ones unchanged) into `params_out`.
 *
 * # Safety
 * Buffers must hold the stated number of doubles.
 */
enum MkStatus mk_model_estimate(const struct MkModel *m,
                                const double *data,
                                size_t rows,
                                size_t cols,
                                double *params_out,
                                size_t n_params);

/**
 * Draws one row into `out`, which holds `out_len` doubles; `*written`
 * receives the row length.
 *
 * # Safety
 * Buffers must hold the stated number of doubles; handles must be valid.
 */
enum MkStatus mk_model_draw(const struct MkModel *m,
                            const double *params,
                            size_t n_params,
                            struct MkStream *s,
                            double *out,
                            size_t out_len,
                            size_t *written);

/**
 * Probability of the orthant at or below `point`.
 *
 * # Safety
 * Buffers must hold the stated number of doubles; `out` must be valid.
 */
enum MkStatus mk_model_cdf(const struct MkModel *m,
                           const double *point,
                           size_t dim,
                           const double *params,
                           size_t n_params,
                           double *out);

/**
 * A new stream; the same seed gives the same draws. Release with
 * [`mk_stream_free`].
 */
struct MkStream *mk_stream_new(uint64_t seed);

/**
 * Releases a stream. Null is ignored.
 *
 * # Safety
 * `s` must come from [`mk_stream_new`] and not be used afterwards.
 */
void mk_stream_free(struct MkStream *s);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to fit, into `buf`. Returns the full message length without
 * the terminator, so a call with `len == 0` sizes the buffer.
 *
 * # Safety
 * `buf` must hold `len` bytes, or be null with `len == 0`.
 */
size_t mk_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODELKIT_H */
