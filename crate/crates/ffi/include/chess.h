/* C ABI for the chess k-Hessian solver.
 *
 * Every function returns a chess_status; out-parameters are written only on
 * CHESS_OK.  Field handles returned through out-parameters are owned by the
 * caller and must be released with chess_field_free.  chess_last_error()
 * describes the most recent failure on the calling thread.
 */

#ifndef CHESS_H
#define CHESS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Opaque scalar field on the 2n-dimensional periodic grid. */
typedef struct ChessField ChessField;

typedef enum chess_status {
    CHESS_OK = 0,
    CHESS_STATUS_PARAMETER = 1,
    CHESS_STATUS_VALIDATION = 2,
    CHESS_STATUS_CONE_VIOLATION = 3,
    CHESS_STATUS_COMPATIBILITY = 4,
    CHESS_STATUS_POSITIVITY = 5,
    CHESS_STATUS_STEP_FAILURE = 6,
    CHESS_STATUS_NON_CONVERGENCE = 7,
    CHESS_STATUS_CONTINUATION_FAILURE = 8,
    CHESS_STATUS_LINEAR_SOLVE = 9,
    CHESS_STATUS_IO = 10,
    CHESS_STATUS_JSON = 11,
    CHESS_STATUS_NULL_POINTER = 12,
    CHESS_STATUS_INVALID_UTF8 = 13,
    CHESS_STATUS_INTERNAL = 14
} chess_status;

/* Message for the most recent failure on this thread; valid until the next
 * failing call on the same thread. */
const char *chess_last_error(void);

/* Allocate an all-zero field: complex dimension n, `size` samples per real
 * axis (power of two, at least 4). */
chess_status chess_field_create(size_t n, size_t size, ChessField **out);

/* Release a handle; null is ignored. */
void chess_field_free(ChessField *field);

/* Dimensions: complex dimension, samples per axis, total sample count. */
chess_status chess_field_dims(const ChessField *field, size_t *n,
                              size_t *size, size_t *len);

/* Mutable pointer to the row-major samples (length from chess_field_dims);
 * valid until the handle is freed.  Null if `field` is null. */
double *chess_field_data(ChessField *field);

/* Field file i/o: `path` names the JSON sidecar, the binary payload path is
 * derived by swapping the extension to ".f64". */
chess_status chess_field_read(const char *path, ChessField **out);
chess_status chess_field_write(const ChessField *field, const char *path);

/* Manufactured solution pair: mean-zero potential phi*, its forward image
 * f, and the achieved cone margin. */
chess_status chess_mms_generate(size_t n, size_t size, size_t k, double amp,
                                uint64_t seed, ChessField **phi_out,
                                ChessField **rhs_out, double *margin_out);

/* Pointwise S_k(I + Hessian(phi)). */
chess_status chess_apply_op(const ChessField *field, size_t k,
                            ChessField **out);

/* min over grid points of min_{j<=k} S_j(I + Hessian(phi)); positive iff
 * the potential is admissible. */
chess_status chess_cone_margin(const ChessField *field, size_t k,
                               double *out);

/* Continuity-method solve of S_k(I + Hessian(phi)) = rhs.  Pass tol <= 0 or
 * max_newton == 0 for the defaults.  Writes the mean-zero solution and its
 * final sup log-residual. */
chess_status chess_solve(const ChessField *rhs, size_t k, double tol,
                         size_t max_newton, uint64_t seed, ChessField **out,
                         double *residual_out);

/* Randomized inequality/positivity suites; CHESS_OK iff every suite passes.
 * worst_out receives the most negative relative slack (0 with no samples). */
chess_status chess_run_props(size_t n, size_t k, size_t samples,
                             uint64_t seed, double *worst_out);

#ifdef __cplusplus
}
#endif

#endif /* CHESS_H */
