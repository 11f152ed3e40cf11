#pragma once

#include <cstddef>

namespace gvlab::kernels {

// Dense kernels behind the graph ops. Each kernel has a serial reference
// (*_serial) and an OpenMP-parallel primary that partitions work by output
// row. Every output element is computed by exactly one thread with the same
// inner-loop order as the serial path, so results are bitwise identical
// regardless of thread count.

// c[m,n] = op_a(a)[m,k] * op_b(b)[k,n], op given by the transpose flags.
// a is [m,k] (or [k,m] if trans_a), b is [k,n] (or [n,k] if trans_b).
void matmul_serial(const double* a, const double* b, double* c, int m, int n, int k,
                   bool trans_a, bool trans_b);
void matmul(const double* a, const double* b, double* c, int m, int n, int k,
            bool trans_a, bool trans_b);

// Row-wise stable softmax: each row shifted by its max before exponentiation.
void softmax_rows_serial(const double* x, double* y, int rows, int cols);
void softmax_rows(const double* x, double* y, int rows, int cols);

// Row-wise stable log-sum-exp, one output per row.
void logsumexp_rows_serial(const double* x, double* y, int rows, int cols);
void logsumexp_rows(const double* x, double* y, int rows, int cols);

// Row-wise normalization to zero mean, unit variance (population variance,
// stabilized by eps inside the square root).
void layer_norm_rows_serial(const double* x, double* y, int rows, int cols, double eps);
void layer_norm_rows(const double* x, double* y, int rows, int cols, double eps);

// Work sizes below which the parallel entry points stay serial. Exposed for
// the benchmark tool.
inline constexpr long long kMatmulParallelMinWork = 1 << 15;
inline constexpr long long kRowwiseParallelMinWork = 1 << 13;

}  // namespace gvlab::kernels
