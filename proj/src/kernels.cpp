#include "gvlab/kernels.hpp"

#include <cmath>

namespace gvlab::kernels {

namespace {

// One output row of the matmul. op_a(a)[i,t] is a[i*k+t] untransposed and
// a[t*m+i] transposed (a stored as [k,m]); likewise for b. Element (i,j)
// accumulates over t in fixed ascending order in every code path.
inline void matmul_row(const double* a, const double* b, double* c, int i, int m, int n, int k,
                       bool trans_a, bool trans_b) {
    double* out = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int t = 0; t < k; ++t) {
            const double av = trans_a ? a[static_cast<size_t>(t) * m + i] : a[static_cast<size_t>(i) * k + t];
            const double bv = trans_b ? b[static_cast<size_t>(j) * k + t] : b[static_cast<size_t>(t) * n + j];
            acc += av * bv;
        }
        out[j] = acc;
    }
}

inline void softmax_row(const double* x, double* y, int r, int cols) {
    const double* xi = x + static_cast<size_t>(r) * cols;
    double* yi = y + static_cast<size_t>(r) * cols;
    double mx = xi[0];
    for (int j = 1; j < cols; ++j) mx = xi[j] > mx ? xi[j] : mx;
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
        yi[j] = std::exp(xi[j] - mx);
        sum += yi[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < cols; ++j) yi[j] *= inv;
}

inline void logsumexp_row(const double* x, double* y, int r, int cols) {
    const double* xi = x + static_cast<size_t>(r) * cols;
    double mx = xi[0];
    for (int j = 1; j < cols; ++j) mx = xi[j] > mx ? xi[j] : mx;
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) sum += std::exp(xi[j] - mx);
    y[r] = mx + std::log(sum);
}

inline void layer_norm_row(const double* x, double* y, int r, int cols, double eps) {
    const double* xi = x + static_cast<size_t>(r) * cols;
    double* yi = y + static_cast<size_t>(r) * cols;
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += xi[j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
        const double d = xi[j] - mean;
        var += d * d;
    }
    var /= cols;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < cols; ++j) yi[j] = (xi[j] - mean) * inv;
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* c, int m, int n, int k,
                   bool trans_a, bool trans_b) {
    for (int i = 0; i < m; ++i) matmul_row(a, b, c, i, m, n, k, trans_a, trans_b);
}

void matmul(const double* a, const double* b, double* c, int m, int n, int k,
            bool trans_a, bool trans_b) {
    const long long work = static_cast<long long>(m) * n * k;
    if (work < kMatmulParallelMinWork || m < 2) {
        matmul_serial(a, b, c, m, n, k, trans_a, trans_b);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_row(a, b, c, i, m, n, k, trans_a, trans_b);
}

void softmax_rows_serial(const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) softmax_row(x, y, r, cols);
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
    const long long work = static_cast<long long>(rows) * cols;
    if (work < kRowwiseParallelMinWork || rows < 2) {
        softmax_rows_serial(x, y, rows, cols);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) softmax_row(x, y, r, cols);
}

void logsumexp_rows_serial(const double* x, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) logsumexp_row(x, y, r, cols);
}

void logsumexp_rows(const double* x, double* y, int rows, int cols) {
    const long long work = static_cast<long long>(rows) * cols;
    if (work < kRowwiseParallelMinWork || rows < 2) {
        logsumexp_rows_serial(x, y, rows, cols);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) logsumexp_row(x, y, r, cols);
}

void layer_norm_rows_serial(const double* x, double* y, int rows, int cols, double eps) {
    for (int r = 0; r < rows; ++r) layer_norm_row(x, y, r, cols, eps);
}

void layer_norm_rows(const double* x, double* y, int rows, int cols, double eps) {
    const long long work = static_cast<long long>(rows) * cols;
    if (work < kRowwiseParallelMinWork || rows < 2) {
        layer_norm_rows_serial(x, y, rows, cols, eps);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) layer_norm_row(x, y, r, cols, eps);
}

}  // namespace gvlab::kernels
