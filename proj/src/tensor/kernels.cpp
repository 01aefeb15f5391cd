#include "cdrdiff/kernels.hpp"

#include <cstring>
#include <stdexcept>
#include <vector>

#include <omp.h>

namespace cdrdiff::kernels {

namespace {

bool go_parallel(std::size_t work) {
    return work >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
}

inline void axpy_row(double alpha, const double* x, double* y, std::size_t m) {
    for (std::size_t j = 0; j < m; ++j) y[j] += alpha * x[j];
}

}  // namespace

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c + i * m;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) axpy_row(ai[p], b + p * m, ci, m);
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    for (std::size_t p = 0; p < k; ++p) {
        double* cp = c + p * m;
        for (std::size_t i = 0; i < n; ++i) axpy_row(a[i * k + p], b + i * m, cp, m);
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t m,
             std::size_t k) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a + i * m;
        for (std::size_t q = 0; q < k; ++q) {
            const double* bq = b + q * m;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += ai[j] * bq[j];
            c[i * k + q] += acc;
        }
    }
}

void gather_rows(const double* src, std::span<const std::size_t> index, std::size_t block,
                 std::size_t cols, double* dst) {
    const std::size_t stride = block * cols;
    for (std::size_t e = 0; e < index.size(); ++e) {
        std::memcpy(dst + e * stride, src + index[e] * stride, stride * sizeof(double));
    }
}

void scatter_add_rows(const double* src, std::span<const std::size_t> index, std::size_t block,
                      std::size_t cols, double* dst, std::size_t n_out) {
    const std::size_t stride = block * cols;
    for (std::size_t e = 0; e < index.size(); ++e) {
        if (index[e] >= n_out) throw std::out_of_range("scatter index out of range");
        axpy_row(1.0, src + e * stride, dst + index[e] * stride, stride);
    }
}

}  // namespace serial

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    if (!go_parallel(n * k * m)) return serial::gemm_nn(a, b, c, n, k, m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        double* ci = c + i * m;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) axpy_row(ai[p], b + p * m, ci, m);
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    if (!go_parallel(n * k * m)) return serial::gemm_tn(a, b, c, n, k, m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(k); ++p) {
        double* cp = c + p * m;
        for (std::size_t i = 0; i < n; ++i) axpy_row(a[i * k + p], b + i * m, cp, m);
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t m,
             std::size_t k) {
    if (!go_parallel(n * k * m)) return serial::gemm_nt(a, b, c, n, m, k);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const double* ai = a + i * m;
        for (std::size_t q = 0; q < k; ++q) {
            const double* bq = b + q * m;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += ai[j] * bq[j];
            c[i * k + q] += acc;
        }
    }
}

void gather_rows(const double* src, std::span<const std::size_t> index, std::size_t block,
                 std::size_t cols, double* dst) {
    const std::size_t stride = block * cols;
    if (!go_parallel(index.size() * stride)) return serial::gather_rows(src, index, block, cols, dst);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(index.size()); ++e) {
        std::memcpy(dst + e * stride, src + index[e] * stride, stride * sizeof(double));
    }
}

void scatter_add_rows(const double* src, std::span<const std::size_t> index, std::size_t block,
                      std::size_t cols, double* dst, std::size_t n_out) {
    const std::size_t stride = block * cols;
    if (!go_parallel(index.size() * stride)) {
        return serial::scatter_add_rows(src, index, block, cols, dst, n_out);
    }
    // Group sources by target (counting sort keeps source order within a
    // target), then each thread owns whole output blocks.
    std::vector<std::size_t> offsets(n_out + 1, 0);
    for (std::size_t t : index) {
        if (t >= n_out) throw std::out_of_range("scatter index out of range");
        ++offsets[t + 1];
    }
    for (std::size_t t = 0; t < n_out; ++t) offsets[t + 1] += offsets[t];
    std::vector<std::size_t> order(index.size());
    {
        std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
        for (std::size_t e = 0; e < index.size(); ++e) order[cursor[index[e]]++] = e;
    }
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(n_out); ++t) {
        double* out = dst + t * stride;
        for (std::size_t q = offsets[t]; q < offsets[t + 1]; ++q) {
            axpy_row(1.0, src + order[q] * stride, out, stride);
        }
    }
}

}  // namespace cdrdiff::kernels
