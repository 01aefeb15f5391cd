/**
 * Dense inner loops shared by the autodiff ops.
 *
 * Every kernel has an OpenMP version (namespace `kernels`) and a serial
 * reference (namespace `kernels::serial`). Both accumulate each output
 * element in the same order, so their results are bit-identical and the
 * thread count never changes a numeric result.
 */

#pragma once

#include <cstddef>
#include <span>

namespace cdrdiff::kernels {

/// Work (multiply-adds) below which the parallel kernels stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

/// c[n,m] += a[n,k] * b[k,m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m);
/// c[k,m] += a[n,k]^T * b[n,m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m);
/// c[n,k] += a[n,m] * b[k,m]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t m,
             std::size_t k);

/// dst row-block e = src row-block index[e]; blocks are `block` rows of `cols` values.
void gather_rows(const double* src, std::span<const std::size_t> index, std::size_t block,
                 std::size_t cols, double* dst);
/// dst row-block index[e] += src row-block e. dst holds `n_out` blocks.
void scatter_add_rows(const double* src, std::span<const std::size_t> index, std::size_t block,
                      std::size_t cols, double* dst, std::size_t n_out);

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m);
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m);
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t m,
             std::size_t k);
void gather_rows(const double* src, std::span<const std::size_t> index, std::size_t block,
                 std::size_t cols, double* dst);
void scatter_add_rows(const double* src, std::span<const std::size_t> index, std::size_t block,
                      std::size_t cols, double* dst, std::size_t n_out);

}  // namespace serial

}  // namespace cdrdiff::kernels
