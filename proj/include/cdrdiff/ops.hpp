/**
 * Differentiable ops over Var.
 *
 * Shapes are matrices [rows, cols] unless stated. Geometric vector features
 * use the "vector layout": a [3n, C] matrix where row 3*i + d holds spatial
 * component d of item i across C channels. Rotations are passed as constant
 * [n, 9] row-major tensors and never receive gradients.
 */

#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cdrdiff/autodiff.hpp"

namespace cdrdiff::ad {

/// Shared row-index list, captured by gradient rules without copying.
using Index = std::shared_ptr<const std::vector<std::size_t>>;
Index make_index(std::vector<std::size_t> rows);

// Element-wise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var add_const(const Var& a, const Tensor& c);
Var mul_const(const Var& a, const Tensor& c);
Var square(const Var& a);
Var silu(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Var log_clamped(const Var& a, double floor);
/// sqrt(a + eps)
Var sqrt_eps(const Var& a, double eps);
Var reciprocal(const Var& a);

// Linear algebra and broadcasting.
Var matmul(const Var& a, const Var& b);
/// a[n,m] + b[m] on every row.
Var add_row(const Var& a, const Var& b);
/// a[n,m] * g[m] on every row.
Var mul_row(const Var& a, const Var& g);
/// Columns of a[n, G*C] split in G groups of C; group g of row i scaled by s[i,g].
Var mul_groups(const Var& a, const Var& s);
/// Sum of each group of C columns: [n, G*C] -> [n, G].
Var group_sum(const Var& a, std::size_t groups);
/// Repeat each column C times: [n, G] -> [n, G*C].
Var expand_groups(const Var& s, std::size_t copies);

// Structure.
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var reshape(const Var& a, Shape shape);
/// Row blocks of `block` rows: out block e = a block index[e].
Var gather_rows(const Var& a, const Index& index, std::size_t block = 1);
/// out block index[e] += a block e; out has n_out blocks.
Var scatter_add_rows(const Var& a, const Index& index, std::size_t n_out, std::size_t block = 1);
Var sum_all(const Var& a);
Var mean_all(const Var& a);

// Normalization.
Var softmax_rows(const Var& a);
/// Softmax over the rows sharing a segment id, independently per column.
Var segment_softmax(const Var& a, const Index& segment, std::size_t n_segments);
/// Zero-mean unit-variance rows (no affine part).
Var layer_norm_rows(const Var& a, double eps = 1e-5);

// Vector layout [3n, C].
/// Channel-wise 3D inner product: [3n,C] x [3n,C] -> [n,C].
Var vec_dot(const Var& a, const Var& b);
/// v[3n,C] scaled by s[n,C] per item and channel.
Var vec_scale(const Var& v, const Var& s);
/// dirs[n,3] (constant) outer s[n,C] -> [3n,C].
Var dir_outer(const Tensor& dirs, const Var& s);
/// Component of each channel vector orthogonal to the unit direction dirs[i].
Var reject(const Var& v, const Tensor& dirs);
/// R_i * v_i (or R_i^T * v_i) for every item; frames is [n, 9] row-major.
Var rotate_vec(const Var& v, const Tensor& frames, bool transpose = false);
Var vec_cross(const Var& a, const Var& b);

}  // namespace cdrdiff::ad
