#include "cdrdiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cdrdiff/kernels.hpp"

namespace cdrdiff::ad {

namespace {

Graph& graph_of(const Var& v) {
    if (!v.valid()) throw std::logic_error("op on an unbound Var");
    return *v.graph();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                    " vs " + shape_string(b.shape()));
    }
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return {rows, cols}; }

/// Element-wise unary op; `deriv(x, y)` is dy/dx.
template <class F, class D>
Var unary(const Var& a, F f, D deriv) {
    Graph& g = graph_of(a);
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return g.record(std::move(y), {a}, [a, deriv](Graph& g, const Tensor& y, const Tensor& gy) {
        Tensor* gx = g.grad_buffer(a);
        if (!gx) return;
        const Tensor& x = g.value(a);
        for (std::size_t i = 0; i < x.size(); ++i) (*gx)[i] += gy[i] * deriv(x[i], y[i]);
    });
}

void add_into(Tensor* dst, const Tensor& src, double factor = 1.0) {
    if (!dst) return;
    for (std::size_t i = 0; i < src.size(); ++i) (*dst)[i] += factor * src[i];
}

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::size_t vector_items(const Tensor& v, const char* op) {
    require(v.rows() % 3 == 0, std::string(op) + ": vector layout needs a multiple of 3 rows");
    return v.rows() / 3;
}

}  // namespace

Index make_index(std::vector<std::size_t> rows) {
    return std::make_shared<const std::vector<std::size_t>>(std::move(rows));
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor y = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    return graph_of(a).record(std::move(y), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& gy) {
        add_into(g.grad_buffer(a), gy);
        add_into(g.grad_buffer(b), gy);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor y = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
    return graph_of(a).record(std::move(y), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& gy) {
        add_into(g.grad_buffer(a), gy);
        add_into(g.grad_buffer(b), gy, -1.0);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor y = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
    return graph_of(a).record(std::move(y), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& gy) {
        if (Tensor* ga = g.grad_buffer(a)) {
            const Tensor& bv = g.value(b);
            for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bv[i];
        }
        if (Tensor* gb = g.grad_buffer(b)) {
            const Tensor& av = g.value(a);
            for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * av[i];
        }
    });
}

Var scale(const Var& a, double factor) {
    return unary(a, [factor](double x) { return factor * x; },
                 [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double offset) {
    return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var add_const(const Var& a, const Tensor& c) {
    require_same_shape(a.value(), c, "add_const");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += c[i];
    return graph_of(a).record(std::move(y), {a}, [a](Graph& g, const Tensor&, const Tensor& gy) {
        add_into(g.grad_buffer(a), gy);
    });
}

Var mul_const(const Var& a, const Tensor& c) {
    require_same_shape(a.value(), c, "mul_const");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c[i];
    return graph_of(a).record(std::move(y), {a}, [a, c](Graph& g, const Tensor&, const Tensor& gy) {
        if (Tensor* ga = g.grad_buffer(a)) {
            for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * c[i];
        }
    });
}

Var square(const Var& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var silu(const Var& a) {
    return unary(
        a, [](double x) { return x * sigmoid_scalar(x); },
        [](double x, double) {
            const double s = sigmoid_scalar(x);
            return s + x * s * (1.0 - s);
        });
}

Var sigmoid(const Var& a) {
    return unary(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log_clamped(const Var& a, double floor) {
    require(floor > 0.0, "log_clamped: floor must be positive");
    return unary(
        a, [floor](double x) { return std::log(std::max(x, floor)); },
        [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var sqrt_eps(const Var& a, double eps) {
    return unary(
        a, [eps](double x) { return std::sqrt(x + eps); },
        [](double, double y) { return 0.5 / y; });
}

Var reciprocal(const Var& a) {
    return unary(a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
    require(bv.rows() == k, "matmul: inner extents differ " + shape_string(av.shape()) + " x " +
                                shape_string(bv.shape()));
    Tensor y(matrix_shape(n, m));
    kernels::gemm_nn(av.data(), bv.data(), y.data(), n, k, m);
    return graph_of(a).record(std::move(y), {a, b}, [a, b, n, k, m](Graph& g, const Tensor&, const Tensor& gy) {
        if (Tensor* ga = g.grad_buffer(a)) kernels::gemm_nt(gy.data(), g.value(b).data(), ga->data(), n, m, k);
        if (Tensor* gb = g.grad_buffer(b)) kernels::gemm_tn(g.value(a).data(), gy.data(), gb->data(), n, k, m);
    });
}

Var add_row(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const std::size_t n = av.rows(), m = av.cols();
    require(b.size() == m, "add_row: bias width mismatch");
    Tensor y = av;
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) y[i * m + j] += bv[j];
    return graph_of(a).record(std::move(y), {a, b}, [a, b, n, m](Graph& g, const Tensor&, const Tensor& gy) {
        add_into(g.grad_buffer(a), gy);
        if (Tensor* gb = g.grad_buffer(b)) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) (*gb)[j] += gy[i * m + j];
        }
    });
}

Var mul_row(const Var& a, const Var& gvar) {
    const Tensor& av = a.value();
    const std::size_t n = av.rows(), m = av.cols();
    require(gvar.size() == m, "mul_row: width mismatch");
    Tensor y = av;
    const Tensor& gv = gvar.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) y[i * m + j] *= gv[j];
    return graph_of(a).record(std::move(y), {a, gvar}, [a, gvar, n, m](Graph& g, const Tensor&, const Tensor& gy) {
        if (Tensor* ga = g.grad_buffer(a)) {
            const Tensor& gv = g.value(gvar);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) (*ga)[i * m + j] += gy[i * m + j] * gv[j];
        }
        if (Tensor* gg = g.grad_buffer(gvar)) {
            const Tensor& av = g.value(a);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) (*gg)[j] += gy[i * m + j] * av[i * m + j];
        }
    });
}

Var mul_groups(const Var& a, const Var& s) {
    const Tensor& av = a.value();
    const Tensor& sv = s.value();
    const std::size_t n = av.rows(), groups = sv.cols();
    require(sv.rows() == n && groups > 0 && av.cols() % groups == 0, "mul_groups: shape mismatch");
    const std::size_t width = av.cols() / groups;
    Tensor y = av;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t q = 0; q < groups; ++q)
            for (std::size_t c = 0; c < width; ++c) y[(i * groups + q) * width + c] *= sv[i * groups + q];
    return graph_of(a).record(std::move(y), {a, s}, [a, s, n, groups, width](Graph& g, const Tensor&, const Tensor& gy) {
        const Tensor& av = g.value(a);
        const Tensor& sv = g.value(s);
        Tensor* ga = g.grad_buffer(a);
        Tensor* gs = g.grad_buffer(s);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < groups; ++q) {
                const std::size_t base = (i * groups + q) * width;
                double acc = 0.0;
                for (std::size_t c = 0; c < width; ++c) {
                    if (ga) (*ga)[base + c] += gy[base + c] * sv[i * groups + q];
                    acc += gy[base + c] * av[base + c];
                }
                if (gs) (*gs)[i * groups + q] += acc;
            }
    });
}

Var group_sum(const Var& a, std::size_t groups) {
    const Tensor& av = a.value();
    const std::size_t n = av.rows();
    require(groups > 0 && av.cols() % groups == 0, "group_sum: columns not divisible by groups");
    const std::size_t width = av.cols() / groups;
    Tensor y(matrix_shape(n, groups));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t q = 0; q < groups; ++q) {
            double acc = 0.0;
            for (std::size_t c = 0; c < width; ++c) acc += av[(i * groups + q) * width + c];
            y[i * groups + q] = acc;
        }
    return graph_of(a).record(std::move(y), {a}, [a, n, groups, width](Graph& g, const Tensor&, const Tensor& gy) {
        Tensor* ga = g.grad_buffer(a);
        if (!ga) return;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < groups; ++q)
                for (std::size_t c = 0; c < width; ++c) (*ga)[(i * groups + q) * width + c] += gy[i * groups + q];
    });
}

Var expand_groups(const Var& s, std::size_t copies) {
    const Tensor& sv = s.value();
    const std::size_t n = sv.rows(), groups = sv.cols();
    Tensor y(matrix_shape(n, groups * copies));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t q = 0; q < groups; ++q)
            for (std::size_t c = 0; c < copies; ++c) y[(i * groups + q) * copies + c] = sv[i * groups + q];
    return graph_of(s).record(std::move(y), {s}, [s, n, groups, copies](Graph& g, const Tensor&, const Tensor& gy) {
        Tensor* gs = g.grad_buffer(s);
        if (!gs) return;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < groups; ++q)
                for (std::size_t c = 0; c < copies; ++c) (*gs)[i * groups + q] += gy[(i * groups + q) * copies + c];
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t n = parts.front().rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const Var& p : parts) {
        require(p.rows() == n, "concat_cols: row count mismatch");
        require(p.graph() == parts.front().graph(), "concat_cols: mixed graphs");
        widths.push_back(p.cols());
        total += p.cols();
    }
    Tensor y(matrix_shape(n, total));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& pv = parts[k].value();
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(pv.data() + i * widths[k], widths[k], y.data() + i * total + offset);
        offset += widths[k];
    }
    return graph_of(parts.front()).record(std::move(y), parts, [parts, widths, n, total](Graph& g, const Tensor&, const Tensor& gy) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (Tensor* gp = g.grad_buffer(parts[k])) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t c = 0; c < widths[k]; ++c) (*gp)[i * widths[k] + c] += gy[i * total + offset + c];
            }
            offset += widths[k];
        }
    });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
    const Tensor& av = a.value();
    const std::size_t n = av.rows(), m = av.cols();
    require(begin < end && end <= m, "slice_cols: bad range");
    const std::size_t w = end - begin;
    Tensor y(matrix_shape(n, w));
    for (std::size_t i = 0; i < n; ++i) std::copy_n(av.data() + i * m + begin, w, y.data() + i * w);
    return graph_of(a).record(std::move(y), {a}, [a, n, m, w, begin](Graph& g, const Tensor&, const Tensor& gy) {
        Tensor* ga = g.grad_buffer(a);
        if (!ga) return;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < w; ++c) (*ga)[i * m + begin + c] += gy[i * w + c];
    });
}

Var reshape(const Var& a, Shape shape) {
    Tensor y = a.value().reshaped(std::move(shape));
    return graph_of(a).record(std::move(y), {a}, [a](Graph& g, const Tensor&, const Tensor& gy) {
        add_into(g.grad_buffer(a), gy);
    });
}

Var gather_rows(const Var& a, const Index& index, std::size_t block) {
    const Tensor& av = a.value();
    const std::size_t m = av.cols();
    require(block > 0 && av.rows() % block == 0, "gather_rows: rows not divisible by block");
    const std::size_t n_blocks = av.rows() / block;
    for (std::size_t t : *index) require(t < n_blocks, "gather_rows: index out of range");
    Tensor y(matrix_shape(index->size() * block, m));
    kernels::gather_rows(av.data(), *index, block, m, y.data());
    return graph_of(a).record(std::move(y), {a}, [a, index, block, m, n_blocks](Graph& g, const Tensor&, const Tensor& gy) {
        if (Tensor* ga = g.grad_buffer(a)) kernels::scatter_add_rows(gy.data(), *index, block, m, ga->data(), n_blocks);
    });
}

Var scatter_add_rows(const Var& a, const Index& index, std::size_t n_out, std::size_t block) {
    const Tensor& av = a.value();
    const std::size_t m = av.cols();
    require(block > 0 && av.rows() == index->size() * block, "scatter_add_rows: index length mismatch");
    Tensor y(matrix_shape(n_out * block, m));
    kernels::scatter_add_rows(av.data(), *index, block, m, y.data(), n_out);
    return graph_of(a).record(std::move(y), {a}, [a, index, block, m](Graph& g, const Tensor&, const Tensor& gy) {
        Tensor* ga = g.grad_buffer(a);
        if (!ga) return;
        // Gather adds into an existing buffer, so go through a scratch tensor.
        Tensor tmp(ga->shape());
        kernels::gather_rows(gy.data(), *index, block, m, tmp.data());
        add_into(ga, tmp);
    });
}

Var sum_all(const Var& a) {
    double acc = 0.0;
    for (double v : a.value().values()) acc += v;
    return graph_of(a).record(Tensor::scalar(acc), {a}, [a](Graph& g, const Tensor&, const Tensor& gy) {
        Tensor* ga = g.grad_buffer(a);
        if (!ga) return;
        for (double& v : ga->values()) v += gy[0];
    });
}

Var mean_all(const Var& a) {
    require(a.size() > 0, "mean_all: empty tensor");
    return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Var softmax_rows(const Var& a) {
    const Tensor& av = a.value();
    const std::size_t n = av.rows(), m = av.cols();
    Tensor y(av.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = av.data() + i * m;
        double* out = y.data() + i * m;
        const double mx = *std::max_element(x, x + m);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) z += (out[j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < m; ++j) out[j] /= z;
    }
    return graph_of(a).record(std::move(y), {a}, [a, n, m](Graph& g, const Tensor& y, const Tensor& gy) {
        Tensor* ga = g.grad_buffer(a);
        if (!ga) return;
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += gy[i * m + j] * y[i * m + j];
            for (std::size_t j = 0; j < m; ++j) (*ga)[i * m + j] += y[i * m + j] * (gy[i * m + j] - dot);
        }
    });
}

Var segment_softmax(const Var& a, const Index& segment, std::size_t n_segments) {
    const Tensor& av = a.value();
    const std::size_t n = av.rows(), m = av.cols();
    require(segment->size() == n, "segment_softmax: one segment id per row required");
    for (std::size_t s : *segment) require(s < n_segments, "segment_softmax: segment id out of range");
    Tensor mx(matrix_shape(n_segments, m), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double& cur = mx[(*segment)[i] * m + j];
            cur = std::max(cur, av[i * m + j]);
        }
    Tensor z(matrix_shape(n_segments, m));
    Tensor y(av.shape());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t s = (*segment)[i] * m + j;
            y[i * m + j] = std::exp(av[i * m + j] - mx[s]);
            z[s] += y[i * m + j];
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) y[i * m + j] /= z[(*segment)[i] * m + j];
    return graph_of(a).record(std::move(y), {a}, [a, segment, n_segments, n, m](Graph& g, const Tensor& y, const Tensor& gy) {
        Tensor* ga = g.grad_buffer(a);
        if (!ga) return;
        std::vector<double> dot(n_segments * m, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) dot[(*segment)[i] * m + j] += gy[i * m + j] * y[i * m + j];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                (*ga)[i * m + j] += y[i * m + j] * (gy[i * m + j] - dot[(*segment)[i] * m + j]);
    });
}

Var layer_norm_rows(const Var& a, double eps) {
    const Tensor& av = a.value();
    const std::size_t n = av.rows(), m = av.cols();
    Tensor y(av.shape());
    auto inv_std = std::make_shared<std::vector<double>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = av.data() + i * m;
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) mean += x[j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t j = 0; j < m; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= static_cast<double>(m);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < m; ++j) y[i * m + j] = (x[j] - mean) * is;
    }
    return graph_of(a).record(std::move(y), {a}, [a, n, m, inv_std](Graph& g, const Tensor& y, const Tensor& gy) {
        Tensor* ga = g.grad_buffer(a);
        if (!ga) return;
        for (std::size_t i = 0; i < n; ++i) {
            double mean_g = 0.0, mean_gy = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                mean_g += gy[i * m + j];
                mean_gy += gy[i * m + j] * y[i * m + j];
            }
            mean_g /= static_cast<double>(m);
            mean_gy /= static_cast<double>(m);
            for (std::size_t j = 0; j < m; ++j) {
                (*ga)[i * m + j] += (*inv_std)[i] * (gy[i * m + j] - mean_g - y[i * m + j] * mean_gy);
            }
        }
    });
}

Var vec_dot(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "vec_dot");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t n = vector_items(av, "vec_dot"), c = av.cols();
    Tensor y(matrix_shape(n, c));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < 3; ++d)
            for (std::size_t k = 0; k < c; ++k) y[i * c + k] += av[(3 * i + d) * c + k] * bv[(3 * i + d) * c + k];
    return graph_of(a).record(std::move(y), {a, b}, [a, b, n, c](Graph& g, const Tensor&, const Tensor& gy) {
        const Tensor& av = g.value(a);
        const Tensor& bv = g.value(b);
        Tensor* ga = g.grad_buffer(a);
        Tensor* gb = g.grad_buffer(b);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < 3; ++d)
                for (std::size_t k = 0; k < c; ++k) {
                    const std::size_t r = (3 * i + d) * c + k;
                    if (ga) (*ga)[r] += gy[i * c + k] * bv[r];
                    if (gb) (*gb)[r] += gy[i * c + k] * av[r];
                }
    });
}

Var vec_scale(const Var& v, const Var& s) {
    const Tensor& vv = v.value();
    const Tensor& sv = s.value();
    const std::size_t n = vector_items(vv, "vec_scale"), c = vv.cols();
    require(sv.rows() == n && sv.cols() == c, "vec_scale: scale shape mismatch");
    Tensor y = vv;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < 3; ++d)
            for (std::size_t k = 0; k < c; ++k) y[(3 * i + d) * c + k] *= sv[i * c + k];
    return graph_of(v).record(std::move(y), {v, s}, [v, s, n, c](Graph& g, const Tensor&, const Tensor& gy) {
        const Tensor& vv = g.value(v);
        const Tensor& sv = g.value(s);
        Tensor* gv = g.grad_buffer(v);
        Tensor* gs = g.grad_buffer(s);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < 3; ++d)
                for (std::size_t k = 0; k < c; ++k) {
                    const std::size_t r = (3 * i + d) * c + k;
                    if (gv) (*gv)[r] += gy[r] * sv[i * c + k];
                    if (gs) (*gs)[i * c + k] += gy[r] * vv[r];
                }
    });
}

Var dir_outer(const Tensor& dirs, const Var& s) {
    const Tensor& sv = s.value();
    const std::size_t n = sv.rows(), c = sv.cols();
    require(dirs.rows() == n && dirs.cols() == 3, "dir_outer: directions must be [n, 3]");
    Tensor y(matrix_shape(3 * n, c));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < 3; ++d)
            for (std::size_t k = 0; k < c; ++k) y[(3 * i + d) * c + k] = dirs[i * 3 + d] * sv[i * c + k];
    return graph_of(s).record(std::move(y), {s}, [s, dirs, n, c](Graph& g, const Tensor&, const Tensor& gy) {
        Tensor* gs = g.grad_buffer(s);
        if (!gs) return;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < 3; ++d)
                for (std::size_t k = 0; k < c; ++k) (*gs)[i * c + k] += gy[(3 * i + d) * c + k] * dirs[i * 3 + d];
    });
}

Var reject(const Var& v, const Tensor& dirs) {
    const Tensor& vv = v.value();
    const std::size_t n = vector_items(vv, "reject"), c = vv.cols();
    require(dirs.rows() == n && dirs.cols() == 3, "reject: directions must be [n, 3]");
    // Rejection is the linear map (I - r r^T), symmetric, so the same map
    // applies on the way back.
    auto apply = [n, c](const Tensor& dirs, const double* in, double* out) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = dirs.data() + 3 * i;
            for (std::size_t k = 0; k < c; ++k) {
                const double proj = r[0] * in[(3 * i) * c + k] + r[1] * in[(3 * i + 1) * c + k] +
                                    r[2] * in[(3 * i + 2) * c + k];
                for (std::size_t d = 0; d < 3; ++d) out[(3 * i + d) * c + k] += in[(3 * i + d) * c + k] - proj * r[d];
            }
        }
    };
    Tensor y(vv.shape());
    apply(dirs, vv.data(), y.data());
    return graph_of(v).record(std::move(y), {v}, [v, dirs, apply](Graph& g, const Tensor&, const Tensor& gy) {
        if (Tensor* gv = g.grad_buffer(v)) apply(dirs, gy.data(), gv->data());
    });
}

Var rotate_vec(const Var& v, const Tensor& frames, bool transpose) {
    const Tensor& vv = v.value();
    const std::size_t n = vector_items(vv, "rotate_vec"), c = vv.cols();
    require(frames.size() == 9 * n, "rotate_vec: need one 3x3 frame per item");
    auto apply = [n, c](const Tensor& frames, bool tr, const double* in, double* out) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* rm = frames.data() + 9 * i;
            for (std::size_t d = 0; d < 3; ++d)
                for (std::size_t e = 0; e < 3; ++e) {
                    const double w = tr ? rm[e * 3 + d] : rm[d * 3 + e];
                    const double* src = in + (3 * i + e) * c;
                    double* dst = out + (3 * i + d) * c;
                    for (std::size_t k = 0; k < c; ++k) dst[k] += w * src[k];
                }
        }
    };
    Tensor y(vv.shape());
    apply(frames, transpose, vv.data(), y.data());
    return graph_of(v).record(std::move(y), {v}, [v, frames, transpose, apply](Graph& g, const Tensor&, const Tensor& gy) {
        if (Tensor* gv = g.grad_buffer(v)) apply(frames, !transpose, gy.data(), gv->data());
    });
}

Var vec_cross(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "vec_cross");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t n = vector_items(av, "vec_cross"), c = av.cols();
    auto at = [c](const Tensor& t, std::size_t i, std::size_t d, std::size_t k) { return t[(3 * i + d) * c + k]; };
    Tensor y(av.shape());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k)
            for (std::size_t d = 0; d < 3; ++d) {
                const std::size_t d1 = (d + 1) % 3, d2 = (d + 2) % 3;
                y[(3 * i + d) * c + k] = at(av, i, d1, k) * at(bv, i, d2, k) - at(av, i, d2, k) * at(bv, i, d1, k);
            }
    return graph_of(a).record(std::move(y), {a, b}, [a, b, n, c, at](Graph& g, const Tensor&, const Tensor& gy) {
        const Tensor& av = g.value(a);
        const Tensor& bv = g.value(b);
        Tensor* ga = g.grad_buffer(a);
        Tensor* gb = g.grad_buffer(b);
        // y = a x b:  dL/da = b x gy,  dL/db = gy x a
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < c; ++k)
                for (std::size_t d = 0; d < 3; ++d) {
                    const std::size_t d1 = (d + 1) % 3, d2 = (d + 2) % 3;
                    if (ga) (*ga)[(3 * i + d) * c + k] += at(bv, i, d1, k) * at(gy, i, d2, k) - at(bv, i, d2, k) * at(gy, i, d1, k);
                    if (gb) (*gb)[(3 * i + d) * c + k] += at(gy, i, d1, k) * at(av, i, d2, k) - at(gy, i, d2, k) * at(av, i, d1, k);
                }
    });
}

}  // namespace cdrdiff::ad
