#include "cdrdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace cdrdiff {

std::size_t shape_product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream oss;
    oss << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) oss << ", ";
        oss << shape[i];
    }
    oss << ']';
    return oss.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_product(shape_)) {
        throw std::invalid_argument("tensor value count " + std::to_string(values_.size()) +
                                    " does not match shape " + shape_string(shape_));
    }
}

std::size_t Tensor::rows() const noexcept {
    if (shape_.empty()) return 1;
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
    return r;
}

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
    Tensor out(std::move(shape), values_);
    out.requires_grad_ = requires_grad_;
    return out;
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

std::size_t ParameterSet::add(std::string name, Tensor init) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    init.set_requires_grad(true);
    names_.push_back(std::move(name));
    values_.push_back(std::move(init));
    return values_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw std::out_of_range("unknown parameter: " + std::string(name));
    return *idx;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

GradientSet zero_gradients(const ParameterSet& params) {
    GradientSet out;
    out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) out.emplace_back(params.value(i).shape());
    return out;
}

void accumulate(GradientSet& into, const GradientSet& other) {
    if (into.size() != other.size()) throw std::invalid_argument("gradient set size mismatch");
    for (std::size_t p = 0; p < into.size(); ++p) {
        if (into[p].shape() != other[p].shape()) {
            throw std::invalid_argument("gradient shape mismatch at parameter " + std::to_string(p));
        }
        auto dst = into[p].values();
        auto src = other[p].values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
}

void scale(GradientSet& grads, double factor) {
    for (auto& g : grads) {
        for (double& v : g.values()) v *= factor;
    }
}

}  // namespace cdrdiff
