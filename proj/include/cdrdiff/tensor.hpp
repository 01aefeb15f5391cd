/**
 * Dense row-major tensors of doubles and named parameter sets.
 *
 * Most of the library treats a tensor as a matrix: `rows()` is the product
 * of all leading extents and `cols()` is the last extent.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cdrdiff {

/// Raised when a NaN or Inf shows up in a forward value or a gradient.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    bool requires_grad() const noexcept { return requires_grad_; }
    void set_requires_grad(bool flag) noexcept { requires_grad_ = flag; }

    bool all_finite() const noexcept;
    /// Same values under a new shape with an equal element count.
    Tensor reshaped(Shape shape) const;
    void fill(double value);

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    Shape shape_;
    std::vector<double> values_;
    bool requires_grad_ = false;
};

/// Ordered, named collection of learnable tensors.
class ParameterSet {
public:
    std::size_t add(std::string name, Tensor init);

    std::size_t size() const noexcept { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    Tensor& value(std::size_t i) { return values_.at(i); }
    const Tensor& value(std::size_t i) const { return values_.at(i); }
    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;
    /// Total number of scalar parameters.
    std::size_t scalar_count() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

/// Gradient per parameter, aligned with a ParameterSet.
using GradientSet = std::vector<Tensor>;

GradientSet zero_gradients(const ParameterSet& params);
/// `into += other`, element-wise over every parameter.
void accumulate(GradientSet& into, const GradientSet& other);
void scale(GradientSet& grads, double factor);

}  // namespace cdrdiff
