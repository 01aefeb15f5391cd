/**
 * Define-by-run reverse-mode differentiation.
 *
 * A Graph records every op in creation order, which is already a topological
 * order. `backward` walks the record once in reverse. Ops whose inputs are
 * all constants are recorded without a gradient rule, so geometric
 * preprocessing fed in as constants costs nothing on the way back.
 *
 * A Graph is single-threaded. Separate graphs may read the same ParameterSet
 * concurrently; combining their gradients is an explicit `accumulate`.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "cdrdiff/tensor.hpp"

namespace cdrdiff::ad {

class Graph;

/// Handle to a node of a Graph.
class Var {
public:
    Var() = default;

    Graph* graph() const noexcept { return graph_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return graph_ != nullptr; }

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    std::size_t size() const { return value().size(); }

private:
    friend class Graph;
    Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

/// Gradient rule: receives the graph, the node's forward value and the
/// gradient flowing into the node.
using BackwardFn = std::function<void(Graph&, const Tensor& out, const Tensor& out_grad)>;

class Graph {
public:
    /// With `track_gradients` false, parameters are plain inputs and no
    /// gradient rule is kept (inference).
    explicit Graph(const ParameterSet* params = nullptr, bool track_gradients = true)
        : params_(params), track_gradients_(track_gradients) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    /// Leaf for a parameter. Repeated calls return the same node.
    Var param(std::size_t index);
    Var param(std::string_view name);

    /// Records an op result. The rule is dropped when no parent needs a gradient.
    Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);
    Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward);

    const Tensor& value(const Var& v) const;
    bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }
    /// Gradient accumulator of `v` (zero-initialized on first use), or nullptr
    /// when `v` does not need a gradient.
    Tensor* grad_buffer(const Var& v);

    /// Reverse sweep from a scalar output. Returns one gradient per parameter of
    /// the bound ParameterSet; parameters absent from the graph get zeros.
    GradientSet backward(const Var& output);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    const ParameterSet* parameters() const noexcept { return params_; }

private:
    struct Node {
        Tensor value;
        const Tensor* external = nullptr;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        BackwardFn backward;
        std::optional<std::size_t> param_index;
    };

    const Tensor& node_value(const Node& n) const { return n.external ? *n.external : n.value; }
    Var check_owned(const Var& v) const;

    const ParameterSet* params_;
    bool track_gradients_ = true;
    std::vector<Node> nodes_;
    std::vector<std::optional<std::size_t>> param_nodes_;
};

struct ValueAndGradients {
    double value = 0.0;
    GradientSet gradients;
};

/// Builds the expression on a fresh graph over `params` and differentiates it.
ValueAndGradients evaluate_with_gradients(const ParameterSet& params,
                                          const std::function<Var(Graph&)>& expression);

}  // namespace cdrdiff::ad
