#include "cdrdiff/autodiff.hpp"

#include <string>

namespace cdrdiff::ad {

const Tensor& Var::value() const {
    if (!graph_) throw std::logic_error("value() on an unbound Var");
    return graph_->value(*this);
}

Var Graph::check_owned(const Var& v) const {
    if (v.graph() != this) throw std::logic_error("Var belongs to a different graph");
    if (v.id() >= nodes_.size()) throw std::logic_error("Var id out of range");
    return v;
}

Var Graph::constant(Tensor value) {
    if (!value.all_finite()) throw NumericError("non-finite value in constant input");
    Node node;
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Graph::param(std::size_t index) {
    if (!params_) throw std::logic_error("graph has no parameter set");
    if (index >= params_->size()) throw std::out_of_range("parameter index out of range");
    if (param_nodes_.size() < params_->size()) param_nodes_.resize(params_->size());
    if (param_nodes_[index]) return Var(this, *param_nodes_[index]);
    Node node;
    node.external = &params_->value(index);
    node.requires_grad = track_gradients_;
    node.param_index = index;
    nodes_.push_back(std::move(node));
    param_nodes_[index] = nodes_.size() - 1;
    return Var(this, nodes_.size() - 1);
}

Var Graph::param(std::string_view name) {
    if (!params_) throw std::logic_error("graph has no parameter set");
    return param(params_->index_of(name));
}

Var Graph::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Graph::record(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
    if (!value.all_finite()) throw NumericError("non-finite value produced in forward pass");
    bool needs = false;
    for (const Var& p : parents) needs = needs || nodes_.at(check_owned(p).id()).requires_grad;
    Node node;
    node.value = std::move(value);
    node.requires_grad = needs;
    if (needs) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(const Var& v) const { return node_value(nodes_.at(check_owned(v).id())); }

Tensor* Graph::grad_buffer(const Var& v) {
    Node& n = nodes_.at(check_owned(v).id());
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
        n.grad = Tensor(node_value(n).shape());
        n.has_grad = true;
    }
    return &n.grad;
}

GradientSet Graph::backward(const Var& output) {
    const std::size_t out_id = check_owned(output).id();
    if (value(output).size() != 1) {
        throw std::invalid_argument("backward requires a scalar output, got shape " +
                                    shape_string(value(output).shape()));
    }
    GradientSet grads = params_ ? zero_gradients(*params_) : GradientSet{};
    if (!nodes_[out_id].requires_grad) return grads;

    (*grad_buffer(output))[0] = 1.0;
    for (std::size_t id = out_id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.has_grad) continue;
        if (!n.grad.all_finite()) {
            throw NumericError("non-finite gradient at graph node " + std::to_string(id));
        }
        if (n.backward) {
            // Keep the incoming gradient alive while the rule may touch other nodes.
            const Tensor incoming = std::move(n.grad);
            n.has_grad = false;
            n.backward(*this, node_value(n), incoming);
        } else if (n.param_index) {
            grads[*n.param_index] = std::move(n.grad);
            n.has_grad = false;
        }
    }
    return grads;
}

ValueAndGradients evaluate_with_gradients(const ParameterSet& params,
                                          const std::function<Var(Graph&)>& expression) {
    Graph graph(&params);
    Var out = expression(graph);
    ValueAndGradients result;
    if (out.size() != 1) {
        throw std::invalid_argument("expression output is not scalar: " + shape_string(out.shape()));
    }
    result.value = out.value()[0];
    result.gradients = graph.backward(out);
    return result;
}

}  // namespace cdrdiff::ad
