#include <cmath>
#include <stdexcept>

#include "cdrdiff/layers.hpp"

namespace cdrdiff::nn {

Linear make_linear(ParameterSet& params, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
                   bool bias, double gain) {
    if (in == 0 || out == 0) throw std::invalid_argument("linear layer " + name + " needs nonzero widths");
    Tensor w({in, out});
    const double sd = gain / std::sqrt(static_cast<double>(in));
    for (double& x : w.values()) x = sd * standard_normal(rng);
    Linear layer;
    layer.in = in;
    layer.out = out;
    layer.weight = params.add(name + ".w", std::move(w));
    if (bias) layer.bias = params.add(name + ".b", Tensor({out}));
    return layer;
}

ad::Var apply(ad::Graph& g, const Linear& layer, const ad::Var& x) {
    if (x.cols() != layer.in) {
        throw std::invalid_argument("linear layer expects " + std::to_string(layer.in) + " inputs, got " +
                                    std::to_string(x.cols()));
    }
    ad::Var y = ad::matmul(x, g.param(layer.weight));
    if (layer.bias) y = ad::add_row(y, g.param(*layer.bias));
    return y;
}

Mlp make_mlp(ParameterSet& params, Rng& rng, const std::string& name, std::size_t in, std::size_t hidden,
             std::size_t out, double final_gain) {
    Mlp mlp;
    mlp.first = make_linear(params, rng, name + ".0", in, hidden);
    mlp.second = make_linear(params, rng, name + ".1", hidden, out, true, final_gain);
    return mlp;
}

ad::Var apply(ad::Graph& g, const Mlp& mlp, const ad::Var& x) {
    return apply(g, mlp.second, ad::silu(apply(g, mlp.first, x)));
}

Embedding make_embedding(ParameterSet& params, Rng& rng, const std::string& name, std::size_t count,
                         std::size_t dim) {
    Tensor table({count, dim});
    for (double& x : table.values()) x = standard_normal(rng);
    Embedding emb;
    emb.count = count;
    emb.dim = dim;
    emb.table = params.add(name, std::move(table));
    return emb;
}

ad::Var apply(ad::Graph& g, const Embedding& emb, const ad::Index& ids) {
    for (std::size_t id : *ids) {
        if (id >= emb.count) throw std::out_of_range("embedding index " + std::to_string(id) + " out of range");
    }
    return ad::gather_rows(g.param(emb.table), ids);
}

}  // namespace cdrdiff::nn
