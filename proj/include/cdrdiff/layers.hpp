/**
 * Parameterized building blocks over the autodiff ops.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "cdrdiff/autodiff.hpp"
#include "cdrdiff/ops.hpp"
#include "cdrdiff/rng.hpp"

namespace cdrdiff::nn {

struct Linear {
    std::size_t weight = 0;
    std::optional<std::size_t> bias;
    std::size_t in = 0;
    std::size_t out = 0;
};

/// Weights drawn from N(0, gain^2 / in); bias starts at zero.
Linear make_linear(ParameterSet& params, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
                   bool bias = true, double gain = 1.0);
ad::Var apply(ad::Graph& g, const Linear& layer, const ad::Var& x);

/// Two linear layers with SiLU in between.
struct Mlp {
    Linear first;
    Linear second;
};

Mlp make_mlp(ParameterSet& params, Rng& rng, const std::string& name, std::size_t in, std::size_t hidden,
             std::size_t out, double final_gain = 1.0);
ad::Var apply(ad::Graph& g, const Mlp& mlp, const ad::Var& x);

struct Embedding {
    std::size_t table = 0;
    std::size_t count = 0;
    std::size_t dim = 0;
};

Embedding make_embedding(ParameterSet& params, Rng& rng, const std::string& name, std::size_t count,
                         std::size_t dim);
/// Rows of the table selected by `ids`.
ad::Var apply(ad::Graph& g, const Embedding& emb, const ad::Index& ids);

}  // namespace cdrdiff::nn
