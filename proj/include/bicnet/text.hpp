#pragma once

// Text branch over precomputed token features: pointwise projection plus
// attention pooling. No transformer stack and no positional table; tokens
// arrive already contextualized by the upstream language model.

#include <string>

#include "bicnet/transformer.hpp"

namespace bicnet {

template <typename S>
struct TextWeights {
    Tensor<S> proj_w, proj_b; // d_t -> d_*
    AggregatorWeights<S> agg;

    static TextWeights create(std::size_t token_dim, std::size_t embed_dim,
                              const std::string& prefix, ParameterStore<S>& store, Rng& rng) {
        TextWeights w;
        w.proj_w = store.add(prefix + ".proj.w", init::linear_weight<S>(token_dim, embed_dim, rng));
        w.proj_b = store.add(prefix + ".proj.b", init::zeros_vec<S>(embed_dim));
        w.agg = AggregatorWeights<S>::create(embed_dim, prefix + ".agg", store, rng);
        return w;
    }
};

template <typename S>
Tensor<S> text_embed(const Tensor<S>& tokens, const TextWeights<S>& w,
                     const TraceCtx& trace = {}) {
    opdetail::require_rank(tokens, 2, "text_embed input");
    if (tokens.cols() != w.proj_w.rows())
        throw ConfigError("text_embed: token dim " + std::to_string(tokens.cols()) +
                          " vs projection " + shape_str(w.proj_w.shape()));
    return aggregate(add_bias(matmul(tokens, w.proj_w), w.proj_b), w.agg, trace.sub("agg"));
}

} // namespace bicnet
