#pragma once

// Global video branch: pointwise fusion of concatenated 2D/3D frame
// features, a plain multi-layer transformer, and attention pooling.

#include <string>
#include <vector>

#include "bicnet/transformer.hpp"

namespace bicnet {

template <typename S>
struct GlobalWeights {
    Tensor<S> fuse_w, fuse_b; // (d_a + d_m3) -> d_g
    std::vector<BlockWeights<S>> blocks;
    PositionalTable<S> temporal_pe;
    AggregatorWeights<S> agg;

    static GlobalWeights create(const BlockConfig& cfg, std::size_t frame_feature_dim,
                                std::size_t max_frames, bool temporal_pe_on,
                                const std::string& prefix, ParameterStore<S>& store, Rng& rng) {
        GlobalWeights w;
        w.fuse_w = store.add(prefix + ".fuse.w",
                             init::linear_weight<S>(frame_feature_dim, cfg.model_dim, rng));
        w.fuse_b = store.add(prefix + ".fuse.b", init::zeros_vec<S>(cfg.model_dim));
        for (std::size_t l = 0; l < cfg.layers; ++l)
            w.blocks.push_back(
                BlockWeights<S>::create(cfg, prefix + ".l" + std::to_string(l), store, rng));
        w.temporal_pe = PositionalTable<S>::create(max_frames, cfg.model_dim, prefix + ".pe",
                                                   store, rng, temporal_pe_on);
        w.agg = AggregatorWeights<S>::create(cfg.model_dim, prefix + ".agg", store, rng);
        return w;
    }
};

// Row-wise affine projection of the concatenated frame features.
template <typename S>
Tensor<S> fuse_frames(const Tensor<S>& frames, const GlobalWeights<S>& w) {
    opdetail::require_rank(frames, 2, "fuse_frames input");
    if (frames.cols() != w.fuse_w.rows())
        throw ConfigError("fuse_frames: input dim " + std::to_string(frames.cols()) +
                          " vs fusion projection " + shape_str(w.fuse_w.shape()));
    return add_bias(matmul(frames, w.fuse_w), w.fuse_b);
}

template <typename S>
Tensor<S> video_features(const Tensor<S>& frames, const GlobalWeights<S>& w,
                         const TraceCtx& trace = {}) {
    auto x = positional_add(fuse_frames(frames, w), w.temporal_pe);
    for (std::size_t l = 0; l < w.blocks.size(); ++l)
        x = t_block(x, w.blocks[l], trace.sub("l" + std::to_string(l)));
    return x;
}

template <typename S>
Tensor<S> video_embed(const Tensor<S>& frames, const GlobalWeights<S>& w,
                      const TraceCtx& trace = {}) {
    return aggregate(video_features(frames, w, trace), w.agg, trace.sub("agg"));
}

} // namespace bicnet
