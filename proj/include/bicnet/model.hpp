#pragma once

// Full bi-branch model: relation branch over region proposals, global branch
// over fused frame features, text branch over token features, all meeting in
// one joint d_* space.

#include <string>
#include <vector>

#include "bicnet/config.hpp"
#include "bicnet/global.hpp"
#include "bicnet/manifest.hpp"
#include "bicnet/relation.hpp"
#include "bicnet/text.hpp"

namespace bicnet {

template <typename S>
struct BiCNetModel {
    TrainConfig cfg;
    DatasetDims dims;
    ParameterStore<S> store;
    SRTWeights<S> relation;
    GlobalWeights<S> global;
    TextWeights<S> text;

    static BiCNetModel build(const TrainConfig& cfg, const DatasetDims& dims) {
        cfg.validate();
        if (dims.frames == 0 || dims.proposals == 0 || dims.region_dim == 0 ||
            dims.appearance_dim == 0 || dims.motion_dim == 0 || dims.token_dim == 0)
            throw ConfigError("model build: every dataset dim must be positive");
        BiCNetModel m;
        m.cfg = cfg;
        m.dims = dims;
        BlockConfig block{cfg.embed_dim, cfg.heads, cfg.mlp_hidden, cfg.layers};
        block.validate();
        Rng rng = Rng(cfg.seed).derive(1); // init stream
        m.relation = SRTWeights<S>::create(block, dims.region_dim, dims.frames, dims.proposals,
                                           cfg.pe_temporal, cfg.pe_proposals, "relation", m.store,
                                           rng);
        m.global = GlobalWeights<S>::create(block, dims.frame_feature_dim(), dims.frames,
                                            cfg.pe_temporal, "global", m.store, rng);
        m.text = TextWeights<S>::create(dims.token_dim, cfg.embed_dim, "text", m.store, rng);
        return m;
    }

    // --- feature conversion -------------------------------------------------

    // Splits a T x N x d_r blob into per-frame tensors. An all-zero raw row
    // marks a padded (absent) detection and is excluded from pooling.
    RegionInput<S> region_input(const Blob& regions) const {
        if (regions.extents.size() != 3 || regions.extents[0] != dims.frames ||
            regions.extents[1] != dims.proposals || regions.extents[2] != dims.region_dim)
            throw ConfigError("region blob shape does not match model dims");
        RegionInput<S> in;
        const std::size_t n = dims.proposals, dr = dims.region_dim;
        for (std::size_t t = 0; t < dims.frames; ++t) {
            std::vector<S> v(n * dr);
            std::vector<bool> real(n, false);
            const float* src = regions.data.data() + t * n * dr;
            for (std::size_t i = 0; i < n; ++i) {
                bool nonzero = false;
                for (std::size_t j = 0; j < dr; ++j) {
                    v[i * dr + j] = S(src[i * dr + j]);
                    nonzero = nonzero || (src[i * dr + j] != 0.0f);
                }
                real[i] = nonzero;
            }
            in.frames.push_back(Tensor<S>::from_values({n, dr}, std::move(v)));
            in.real_rows.push_back(std::move(real));
        }
        return in;
    }

    Tensor<S> frame_input(const Blob& frames) const {
        if (frames.extents.size() != 2 || frames.extents[0] != dims.frames ||
            frames.extents[1] != dims.frame_feature_dim())
            throw ConfigError("frame blob shape does not match model dims");
        std::vector<S> v(frames.data.begin(), frames.data.end());
        return Tensor<S>::from_values({dims.frames, dims.frame_feature_dim()}, std::move(v));
    }

    Tensor<S> token_input(const Blob& tokens) const {
        if (tokens.extents.size() != 2 || tokens.extents[1] != dims.token_dim)
            throw ConfigError("token blob shape does not match model dims");
        std::vector<S> v(tokens.data.begin(), tokens.data.end());
        return Tensor<S>::from_values({tokens.extents[0], dims.token_dim}, std::move(v));
    }

    // --- embeddings ---------------------------------------------------------

    Tensor<S> embed_relation(const Blob& regions, const TraceCtx& trace = {}) const {
        return relation_embed(region_input(regions), relation, cfg.variant, trace);
    }

    Tensor<S> embed_video_global(const Blob& frames, const TraceCtx& trace = {}) const {
        return video_embed(frame_input(frames), global, trace);
    }

    Tensor<S> embed_text(const Blob& tokens, const TraceCtx& trace = {}) const {
        return text_embed(token_input(tokens), text, trace);
    }
};

// Test/probe helper: zero every sublayer output projection (attention Wo,
// MLP W2/b2) and aggregator query, and disable the positional tables. Under
// this zeroing each transformer block is the identity map, so the extra
// residual connections alone determine the output.
template <typename S>
void apply_zero_probe(BiCNetModel<S>& m) {
    auto zero = [](Tensor<S>& t) {
        for (auto& v : t.values_mut()) v = S(0);
    };
    auto zero_block = [&](BlockWeights<S>& b) {
        zero(b.wo);
        zero(b.w2);
        zero(b.b2);
    };
    for (auto& b : m.relation.spatial) zero_block(b);
    for (auto& b : m.relation.temporal) zero_block(b);
    for (auto& b : m.global.blocks) zero_block(b);
    zero(m.relation.agg.query);
    zero(m.global.agg.query);
    zero(m.text.agg.query);
    m.relation.temporal_pe.enabled = false;
    m.relation.proposal_pe.enabled = false;
    m.global.temporal_pe.enabled = false;
}

} // namespace bicnet
