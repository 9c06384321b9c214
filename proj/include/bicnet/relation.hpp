#pragma once

// Spatio-temporal residual transformer: a spatial transformer over each
// frame's region proposals, masked mean pooling, a temporal transformer over
// frames, and up to three extra residual connections selected by variant.

#include <string>
#include <vector>

#include "bicnet/errors.hpp"
#include "bicnet/transformer.hpp"

namespace bicnet {

// Which extra residual connections are active. Spatial = one extra residual
// around every spatial layer, Temporal = the same around every temporal
// layer, Full = both plus an outer residual of the pooled frame features
// onto the temporal output.
enum class SRTVariant { NonSRT, SpatialSRT, TemporalSRT, SpatioTemporalSRT, FullSRT };

inline constexpr SRTVariant kAllVariants[] = {SRTVariant::NonSRT, SRTVariant::SpatialSRT,
                                              SRTVariant::TemporalSRT,
                                              SRTVariant::SpatioTemporalSRT, SRTVariant::FullSRT};

inline const char* to_string(SRTVariant v) {
    switch (v) {
        case SRTVariant::NonSRT: return "NonSRT";
        case SRTVariant::SpatialSRT: return "SpatialSRT";
        case SRTVariant::TemporalSRT: return "TemporalSRT";
        case SRTVariant::SpatioTemporalSRT: return "SpatioTemporalSRT";
        case SRTVariant::FullSRT: return "FullSRT";
    }
    throw InternalError("unknown SRT variant");
}

inline SRTVariant srt_variant_from_string(const std::string& s) {
    for (SRTVariant v : kAllVariants)
        if (s == to_string(v)) return v;
    throw ConfigError("unknown SRT variant: " + s +
                      " (expected NonSRT, SpatialSRT, TemporalSRT, SpatioTemporalSRT or FullSRT)");
}

inline bool spatial_extra_residual(SRTVariant v) {
    return v == SRTVariant::SpatialSRT || v == SRTVariant::SpatioTemporalSRT ||
           v == SRTVariant::FullSRT;
}

inline bool temporal_extra_residual(SRTVariant v) {
    return v == SRTVariant::TemporalSRT || v == SRTVariant::SpatioTemporalSRT ||
           v == SRTVariant::FullSRT;
}

inline bool outer_residual(SRTVariant v) { return v == SRTVariant::FullSRT; }

// One clip's region proposals, one tensor per frame (N x d_r) plus a mask of
// which rows are real detections (false rows are zero padding and are left
// out of the pooling mean).
template <typename S>
struct RegionInput {
    std::vector<Tensor<S>> frames;
    std::vector<std::vector<bool>> real_rows;

    std::size_t frame_count() const { return frames.size(); }
};

template <typename S>
struct SRTWeights {
    Tensor<S> proj_w, proj_b; // d_r -> d pointwise projection
    std::vector<BlockWeights<S>> spatial;
    std::vector<BlockWeights<S>> temporal;
    PositionalTable<S> temporal_pe;
    PositionalTable<S> proposal_pe;
    AggregatorWeights<S> agg;

    static SRTWeights create(const BlockConfig& cfg, std::size_t region_dim, std::size_t max_frames,
                             std::size_t proposals, bool temporal_pe_on, bool proposal_pe_on,
                             const std::string& prefix, ParameterStore<S>& store, Rng& rng) {
        SRTWeights w;
        w.proj_w = store.add(prefix + ".proj.w", init::linear_weight<S>(region_dim, cfg.model_dim, rng));
        w.proj_b = store.add(prefix + ".proj.b", init::zeros_vec<S>(cfg.model_dim));
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            w.spatial.push_back(
                BlockWeights<S>::create(cfg, prefix + ".spatial.l" + std::to_string(l), store, rng));
        }
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            w.temporal.push_back(
                BlockWeights<S>::create(cfg, prefix + ".temporal.l" + std::to_string(l), store, rng));
        }
        w.temporal_pe = PositionalTable<S>::create(max_frames, cfg.model_dim, prefix + ".pe.temporal",
                                                   store, rng, temporal_pe_on);
        w.proposal_pe = PositionalTable<S>::create(proposals, cfg.model_dim, prefix + ".pe.proposal",
                                                   store, rng, proposal_pe_on);
        w.agg = AggregatorWeights<S>::create(cfg.model_dim, prefix + ".agg", store, rng);
        return w;
    }
};

// L spatial layers over one frame's projected proposals.
template <typename S>
Tensor<S> spatial_stage(Tensor<S> y, const SRTWeights<S>& w, SRTVariant variant,
                        const TraceCtx& trace = {}) {
    for (std::size_t l = 0; l < w.spatial.size(); ++l) {
        auto prev = y;
        y = t_block(y, w.spatial[l], trace.sub("l" + std::to_string(l)));
        if (spatial_extra_residual(variant)) y = add(y, prev);
    }
    return y;
}

// Masked mean over the proposal axis of each frame; rows stack to T x d.
template <typename S>
Tensor<S> pool_proposals(const std::vector<Tensor<S>>& frames,
                         const std::vector<std::vector<bool>>& real_rows) {
    if (frames.empty()) throw DimensionError("pool_proposals: no frames");
    if (real_rows.size() != frames.size())
        throw DimensionError("pool_proposals: mask count does not match frame count");
    std::vector<Tensor<S>> pooled;
    pooled.reserve(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t)
        pooled.push_back(mean_rows(frames[t], &real_rows[t]));
    return concat_rows(pooled);
}

// L temporal layers over the pooled frame sequence.
template <typename S>
Tensor<S> temporal_stage(Tensor<S> z, const SRTWeights<S>& w, SRTVariant variant,
                         const TraceCtx& trace = {}) {
    for (std::size_t l = 0; l < w.temporal.size(); ++l) {
        auto prev = z;
        z = t_block(z, w.temporal[l], trace.sub("l" + std::to_string(l)));
        if (temporal_extra_residual(variant)) z = add(z, prev);
    }
    return z;
}

// Full branch up to (not including) aggregation: T x d relation features.
// The outer residual adds the pooled pre-positional frame features.
template <typename S>
Tensor<S> relation_features(const RegionInput<S>& regions, const SRTWeights<S>& w,
                            SRTVariant variant, const TraceCtx& trace = {}) {
    if (regions.frames.empty()) throw DimensionError("relation branch: empty clip");
    std::vector<Tensor<S>> transformed;
    transformed.reserve(regions.frames.size());
    for (std::size_t t = 0; t < regions.frames.size(); ++t) {
        auto y = add_bias(matmul(regions.frames[t], w.proj_w), w.proj_b);
        y = positional_add(y, w.proposal_pe);
        transformed.push_back(
            spatial_stage(y, w, variant, trace.sub("spatial.f" + std::to_string(t))));
    }
    auto z0 = pool_proposals(transformed, regions.real_rows);
    auto z = temporal_stage(positional_add(z0, w.temporal_pe), w, variant, trace.sub("temporal"));
    if (outer_residual(variant)) z = add(z, z0);
    return z;
}

template <typename S>
Tensor<S> relation_embed(const RegionInput<S>& regions, const SRTWeights<S>& w, SRTVariant variant,
                         const TraceCtx& trace = {}) {
    return aggregate(relation_features(regions, w, variant, trace), w.agg, trace.sub("agg"));
}

} // namespace bicnet
