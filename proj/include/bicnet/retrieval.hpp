#pragma once

// Joint-embedding similarity: a lambda-weighted sum of the relation-space
// and global-space cosines, plus the in-graph loss entry points.

#include "bicnet/errors.hpp"
#include "bicnet/ops.hpp"

namespace bicnet {

struct FusionConfig {
    double lambda = 0.5;

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw ConfigError("lambda must lie in [0,1], got " + std::to_string(lambda));
    }
};

struct LossConfig {
    double margin = 0.2;
    bool hard_negatives = false;

    void validate() const {
        if (!(margin > 0.0 && margin <= 1.0))
            throw ConfigError("margin must lie in (0,1], got " + std::to_string(margin));
    }
};

// lambda * cos(F_r, F_t) + (1 - lambda) * cos(F_v, F_t) for a single pair.
template <typename S>
Tensor<S> similarity(const Tensor<S>& relation_embed, const Tensor<S>& video_embed,
                     const Tensor<S>& text_embed, const FusionConfig& cfg) {
    cfg.validate();
    return add(scale(cosine(relation_embed, text_embed), S(cfg.lambda)),
               scale(cosine(video_embed, text_embed), S(1.0 - cfg.lambda)));
}

// Fused B x B (or P x Q) score matrix from stacked embedding rows.
template <typename S>
Tensor<S> similarity_matrix(const Tensor<S>& relation_rows, const Tensor<S>& video_rows,
                            const Tensor<S>& text_rows, const FusionConfig& cfg) {
    cfg.validate();
    return add(scale(cosine_matrix(relation_rows, text_rows), S(cfg.lambda)),
               scale(cosine_matrix(video_rows, text_rows), S(1.0 - cfg.lambda)));
}

template <typename S>
Tensor<S> triplet_loss(const Tensor<S>& scores, const LossConfig& cfg) {
    cfg.validate();
    return triplet_hinge_loss(scores, S(cfg.margin), cfg.hard_negatives);
}

} // namespace bicnet
