#pragma once

// Full-split retrieval evaluation: embed every item with gradients off,
// assemble the caption x video fused score matrix in double precision, and
// rank both directions.

#include <exception>
#include <optional>
#include <vector>

#include "bicnet/metrics.hpp"
#include "bicnet/model.hpp"

namespace bicnet {

struct EvalResult {
    RetrievalMetrics t2v; // queries: captions, items: videos
    RetrievalMetrics v2t; // queries: captioned videos, items: captions
    ScoreMatrix caption_by_video;
};

inline double eval_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    const double c = dot / (std::sqrt(aa) * std::sqrt(bb));
    return std::min(1.0, std::max(-1.0, c));
}

// Per-direction breakdown of one fused score: lambda * relation + (1-lambda) * global.
struct FusedScorer {
    double lambda = 0.5;
    double operator()(double relation_cos, double global_cos) const {
        return lambda * relation_cos + (1.0 - lambda) * global_cos;
    }
};

template <typename S>
EvalResult evaluate(const BiCNetModel<S>& model, const Dataset& data,
                    std::optional<double> lambda_override = {}) {
    if (!(model.dims == data.dims))
        throw ConfigError("evaluate: checkpoint dims do not match dataset dims");
    if (data.videos.empty() || data.captions.empty())
        throw UsageError("evaluate: dataset has no video/caption pairs");
    const double lambda = lambda_override.value_or(model.cfg.lambda);
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ConfigError("evaluate: lambda override must lie in [0,1]");

    const std::size_t nv = data.videos.size(), nc = data.captions.size();
    std::vector<std::vector<double>> rel(nv), glob(nv), txt(nc);

    // Items are independent; parameters are read-only here. Exceptions must
    // not escape the worksharing regions, so the first one is parked and
    // rethrown afterwards.
    std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < nv; ++i) {
        try {
            NoGradGuard ng;
            auto r = model.embed_relation(data.videos[i].regions);
            auto g = model.embed_video_global(data.videos[i].frames);
            rel[i].assign(r.values().begin(), r.values().end());
            glob[i].assign(g.values().begin(), g.values().end());
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < nc; ++j) {
        try {
            NoGradGuard ng;
            auto t = model.embed_text(data.captions[j].tokens);
            txt[j].assign(t.values().begin(), t.values().end());
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    const FusedScorer fuse{lambda};
    EvalResult out;
    out.caption_by_video.queries = nc;
    out.caption_by_video.items = nv;
    out.caption_by_video.scores.resize(nc * nv);
    out.caption_by_video.ground_truth.resize(nc);
#pragma omp parallel for schedule(static)
    for (std::size_t q = 0; q < nc; ++q) {
        for (std::size_t v = 0; v < nv; ++v)
            out.caption_by_video.scores[q * nv + v] =
                fuse(eval_cosine(rel[v], txt[q]), eval_cosine(glob[v], txt[q]));
        out.caption_by_video.ground_truth[q] = data.captions[q].video_index;
    }
    out.t2v = RetrievalMetrics::from_ranks(rank_of_truth(out.caption_by_video));

    // Video-to-text over captioned videos; the designated truth is the
    // video's first listed caption.
    std::vector<std::size_t> captioned;
    for (std::size_t v = 0; v < nv; ++v)
        if (!data.videos[v].caption_indices.empty()) captioned.push_back(v);
    ScoreMatrix v2t;
    v2t.queries = captioned.size();
    v2t.items = nc;
    v2t.scores.resize(v2t.queries * nc);
    v2t.ground_truth.resize(v2t.queries);
    for (std::size_t qi = 0; qi < captioned.size(); ++qi) {
        const std::size_t v = captioned[qi];
        for (std::size_t c = 0; c < nc; ++c)
            v2t.scores[qi * nc + c] = out.caption_by_video.scores[c * nv + v];
        v2t.ground_truth[qi] = data.videos[v].caption_indices.front();
    }
    out.v2t = RetrievalMetrics::from_ranks(rank_of_truth(v2t));
    return out;
}

} // namespace bicnet
