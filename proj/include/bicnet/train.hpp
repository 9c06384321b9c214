#pragma once

// Training loop: epochs of shuffled batches, one caption sampled per video,
// fused in-batch score matrix, hinge ranking loss, Adam.

#include <cstdint>
#include <functional>
#include <vector>

#include "bicnet/checkpoint.hpp"
#include "bicnet/retrieval.hpp"

namespace bicnet {

struct StepRecord {
    std::uint64_t step = 0;
    double loss = 0.0;
};

template <typename S>
struct TrainHooks {
    // Called after each optimizer step; return false to stop the run.
    std::function<bool(std::uint64_t step, double loss)> on_step;
    // Read-only probe of the live model every probe_every steps (0 = never);
    // return false to stop the run.
    std::size_t probe_every = 0;
    std::function<bool(const BiCNetModel<S>& model, std::uint64_t step, double loss)> on_probe;
};

template <typename S>
struct TrainResult {
    Checkpoint<S> checkpoint;
    std::vector<StepRecord> trace;
    bool stopped_early = false;
};

template <typename S>
TrainResult<S> train(const TrainConfig& cfg, const Dataset& data, const TrainHooks<S>& hooks = {}) {
    cfg.validate();

    // Only videos with at least one caption can form a positive pair.
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < data.videos.size(); ++i)
        if (!data.videos[i].caption_indices.empty()) usable.push_back(i);
    if (usable.size() < cfg.batch_size)
        throw UsageError("train: batch_size " + std::to_string(cfg.batch_size) +
                         " exceeds the " + std::to_string(usable.size()) +
                         " captioned videos in the dataset");

    TrainResult<S> result;
    result.checkpoint.model = BiCNetModel<S>::build(cfg, data.dims);
    auto& model = result.checkpoint.model;
    result.checkpoint.adam = AdamState<S>::init(model.store, S(cfg.learning_rate));

    Rng shuffle_rng = Rng(cfg.seed).derive(2);
    Rng caption_rng = Rng(cfg.seed).derive(3);
    const FusionConfig fusion{cfg.lambda};
    const LossConfig loss_cfg{cfg.margin, cfg.hard_negatives};

    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs && !result.stopped_early; ++epoch) {
        std::vector<std::size_t> order = usable;
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start + 1 < order.size() && !result.stopped_early;
             start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, order.size() - start);
            if (b < 2) break; // a trailing singleton has no in-batch negative

            ++step;
            std::vector<Tensor<S>> rel_rows, glob_rows, text_rows;
            rel_rows.reserve(b);
            glob_rows.reserve(b);
            text_rows.reserve(b);
            try {
                for (std::size_t k = 0; k < b; ++k) {
                    const VideoItem& vid = data.videos[order[start + k]];
                    const auto& caps = vid.caption_indices;
                    const CaptionItem& cap = data.captions[caps[caption_rng.index(caps.size())]];
                    rel_rows.push_back(model.embed_relation(vid.regions));
                    glob_rows.push_back(model.embed_video_global(vid.frames));
                    text_rows.push_back(model.embed_text(cap.tokens));
                }
                auto scores = similarity_matrix(concat_rows(rel_rows), concat_rows(glob_rows),
                                                concat_rows(text_rows), fusion);
                auto loss = triplet_loss(scores, loss_cfg);
                model.store.zero_grads();
                backward(loss);
                adam_step(model.store, result.checkpoint.adam);
                result.checkpoint.step = step;

                result.trace.push_back({step, double(loss.item())});
                if (hooks.on_step && !hooks.on_step(step, double(loss.item())))
                    result.stopped_early = true;
                if (hooks.on_probe && hooks.probe_every && step % hooks.probe_every == 0 &&
                    !hooks.on_probe(model, step, double(loss.item())))
                    result.stopped_early = true;
            } catch (const NumericError& e) {
                throw NumericError("training aborted at step " + std::to_string(step) + ": " +
                                   e.what());
            }
        }
    }
    return result;
}

} // namespace bicnet
