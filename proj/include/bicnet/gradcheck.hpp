#pragma once

// Central finite-difference verification of the reverse-mode gradients, run
// at 64-bit precision over tiny dims: the full three-branch loss for every
// variant, each parameter perturbed scalar by scalar.

#include <chrono>
#include <string>
#include <vector>

#include "bicnet/retrieval.hpp"
#include "bicnet/train.hpp"

namespace bicnet {

struct GradCheckGroup {
    std::string name; // e.g. "FullSRT:relation.spatial"
    double max_rel_err = 0.0;
    std::size_t scalars = 0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    bool pass = true;
    double seconds = 0.0;
    double tolerance = 1e-4;
};

namespace gradcheckdetail {

inline std::string group_of(const std::string& param_name) {
    // First two path components: "relation.spatial.l0.attn.wq.0" -> "relation.spatial".
    std::size_t first = param_name.find('.');
    if (first == std::string::npos) return param_name;
    std::size_t second = param_name.find('.', first + 1);
    return second == std::string::npos ? param_name : param_name.substr(0, second);
}

inline Blob random_blob(std::vector<std::uint32_t> extents, Rng& rng) {
    Blob b;
    b.extents = std::move(extents);
    b.data.resize(b.numel());
    for (auto& v : b.data) v = float(rng.normal());
    return b;
}

} // namespace gradcheckdetail

struct GradCheckSettings {
    std::uint64_t seed = 7;
    double step = 1e-5;
    double tolerance = 1e-4;
    std::size_t batch = 4;
    DatasetDims dims{3, 4, 6, 5, 4, 7}; // T, N, d_r, d_a, d_m3, d_t
    std::size_t embed_dim = 8;
    std::size_t heads = 2;
    std::size_t layers = 1;
    std::vector<SRTVariant> variants{std::begin(kAllVariants), std::end(kAllVariants)};
    // Test hook: adds a bias to one analytic gradient of the named group so
    // the comparison must fail there.
    std::string corrupt_group;
};

inline GradCheckReport run_gradcheck(const GradCheckSettings& s = {}) {
    using S = double; // Verification64
    const auto t0 = std::chrono::steady_clock::now();
    GradCheckReport report;
    report.tolerance = s.tolerance;

    Rng data_rng = Rng(s.seed).derive(11);
    std::vector<Blob> regions, frames, tokens;
    for (std::size_t i = 0; i < s.batch; ++i) {
        regions.push_back(gradcheckdetail::random_blob(
            {std::uint32_t(s.dims.frames), std::uint32_t(s.dims.proposals),
             std::uint32_t(s.dims.region_dim)},
            data_rng));
        frames.push_back(gradcheckdetail::random_blob(
            {std::uint32_t(s.dims.frames), std::uint32_t(s.dims.frame_feature_dim())}, data_rng));
        tokens.push_back(gradcheckdetail::random_blob(
            {std::uint32_t(3), std::uint32_t(s.dims.token_dim)}, data_rng));
    }

    for (SRTVariant variant : s.variants) {
        TrainConfig cfg;
        cfg.embed_dim = cfg.global_dim = s.embed_dim;
        cfg.heads = s.heads;
        cfg.layers = s.layers;
        cfg.seed = s.seed;
        cfg.variant = variant;
        cfg.batch_size = s.batch;
        cfg.scalar_kind = ScalarKind::Verification64;
        auto model = BiCNetModel<S>::build(cfg, s.dims);

        const FusionConfig fusion{cfg.lambda};
        const LossConfig loss_cfg{cfg.margin, false};
        auto forward_loss = [&]() -> S {
            std::vector<Tensor<S>> r, g, t;
            for (std::size_t i = 0; i < s.batch; ++i) {
                r.push_back(model.embed_relation(regions[i]));
                g.push_back(model.embed_video_global(frames[i]));
                t.push_back(model.embed_text(tokens[i]));
            }
            auto scores =
                similarity_matrix(concat_rows(r), concat_rows(g), concat_rows(t), fusion);
            return triplet_loss(scores, loss_cfg).item();
        };

        // Analytic pass.
        model.store.zero_grads();
        {
            std::vector<Tensor<S>> r, g, t;
            for (std::size_t i = 0; i < s.batch; ++i) {
                r.push_back(model.embed_relation(regions[i]));
                g.push_back(model.embed_video_global(frames[i]));
                t.push_back(model.embed_text(tokens[i]));
            }
            auto scores =
                similarity_matrix(concat_rows(r), concat_rows(g), concat_rows(t), fusion);
            auto loss = triplet_loss(scores, loss_cfg);
            backward(loss);
        }

        std::vector<GradCheckGroup> groups;
        auto group_ref = [&](const std::string& gname) -> GradCheckGroup& {
            for (auto& g : groups)
                if (g.name == gname) return g;
            groups.push_back({gname, 0.0, 0, true});
            return groups.back();
        };

        bool corrupted = false;
        for (auto& p : model.store.all()) {
            const std::string gname =
                std::string(to_string(variant)) + ":" + gradcheckdetail::group_of(p.name);
            auto& group = group_ref(gname);
            auto w = p.value.values_mut();
            auto analytic = p.value.grad();
            for (std::size_t i = 0; i < w.size(); ++i) {
                const S keep = w[i];
                NoGradGuard ng;
                w[i] = keep + S(s.step);
                const S up = forward_loss();
                w[i] = keep - S(s.step);
                const S down = forward_loss();
                w[i] = keep;
                const S numeric = (up - down) / (S(2) * S(s.step));
                S a = analytic[i];
                if (!corrupted && !s.corrupt_group.empty() &&
                    gname.find(s.corrupt_group) != std::string::npos) {
                    a += S(0.01);
                    corrupted = true;
                }
                const S denom = std::max({std::abs(a), std::abs(numeric), S(1e-6)});
                const S rel = std::abs(a - numeric) / denom;
                group.scalars += 1;
                if (rel > group.max_rel_err) group.max_rel_err = rel;
            }
        }
        for (auto& g : groups) {
            g.pass = g.max_rel_err < s.tolerance;
            report.pass = report.pass && g.pass;
            report.groups.push_back(std::move(g));
        }
    }

    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

} // namespace bicnet
