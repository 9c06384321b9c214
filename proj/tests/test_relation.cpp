#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bicnet/model.hpp"
#include "bicnet/relation.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace bicnet;
using testutil::fd_max_rel_err;
using testutil::random_tensor;

using D = double;

namespace {

struct Fixture {
    ParameterStore<D> store;
    SRTWeights<D> w;
    BlockConfig cfg;

    Fixture(std::size_t layers, std::size_t d = 4, std::size_t d_r = 3, std::size_t frames = 3,
            std::size_t proposals = 4, bool temporal_pe = false, std::uint64_t seed = 21)
        : cfg{d, 2, 2 * d, layers} {
        Rng rng(seed);
        w = SRTWeights<D>::create(cfg, d_r, frames, proposals, temporal_pe, false, "srt", store,
                                  rng);
    }

    void zero_probe() {
        auto zero = [](Tensor<D>& t) {
            for (auto& v : t.values_mut()) v = 0.0;
        };
        for (auto& b : w.spatial) {
            zero(b.wo);
            zero(b.w2);
            zero(b.b2);
        }
        for (auto& b : w.temporal) {
            zero(b.wo);
            zero(b.w2);
            zero(b.b2);
        }
        zero(w.agg.query);
        w.temporal_pe.enabled = false;
        w.proposal_pe.enabled = false;
    }
};

RegionInput<D> random_regions(std::size_t frames, std::size_t proposals, std::size_t d_r,
                              Rng& rng) {
    RegionInput<D> in;
    for (std::size_t t = 0; t < frames; ++t) {
        in.frames.push_back(random_tensor<D>({proposals, d_r}, rng, false));
        in.real_rows.emplace_back(proposals, true);
    }
    return in;
}

// Projection + per-frame proposal mean, computed with the oracle matmul and
// an ascending-order mean so it can be compared bit for bit.
std::vector<std::vector<D>> projected_frame_means(const RegionInput<D>& in,
                                                  const SRTWeights<D>& w) {
    const std::size_t d_r = in.frames[0].cols(), d = w.proj_w.cols();
    std::vector<std::vector<D>> means;
    for (const auto& frame : in.frames) {
        const std::size_t n = frame.rows();
        auto proj =
            oracle::matmul(std::vector<D>(frame.values().begin(), frame.values().end()),
                           std::vector<D>(w.proj_w.values().begin(), w.proj_w.values().end()), n,
                           d_r, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) proj[i * d + j] += w.proj_b.values()[j];
        std::vector<D> mean(d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += proj[i * d + j];
        for (auto& v : mean) v /= D(n);
        means.push_back(std::move(mean));
    }
    return means;
}

RegionInput<D> permute_proposals(const RegionInput<D>& in, const std::vector<std::size_t>& perm) {
    RegionInput<D> out;
    for (std::size_t t = 0; t < in.frames.size(); ++t) {
        const auto& f = in.frames[t];
        std::vector<D> v(f.numel());
        for (std::size_t i = 0; i < perm.size(); ++i)
            for (std::size_t j = 0; j < f.cols(); ++j) v[i * f.cols() + j] = f.at(perm[i], j);
        out.frames.push_back(Tensor<D>::from_values(f.shape(), std::move(v)));
        std::vector<bool> mask(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) mask[i] = in.real_rows[t][perm[i]];
        out.real_rows.push_back(std::move(mask));
    }
    return out;
}

RegionInput<D> permute_frames(const RegionInput<D>& in, const std::vector<std::size_t>& perm) {
    RegionInput<D> out;
    for (std::size_t t : perm) {
        out.frames.push_back(in.frames[t]);
        out.real_rows.push_back(in.real_rows[t]);
    }
    return out;
}

} // namespace

TEST_CASE("spatial stage doubling and identity closed forms") {
    for (std::size_t layers : {std::size_t(1), std::size_t(2), std::size_t(3)}) {
        Fixture fx(layers);
        fx.zero_probe();
        Rng rng(31);
        auto y = random_tensor<D>({4, 4}, rng, false);

        auto doubled = spatial_stage(y, fx.w, SRTVariant::FullSRT);
        const D factor = D(1ull << layers);
        for (std::size_t i = 0; i < y.numel(); ++i)
            CHECK(doubled.values()[i] == factor * y.values()[i]);

        auto same = spatial_stage(y, fx.w, SRTVariant::NonSRT);
        for (std::size_t i = 0; i < y.numel(); ++i) CHECK(same.values()[i] == y.values()[i]);

        auto temporal_only = spatial_stage(y, fx.w, SRTVariant::TemporalSRT);
        for (std::size_t i = 0; i < y.numel(); ++i)
            CHECK(temporal_only.values()[i] == y.values()[i]);
    }
}

TEST_CASE("spatial stage is equivariant to proposal order") {
    Fixture fx(2);
    Rng rng(32);
    auto y = random_tensor<D>({4, 4}, rng, false);
    std::vector<std::size_t> perm{2, 0, 3, 1};
    std::vector<D> pv(y.numel());
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) pv[i * 4 + j] = y.at(perm[i], j);
    auto py = Tensor<D>::from_values({4, 4}, std::move(pv));

    auto out_p = spatial_stage(py, fx.w, SRTVariant::FullSRT);
    auto out = spatial_stage(y, fx.w, SRTVariant::FullSRT);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(std::abs(out_p.at(i, j) - out.at(perm[i], j)) < 1e-6);
}

TEST_CASE("pool_proposals closed forms and oracle") {
    SUBCASE("single proposal is the identity over remaining axes") {
        Rng rng(33);
        std::vector<Tensor<D>> frames{random_tensor<D>({1, 3}, rng, false)};
        std::vector<std::vector<bool>> masks{{true}};
        auto out = pool_proposals(frames, masks);
        for (std::size_t j = 0; j < 3; ++j) CHECK(out.values()[j] == frames[0].values()[j]);
    }

    SUBCASE("opposite proposals cancel") {
        auto f = Tensor<D>::from_values({2, 3}, {1.5, -2.0, 0.25, -1.5, 2.0, -0.25});
        std::vector<Tensor<D>> frames{f};
        std::vector<std::vector<bool>> masks{{true, true}};
        auto out = pool_proposals(frames, masks);
        for (auto v : out.values()) CHECK(v == 0.0);
    }

    SUBCASE("matches an explicit loop over a 3x4x2 block") {
        Rng rng(34);
        std::vector<Tensor<D>> frames;
        std::vector<std::vector<bool>> masks;
        for (int t = 0; t < 3; ++t) {
            frames.push_back(random_tensor<D>({4, 2}, rng, false));
            masks.emplace_back(4, true);
        }
        auto out = pool_proposals(frames, masks);
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t j = 0; j < 2; ++j) {
                D acc = 0;
                for (std::size_t i = 0; i < 4; ++i) acc += frames[t].at(i, j);
                CHECK(out.at(t, j) == acc / 4.0);
            }
    }

    SUBCASE("padded rows are excluded from the mean") {
        auto f = Tensor<D>::from_values({3, 2}, {2, 4, 100, 100, 4, 8});
        std::vector<Tensor<D>> frames{f};
        std::vector<std::vector<bool>> masks{{true, false, true}};
        auto out = pool_proposals(frames, masks);
        CHECK(out.values()[0] == 3.0);
        CHECK(out.values()[1] == 6.0);
    }

    SUBCASE("an all-padding frame pools to zero") {
        auto f = Tensor<D>::from_values({2, 2}, {1, 2, 3, 4});
        std::vector<Tensor<D>> frames{f};
        std::vector<std::vector<bool>> masks{{false, false}};
        auto out = pool_proposals(frames, masks);
        for (auto v : out.values()) CHECK(v == 0.0);
    }
}

TEST_CASE("temporal stage closed forms and equivariance") {
    Fixture fx(2);
    fx.zero_probe();
    Rng rng(35);
    auto z = random_tensor<D>({3, 4}, rng, false);

    auto doubled = temporal_stage(z, fx.w, SRTVariant::FullSRT);
    for (std::size_t i = 0; i < z.numel(); ++i) CHECK(doubled.values()[i] == 4.0 * z.values()[i]);

    auto same = temporal_stage(z, fx.w, SRTVariant::SpatialSRT);
    for (std::size_t i = 0; i < z.numel(); ++i) CHECK(same.values()[i] == z.values()[i]);

    Fixture live(1); // non-zeroed weights, temporal PE off
    std::vector<std::size_t> perm{2, 0, 1};
    std::vector<D> pv(z.numel());
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) pv[i * 4 + j] = z.at(perm[i], j);
    auto pz = Tensor<D>::from_values({3, 4}, std::move(pv));
    auto out_p = temporal_stage(pz, live.w, SRTVariant::FullSRT);
    auto out = temporal_stage(z, live.w, SRTVariant::FullSRT);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(std::abs(out_p.at(i, j) - out.at(perm[i], j)) < 1e-6);
}

TEST_CASE("zero-weight factor law on the full branch") {
    for (std::size_t layers : {std::size_t(1), std::size_t(2)}) {
        Fixture fx(layers);
        fx.zero_probe();
        Rng rng(36);
        auto regions = random_regions(3, 4, 3, rng);

        auto means = projected_frame_means(regions, fx.w);
        auto pre_agg = relation_features(regions, fx.w, SRTVariant::FullSRT);

        const D stage_factor = D(1ull << layers); // per stage: 2^L
        REQUIRE(pre_agg.rows() == 3);
        double norm_got = 0, norm_mean = 0;
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t j = 0; j < 4; ++j) {
                const D z0 = stage_factor * means[t][j];
                const D expect = stage_factor * z0 + z0; // replicates the one rounding add
                CHECK(pre_agg.at(t, j) == expect);
                norm_got += pre_agg.at(t, j) * pre_agg.at(t, j);
                norm_mean += means[t][j] * means[t][j];
            }
        const double factor = double((1ull << layers) + 1) * double(1ull << layers);
        CHECK(std::sqrt(norm_got) ==
              doctest::Approx(factor * std::sqrt(norm_mean)).epsilon(1e-12));

        // embedding under the zero aggregator query is the unweighted mean
        auto emb = relation_embed(regions, fx.w, SRTVariant::FullSRT);
        for (std::size_t j = 0; j < 4; ++j) {
            D mean = 0;
            for (std::size_t t = 0; t < 3; ++t) mean += pre_agg.at(t, j);
            mean /= 3.0;
            CHECK(emb.values()[j] == doctest::Approx(mean).epsilon(1e-12));
        }
    }
}

TEST_CASE("NonSRT with zeroed sublayers is the identity pipeline") {
    Fixture fx(2);
    fx.zero_probe();
    Rng rng(37);
    auto regions = random_regions(3, 4, 3, rng);
    auto means = projected_frame_means(regions, fx.w);
    auto pre_agg = relation_features(regions, fx.w, SRTVariant::NonSRT);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t j = 0; j < 4; ++j) CHECK(pre_agg.at(t, j) == means[t][j]);

    auto emb = relation_embed(regions, fx.w, SRTVariant::NonSRT);
    for (std::size_t j = 0; j < 4; ++j) {
        D mean = 0;
        for (std::size_t t = 0; t < 3; ++t) mean += means[t][j];
        mean /= 3.0;
        CHECK(emb.values()[j] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("relation embedding is invariant to proposal order") {
    Fixture fx(2);
    Rng rng(38);
    auto regions = random_regions(3, 4, 3, rng);
    auto permuted = permute_proposals(regions, {3, 1, 0, 2});
    for (SRTVariant v : kAllVariants) {
        auto a = relation_embed(regions, fx.w, v);
        auto b = relation_embed(permuted, fx.w, v);
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(a.values()[j] - b.values()[j]) < 1e-6);
    }
}

TEST_CASE("frame order: invariant with PE off, sensitive with PE on") {
    Rng rng(39);
    auto regions = random_regions(3, 4, 3, rng);
    auto permuted = permute_frames(regions, {2, 0, 1});

    Fixture off(1, 4, 3, 3, 4, /*temporal_pe=*/false);
    auto a = relation_embed(regions, off.w, SRTVariant::FullSRT);
    auto b = relation_embed(permuted, off.w, SRTVariant::FullSRT);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(a.values()[j] - b.values()[j]) < 1e-6);

    Fixture on(1, 4, 3, 3, 4, /*temporal_pe=*/true);
    auto c = relation_embed(regions, on.w, SRTVariant::FullSRT);
    auto d = relation_embed(permuted, on.w, SRTVariant::FullSRT);
    double max_diff = 0;
    for (std::size_t j = 0; j < 4; ++j)
        max_diff = std::max(max_diff, std::abs(c.values()[j] - d.values()[j]));
    CHECK(max_diff > 1e-6);
}

TEST_CASE("variants with shared weights produce five distinct embeddings") {
    Fixture fx(2);
    Rng rng(40);
    auto regions = random_regions(3, 4, 3, rng);
    std::vector<std::vector<D>> embeds;
    for (SRTVariant v : kAllVariants) {
        auto e = relation_embed(regions, fx.w, v);
        embeds.emplace_back(e.values().begin(), e.values().end());
    }
    for (std::size_t a = 0; a < embeds.size(); ++a)
        for (std::size_t b = a + 1; b < embeds.size(); ++b) {
            double dist = 0;
            for (std::size_t j = 0; j < 4; ++j)
                dist += (embeds[a][j] - embeds[b][j]) * (embeds[a][j] - embeds[b][j]);
            CHECK(std::sqrt(dist) > 1e-6);
        }
}

TEST_CASE("full-branch gradient check for every variant") {
    for (SRTVariant variant : kAllVariants) {
        Fixture fx(1, 4, 3, 2, 3, /*temporal_pe=*/true, /*seed=*/41);
        Rng rng(42);
        auto regions = random_regions(2, 3, 3, rng);
        auto probe = random_tensor<D>({1, 4}, rng, false);
        std::vector<Tensor<D>> inputs;
        for (auto& p : fx.store.all()) inputs.push_back(p.value);
        const double err = fd_max_rel_err<D>(
            testutil::weighted_sum_root<D>([&] { return relation_embed(regions, fx.w, variant); },
                                           probe),
            inputs);
        CAPTURE(to_string(variant));
        CHECK(err < 1e-4);
    }
}

TEST_CASE("region ingestion marks all-zero raw rows as padding") {
    TrainConfig cfg;
    cfg.embed_dim = cfg.global_dim = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    DatasetDims dims{2, 3, 4, 3, 2, 5};
    auto model = BiCNetModel<D>::build(cfg, dims);

    Blob regions;
    regions.extents = {2, 3, 4};
    regions.data.assign(2 * 3 * 4, 1.0f);
    for (std::size_t j = 0; j < 4; ++j) regions.data[(0 * 3 + 1) * 4 + j] = 0.0f; // pad row

    auto in = model.region_input(regions);
    CHECK(in.real_rows[0] == std::vector<bool>{true, false, true});
    CHECK(in.real_rows[1] == std::vector<bool>{true, true, true});
}
