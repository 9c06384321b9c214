#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bicnet/evaluate.hpp"
#include "bicnet/metrics.hpp"
#include "bicnet/retrieval.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace bicnet;
using testutil::fd_max_rel_err;
using testutil::random_tensor;

using D = double;

TEST_CASE("similarity endpoints and midpoint") {
    Rng rng(71);
    auto fr = random_tensor<D>({1, 6}, rng, false);
    auto fv = random_tensor<D>({1, 6}, rng, false);
    auto ft = random_tensor<D>({1, 6}, rng, false);

    auto at_zero = similarity(fr, fv, ft, FusionConfig{0.0});
    CHECK(at_zero.item() == cosine(fv, ft).item());

    auto at_one = similarity(fr, fv, ft, FusionConfig{1.0});
    CHECK(at_one.item() == cosine(fr, ft).item());

    // orthogonal pair and identical pair give cosines 0 and 1
    auto e1 = Tensor<D>::from_values({1, 2}, {1, 0});
    auto e2 = Tensor<D>::from_values({1, 2}, {0, 1});
    auto mid = similarity(e1, e2, e1, FusionConfig{0.5});
    CHECK(mid.item() == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(similarity(fr, fv, random_tensor<D>({1, 4}, rng, false), FusionConfig{0.5}),
                    DimensionError);
    CHECK_THROWS_AS(similarity(fr, fv, ft, FusionConfig{1.5}), ConfigError);
}

TEST_CASE("fused score is monotone in each cosine term") {
    const FusedScorer fuse{0.3};
    const double base = fuse(0.2, 0.4);
    CHECK(fuse(0.3, 0.4) > base);
    CHECK(fuse(0.2, 0.5) > base);
}

TEST_CASE("similarity matrix equals pairwise similarity") {
    Rng rng(72);
    auto fr = random_tensor<D>({3, 5}, rng, false);
    auto fv = random_tensor<D>({3, 5}, rng, false);
    auto ft = random_tensor<D>({2, 5}, rng, false);
    FusionConfig cfg{0.5};
    auto m = similarity_matrix(fr, fv, ft, cfg);
    REQUIRE(m.shape() == Shape{3, 2});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            auto ri = slice_rows(fr, i, i + 1);
            auto vi = slice_rows(fv, i, i + 1);
            auto tj = slice_rows(ft, j, j + 1);
            CHECK(std::abs(m.at(i, j) - similarity(ri, vi, tj, cfg).item()) < 1e-12);
        }
}

TEST_CASE("rank_of_truth basics and tie rule") {
    ScoreMatrix m;
    m.queries = 2;
    m.items = 3;
    m.scores = {0.9, 0.1, 0.5, /*q1*/ 0.4, 0.4, 0.4};
    m.ground_truth = {0, 0};
    auto ranks = rank_of_truth(m);
    CHECK(ranks[0] == 1); // unique max
    CHECK(ranks[1] == 1); // all equal, truth at index 0 wins ties

    m.ground_truth = {2, 2};
    ranks = rank_of_truth(m);
    CHECK(ranks[0] == 2);  // 0.5 behind 0.9
    CHECK(ranks[1] == 3);  // equal scores at smaller indices rank first
}

TEST_CASE("rank_of_truth matches the stable-sort oracle on random matrices") {
    Rng rng(73);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t q = 1 + rng.index(50), v = 1 + rng.index(50);
        ScoreMatrix m;
        m.queries = q;
        m.items = v;
        m.scores.resize(q * v);
        // coarse grid of values forces plenty of ties
        for (auto& s : m.scores) s = double(rng.index(7)) / 3.0 - 1.0;
        m.ground_truth.resize(q);
        for (auto& g : m.ground_truth) g = rng.index(v);
        auto got = rank_of_truth(m);
        auto want = oracle::ranks_by_stable_sort(m.scores, m.ground_truth, q, v);
        CHECK(got == want);
    }
}

TEST_CASE("recall_at_k closed forms") {
    CHECK(recall_at_k({1, 1, 1}, 1) == 1.0);
    CHECK(recall_at_k({1, 3, 11}, 10) == doctest::Approx(2.0 / 3).epsilon(1e-12));
    std::vector<std::size_t> ranks{4, 9, 2, 7};
    CHECK(recall_at_k(ranks, 9) == 1.0); // K = item count covers everything
    CHECK_THROWS_AS(recall_at_k(ranks, 0), UsageError);
}

TEST_CASE("median_rank lower-median rule") {
    CHECK(median_rank({2}) == 2);
    CHECK(median_rank({1, 2, 3}) == 2);
    CHECK(median_rank({1, 2, 3, 10}) == 2);
    CHECK_THROWS_AS(median_rank({}), UsageError);
}

TEST_CASE("recall is non-decreasing in K and r_at[V] is one") {
    Rng rng(74);
    ScoreMatrix m;
    m.queries = 40;
    m.items = 25;
    m.scores.resize(m.queries * m.items);
    for (auto& s : m.scores) s = rng.normal();
    m.ground_truth.resize(m.queries);
    for (auto& g : m.ground_truth) g = rng.index(m.items);
    auto ranks = rank_of_truth(m);
    double prev = 0.0;
    for (std::size_t k = 1; k <= m.items; ++k) {
        const double r = recall_at_k(ranks, k);
        CHECK(r >= prev);
        prev = r;
    }
    CHECK(recall_at_k(ranks, m.items) == 1.0);
}

TEST_CASE("metrics are invariant under strictly increasing score transforms") {
    Rng rng(75);
    ScoreMatrix m;
    m.queries = 30;
    m.items = 20;
    m.scores.resize(m.queries * m.items);
    for (auto& s : m.scores) s = rng.uniform(-1.0, 1.0);
    m.ground_truth.resize(m.queries);
    for (auto& g : m.ground_truth) g = rng.index(m.items);

    auto base = rank_of_truth(m);
    ScoreMatrix affine = m;
    for (auto& s : affine.scores) s = 2.0 * s + 3.0;
    ScoreMatrix tanhed = m;
    for (auto& s : tanhed.scores) s = std::tanh(s);
    CHECK(rank_of_truth(affine) == base);
    CHECK(rank_of_truth(tanhed) == base);
}

TEST_CASE("triplet loss differentiates through the embeddings") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed + 700);
        auto fr = random_tensor<D>({3, 4}, rng);
        auto fv = random_tensor<D>({3, 4}, rng);
        auto ft = random_tensor<D>({3, 4}, rng);
        const double err = fd_max_rel_err<D>(
            [&] {
                return triplet_loss(similarity_matrix(fr, fv, ft, FusionConfig{0.5}),
                                    LossConfig{0.2, false});
            },
            {fr, fv, ft});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("metric records are stable and machine-parseable") {
    RetrievalMetrics m;
    m.r_at = {{1, 0.5}, {5, 0.75}, {10, 1.0}};
    m.med_r = 2;
    const std::string records = format_metric_records("t2v", m);
    CHECK(records == "t2v.r1 0.500000\nt2v.r5 0.750000\nt2v.r10 1.000000\nt2v.medr 2\n");
}

TEST_CASE("score matrix transposition swaps directions") {
    ScoreMatrix m;
    m.queries = 2;
    m.items = 3;
    m.scores = {1, 2, 3, 4, 5, 6};
    m.ground_truth = {0, 1};
    auto t = m.transposed();
    CHECK(t.queries == 3);
    CHECK(t.items == 2);
    for (std::size_t q = 0; q < 2; ++q)
        for (std::size_t v = 0; v < 3; ++v) CHECK(t.at(v, q) == m.at(q, v));
}
