// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bicnet/ablate.hpp"
#include "bicnet/evaluate.hpp"
#include "bicnet/gradcheck.hpp"
#include "bicnet/synthetic.hpp"
#include "bicnet/train.hpp"
#include "oracles.hpp"

using namespace bicnet;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const char* criterion, bool pass, const std::string& detail) {
    std::printf("[%s] %-28s %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

fs::path scratch_dir() {
    static fs::path p = [] {
        fs::path q = fs::temp_directory_path() / "bicnet_acceptance";
        fs::remove_all(q);
        fs::create_directories(q);
        return q;
    }();
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

char fmt_buf[512];
template <typename... A>
std::string fmt(const char* f, A... a) {
    std::snprintf(fmt_buf, sizeof fmt_buf, f, a...);
    return fmt_buf;
}

// --- criterion 1: gradient fidelity ----------------------------------------

void check_gradient_fidelity() {
    GradCheckSettings s; // d_* = 8, T = 3, N = 4, B = 4, every variant
    auto rep = run_gradcheck(s);
    double worst = 0;
    for (const auto& g : rep.groups) worst = std::max(worst, g.max_rel_err);
    const bool pass = rep.pass && rep.seconds < 60.0;
    report("gradient-fidelity", pass,
           fmt("max rel err %.3e over %zu groups (tolerance 1e-4), %.1fs (limit 60s)", worst,
               rep.groups.size(), rep.seconds));
}

// --- criterion 2: metric oracle equivalence ---------------------------------

void check_metric_oracle() {
    Rng rng(20260809);
    std::size_t checked = 0;
    bool pass = true;
    for (int trial = 0; trial < 1000 && pass; ++trial) {
        const std::size_t q = 1 + rng.index(100), v = 1 + rng.index(100);
        ScoreMatrix m;
        m.queries = q;
        m.items = v;
        m.scores.resize(q * v);
        const bool quantized = trial % 2 == 0; // every other matrix is tie-heavy
        for (auto& s : m.scores)
            s = quantized ? double(rng.index(5)) / 4.0 : rng.uniform(-1.0, 1.0);
        m.ground_truth.resize(q);
        for (auto& g : m.ground_truth) g = rng.index(v);

        const auto got = rank_of_truth(m);
        const auto want = oracle::ranks_by_stable_sort(m.scores, m.ground_truth, q, v);
        pass = pass && (got == want);
        for (std::size_t k : {std::size_t(1), std::size_t(5), std::size_t(10)})
            pass = pass && (recall_at_k(got, k) == oracle::recall_at_k(want, k));
        pass = pass && (median_rank(got) == oracle::lower_median(want));
        ++checked;
    }
    report("metric-oracle-equivalence", pass,
           fmt("%zu random matrices up to 100x100 incl. ties, exact match", checked));
}

// --- criterion 3: fused-similarity endpoints --------------------------------

void check_similarity_endpoints() {
    SyntheticSpec spec;
    spec.pairs = 12;
    spec.seed = 3;
    Dataset ds = load_dataset(generate_synthetic(spec, (scratch_dir() / "endpoints").string()));
    TrainConfig cfg;
    cfg.seed = 3;
    auto model = BiCNetModel<double>::build(cfg, ds.dims);

    const std::size_t nv = ds.videos.size(), nc = ds.captions.size();
    std::vector<std::vector<double>> rel(nv), glob(nv), txt(nc);
    for (std::size_t i = 0; i < nv; ++i) {
        NoGradGuard ng;
        auto r = model.embed_relation(ds.videos[i].regions);
        auto g = model.embed_video_global(ds.videos[i].frames);
        rel[i].assign(r.values().begin(), r.values().end());
        glob[i].assign(g.values().begin(), g.values().end());
    }
    for (std::size_t j = 0; j < nc; ++j) {
        NoGradGuard ng;
        auto t = model.embed_text(ds.captions[j].tokens);
        txt[j].assign(t.values().begin(), t.values().end());
    }

    auto at0 = evaluate(model, ds, 0.0);
    auto at1 = evaluate(model, ds, 1.0);
    bool pass = true;
    for (std::size_t q = 0; q < nc; ++q)
        for (std::size_t v = 0; v < nv; ++v) {
            pass = pass && at0.caption_by_video.scores[q * nv + v] == eval_cosine(glob[v], txt[q]);
            pass = pass && at1.caption_by_video.scores[q * nv + v] == eval_cosine(rel[v], txt[q]);
        }
    report("similarity-endpoints", pass,
           fmt("lambda 0 / 1 equal single-branch scoring bit-exactly on %zux%zu scores", nc, nv));
}

// --- criterion 4: zero-weight factor law ------------------------------------

void check_factor_law() {
    bool pass = true;
    std::string detail;
    for (std::size_t layers : {std::size_t(1), std::size_t(2)}) {
        TrainConfig cfg;
        cfg.layers = layers;
        cfg.seed = 4;
        DatasetDims dims{4, 5, 40, 32, 24, 48};
        auto model = BiCNetModel<double>::build(cfg, dims);
        apply_zero_probe(model);

        Rng rng(4000 + layers);
        Blob regions;
        regions.extents = {4, 5, 40};
        regions.data.resize(regions.numel());
        for (auto& v : regions.data) v = float(rng.normal());

        auto input = model.region_input(regions);
        auto pre_full = relation_features(input, model.relation, SRTVariant::FullSRT);
        auto pre_non = relation_features(input, model.relation, SRTVariant::NonSRT);

        // frame means of the projected input, via an independent matmul
        const std::size_t d = cfg.embed_dim;
        double norm_mean = 0;
        std::vector<std::vector<double>> means;
        for (const auto& frame : input.frames) {
            auto proj = oracle::matmul(
                std::vector<double>(frame.values().begin(), frame.values().end()),
                std::vector<double>(model.relation.proj_w.values().begin(),
                                    model.relation.proj_w.values().end()),
                frame.rows(), frame.cols(), d);
            std::vector<double> mean(d, 0.0);
            for (std::size_t i = 0; i < frame.rows(); ++i)
                for (std::size_t j = 0; j < d; ++j)
                    mean[j] += proj[i * d + j] + model.relation.proj_b.values()[j];
            for (auto& m : mean) {
                m /= double(frame.rows());
                norm_mean += m * m;
            }
            means.push_back(std::move(mean));
        }
        norm_mean = std::sqrt(norm_mean);

        double norm_full = 0;
        bool identity = true;
        for (std::size_t t = 0; t < means.size(); ++t)
            for (std::size_t j = 0; j < d; ++j) {
                norm_full += pre_full.at(t, j) * pre_full.at(t, j);
                identity = identity &&
                           std::abs(pre_non.at(t, j) - means[t][j]) <= 1e-15 * std::abs(means[t][j]);
            }
        norm_full = std::sqrt(norm_full);
        const double factor = double((1ull << layers) + 1) * double(1ull << layers);
        const bool law = std::abs(norm_full - factor * norm_mean) <= 1e-12 * factor * norm_mean;
        pass = pass && law && identity;
        detail += fmt("L=%zu factor %.0f ratio %.15f identity %s  ", layers, factor,
                      norm_full / norm_mean, identity ? "ok" : "BROKEN");
    }
    report("zero-weight-factor-law", pass, detail);
}

// --- criterion 5: permutation laws -------------------------------------------

Blob permute_regions_within_frames(const Blob& regions, Rng& rng) {
    Blob out = regions;
    const std::size_t t_count = regions.extents[0], n = regions.extents[1],
                      d = regions.extents[2];
    for (std::size_t t = 0; t < t_count; ++t) {
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        for (std::size_t i = 0; i < n; ++i)
            std::memcpy(out.data.data() + (t * n + i) * d,
                        regions.data.data() + (t * n + perm[i]) * d, d * sizeof(float));
    }
    return out;
}

Blob permute_frames_blob(const Blob& b, const std::vector<std::size_t>& perm) {
    Blob out = b;
    std::size_t row = 1;
    for (std::size_t i = 1; i < b.extents.size(); ++i) row *= b.extents[i];
    for (std::size_t t = 0; t < perm.size(); ++t)
        std::memcpy(out.data.data() + t * row, b.data.data() + perm[t] * row,
                    row * sizeof(float));
    return out;
}

void check_permutation_laws() {
    SyntheticSpec spec;
    spec.pairs = 1;
    spec.seed = 5;
    Dataset ds = load_dataset(generate_synthetic(spec, (scratch_dir() / "perm").string()));
    const auto& vid = ds.videos[0];
    Rng rng(55);
    std::vector<std::size_t> frame_perm{2, 0, 3, 1};

    auto max_abs_diff = [](const Tensor<double>& a, const Tensor<double>& b) {
        double m = 0;
        for (std::size_t i = 0; i < a.numel(); ++i)
            m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
        return m;
    };

    bool pass = true;
    std::string detail;
    {
        TrainConfig cfg;
        cfg.pe_temporal = false;
        cfg.seed = 5;
        auto model = BiCNetModel<double>::build(cfg, ds.dims);
        NoGradGuard ng;

        auto fr = model.embed_relation(vid.regions);
        auto fr_prop = model.embed_relation(permute_regions_within_frames(vid.regions, rng));
        const double d_prop = max_abs_diff(fr, fr_prop);

        auto fr_frame = model.embed_relation(permute_frames_blob(vid.regions, frame_perm));
        const double d_frame_r = max_abs_diff(fr, fr_frame);

        auto fv = model.embed_video_global(vid.frames);
        auto fv_frame = model.embed_video_global(permute_frames_blob(vid.frames, frame_perm));
        const double d_frame_v = max_abs_diff(fv, fv_frame);

        pass = pass && d_prop < 1e-6 && d_frame_r < 1e-6 && d_frame_v < 1e-6;
        detail += fmt("pe-off: proposal %.1e frame Fr %.1e Fv %.1e (all < 1e-6)  ", d_prop,
                      d_frame_r, d_frame_v);
    }
    {
        TrainConfig cfg;
        cfg.pe_temporal = true;
        cfg.seed = 5;
        auto model = BiCNetModel<double>::build(cfg, ds.dims);
        NoGradGuard ng;

        auto fr = model.embed_relation(vid.regions);
        auto fr_frame = model.embed_relation(permute_frames_blob(vid.regions, frame_perm));
        auto fv = model.embed_video_global(vid.frames);
        auto fv_frame = model.embed_video_global(permute_frames_blob(vid.frames, frame_perm));
        const double d_r = max_abs_diff(fr, fr_frame);
        const double d_v = max_abs_diff(fv, fv_frame);
        // proposal order stays irrelevant with the temporal tables on
        auto fr_prop = model.embed_relation(permute_regions_within_frames(vid.regions, rng));
        const double d_prop = max_abs_diff(fr, fr_prop);

        pass = pass && d_r > 1e-6 && d_v > 1e-6 && d_prop < 1e-6;
        detail += fmt("pe-on: frame Fr %.1e Fv %.1e (> 1e-6), proposal %.1e", d_r, d_v, d_prop);
    }
    report("permutation-laws", pass, detail);
}

// --- criterion 6: overfit run ------------------------------------------------

void check_overfit() {
    SyntheticSpec spec; // desk defaults: 32 pairs
    spec.seed = 1;
    Dataset ds = load_dataset(generate_synthetic(spec, (scratch_dir() / "overfit").string()));

    bool pass = true;
    std::string detail;
    for (SRTVariant variant : kAllVariants) {
        TrainConfig cfg; // desk defaults
        cfg.variant = variant;
        cfg.epochs = 1 + 2000 / (spec.pairs / cfg.batch_size);

        const auto t0 = std::chrono::steady_clock::now();
        bool met = false;
        std::uint64_t met_step = 0;
        TrainHooks<float> hooks;
        hooks.on_step = [](std::uint64_t step, double) { return step < 2000; };
        hooks.probe_every = 50;
        hooks.on_probe = [&](const BiCNetModel<float>& model, std::uint64_t step, double loss) {
            if (loss >= 0.05) return true;
            auto ev = evaluate(model, ds);
            if (ev.t2v.r_at.at(1) == 1.0 && ev.v2t.r_at.at(1) == 1.0) {
                met = true;
                met_step = step;
                return false;
            }
            return true;
        };
        auto result = train<float>(cfg, ds, hooks);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool ok = met && met_step <= 2000 && secs < 300.0;
        pass = pass && ok;
        detail += fmt("%s: %s at step %llu (%.0fs)  ", to_string(variant), ok ? "met" : "NOT MET",
                      (unsigned long long)met_step, secs);
    }
    report("overfit-32-pairs", pass, detail);
}

// --- criterion 7: chance-level sanity ----------------------------------------

void check_chance_level() {
    const std::size_t pairs = 200, seeds = 10;
    double sum_r10 = 0;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        SyntheticSpec spec;
        spec.pairs = pairs;
        spec.seed = 1000 + seed;
        Dataset ds = load_dataset(
            generate_synthetic(spec, (scratch_dir() / ("chance" + std::to_string(seed))).string()));
        TrainConfig cfg;
        cfg.seed = seed; // untrained random weights
        auto model = BiCNetModel<float>::build(cfg, ds.dims);
        auto ev = evaluate(model, ds);
        sum_r10 += ev.t2v.r_at.at(10);
    }
    const double mean = sum_r10 / double(seeds);
    const double p = 10.0 / double(pairs);
    const double sd = std::sqrt(p * (1 - p) / double(pairs * seeds));
    const bool pass = std::abs(mean - p) <= 3.0 * sd;
    report("chance-level-sanity", pass,
           fmt("mean R@10 %.4f vs %.4f +- %.4f (3 sd over %zu seeds)", mean, p, 3.0 * sd, seeds));
}

// --- criterion 8: determinism and persistence ---------------------------------

void check_determinism_persistence() {
#ifdef _OPENMP
    const int prev_threads = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
    SyntheticSpec spec;
    spec.pairs = 8;
    spec.dims = DatasetDims{3, 4, 10, 8, 6, 9};
    spec.seed = 8;
    Dataset ds = load_dataset(generate_synthetic(spec, (scratch_dir() / "determinism").string()));
    TrainConfig cfg;
    cfg.embed_dim = cfg.global_dim = 16;
    cfg.mlp_hidden = 32;
    cfg.layers = 1;
    cfg.batch_size = 4;
    cfg.epochs = 3;
    cfg.seed = 8;

    auto r1 = train<float>(cfg, ds);
    auto r2 = train<float>(cfg, ds);
    bool traces_equal = r1.trace.size() == r2.trace.size();
    for (std::size_t i = 0; traces_equal && i < r1.trace.size(); ++i)
        traces_equal = r1.trace[i].loss == r2.trace[i].loss;

    const auto p1 = (scratch_dir() / "run1.ckpt").string();
    const auto p2 = (scratch_dir() / "run2.ckpt").string();
    save_checkpoint(r1.checkpoint, p1);
    save_checkpoint(r2.checkpoint, p2);
    const bool ckpt_equal = slurp(p1) == slurp(p2);

    auto loaded = load_checkpoint<float>(p1);
    auto e1 = evaluate(r1.checkpoint.model, ds);
    auto e2 = evaluate(loaded.model, ds);
    const bool eval_equal =
        e1.caption_by_video.scores == e2.caption_by_video.scores && e1.t2v.r_at == e2.t2v.r_at &&
        e1.v2t.r_at == e2.v2t.r_at && e1.t2v.med_r == e2.t2v.med_r;

    // ingest must reject a dims-mismatched blob
    bool ingest_rejects = false;
    try {
        Blob bad;
        bad.extents = {3, 5, 10}; // proposals lie: 5 instead of 4
        bad.data.assign(bad.numel(), 0.5f);
        write_blob((scratch_dir() / "determinism/blobs/vid0.regions.bicf").string(), bad);
        load_dataset((scratch_dir() / "determinism/manifest.txt").string());
    } catch (const IngestError&) {
        ingest_rejects = true;
    }
#ifdef _OPENMP
    omp_set_num_threads(prev_threads);
#endif
    const bool pass = traces_equal && ckpt_equal && eval_equal && ingest_rejects;
    report("determinism-and-persistence", pass,
           fmt("traces %s, checkpoints %s, eval round-trip %s, ingest rejection %s",
               traces_equal ? "bitwise-equal" : "DIFFER", ckpt_equal ? "bitwise-equal" : "DIFFER",
               eval_equal ? "exact" : "DIFFER", ingest_rejects ? "ok" : "MISSING"));
}

// --- criterion 9: ablation table ----------------------------------------------

void check_ablation_table() {
    SyntheticSpec spec;
    spec.pairs = 8;
    spec.dims = DatasetDims{3, 4, 10, 8, 6, 9};
    spec.seed = 9;
    const std::string manifest =
        generate_synthetic(spec, (scratch_dir() / "ablation").string());

    std::string table_text;
    const char* cli = std::getenv("BICNET_CLI");
    if (cli && fs::exists(cli)) {
        // one command produces the table
        const std::string cfg_path = (scratch_dir() / "ablation.cfg").string();
        TrainConfig cfg;
        cfg.embed_dim = cfg.global_dim = 16;
        cfg.mlp_hidden = 32;
        cfg.layers = 1;
        cfg.batch_size = 4;
        cfg.epochs = 2;
        cfg.seed = 9;
        std::ofstream(cfg_path) << cfg.serialize();
        const std::string out_path = (scratch_dir() / "ablation.out").string();
        const std::string cmd = std::string(cli) + " ablate --config " + cfg_path + " --data " +
                                manifest + " > " + out_path + " 2> /dev/null";
        const int rc = std::system(cmd.c_str());
        if (rc == 0) table_text = slurp(out_path);
    }
    if (table_text.empty()) {
        // library fallback when the CLI binary is not provided
        TrainConfig cfg;
        cfg.embed_dim = cfg.global_dim = 16;
        cfg.mlp_hidden = 32;
        cfg.layers = 1;
        cfg.batch_size = 4;
        cfg.epochs = 2;
        cfg.seed = 9;
        Dataset ds = load_dataset(manifest);
        table_text = ablate<float>(cfg, ds).render();
    }

    bool pass = true;
    std::size_t rows = 0;
    for (const char* name : {"NonSRT", "SpatialSRT", "TemporalSRT", "SpatioTemporalSRT",
                             "FullSRT"}) {
        pass = pass && table_text.find(name) != std::string::npos;
        ++rows;
    }
    for (const char* col : {"t2v.r1", "t2v.r5", "t2v.r10", "t2v.medr", "v2t.r1", "v2t.r5",
                            "v2t.r10", "v2t.medr"})
        pass = pass && table_text.find(col) != std::string::npos;
    // exactly one header line + five variant rows
    const std::size_t lines = std::count(table_text.begin(), table_text.end(), '\n');
    pass = pass && lines == 6;
    report("ablation-table", pass,
           fmt("five variant rows + direction/metric header (%zu lines)", lines));
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    check_gradient_fidelity();
    check_metric_oracle();
    check_similarity_endpoints();
    check_factor_law();
    check_permutation_laws();
    check_overfit();
    check_chance_level();
    check_determinism_persistence();
    check_ablation_table();
    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
