// Command-line surface: synthetic data generation, training, evaluation,
// the variant ablation sweep, gradient checking and attention dumps.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "bicnet/ablate.hpp"
#include "bicnet/evaluate.hpp"
#include "bicnet/gradcheck.hpp"
#include "bicnet/synthetic.hpp"
#include "bicnet/train.hpp"

namespace fs = std::filesystem;
using namespace bicnet;

namespace {

Dataset load_data_checked(const std::string& manifest, const std::string& expect_split) {
    Dataset ds = load_dataset(manifest);
    if (!expect_split.empty() && ds.split != expect_split)
        throw UsageError("dataset split is '" + ds.split + "', expected '" + expect_split + "'");
    return ds;
}

template <typename S>
int run_train(const TrainConfig& cfg, const std::string& data_path, const std::string& out_path,
              const std::string& trace_path) {
    Dataset data = load_dataset(data_path);
    TrainHooks<S> hooks;
    hooks.on_step = [](std::uint64_t step, double loss) {
        std::printf("step %llu loss %.8f\n", (unsigned long long)step, loss);
        return true;
    };
    auto result = train<S>(cfg, data, hooks);
    save_checkpoint(result.checkpoint, out_path);
    if (!trace_path.empty()) {
        std::FILE* f = std::fopen(trace_path.c_str(), "w");
        if (!f) throw IoError("cannot open " + trace_path + " for writing");
        for (const auto& r : result.trace)
            std::fprintf(f, "step %llu loss %.8f\n", (unsigned long long)r.step, r.loss);
        std::fclose(f);
    }
    std::printf("checkpoint %s steps %llu final_loss %.8f\n", out_path.c_str(),
                (unsigned long long)result.checkpoint.step,
                result.trace.empty() ? 0.0 : result.trace.back().loss);
    return 0;
}

template <typename S>
int run_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& split, std::optional<double> lambda_override) {
    auto ckpt = load_checkpoint<S>(ckpt_path);
    Dataset data = load_data_checked(data_path, split);
    auto result = evaluate(ckpt.model, data, lambda_override);
    std::cout << format_metric_records("t2v", result.t2v);
    std::cout << format_metric_records("v2t", result.v2t);
    return 0;
}

template <typename S>
int run_ablate(const TrainConfig& cfg, const std::string& data_path) {
    Dataset data = load_dataset(data_path);
    auto table = ablate<S>(cfg, data, &std::cerr);
    std::cout << table.render();
    return 0;
}

template <typename S>
int run_dump_attention(const std::string& ckpt_path, const std::string& data_path,
                       const std::string& item, const std::string& out_dir) {
    auto ckpt = load_checkpoint<S>(ckpt_path);
    Dataset data = load_dataset(data_path);
    const VideoItem* video = nullptr;
    for (const auto& v : data.videos)
        if (v.id == item) video = &v;
    if (!video) throw UsageError("dump-attention: no video with id '" + item + "'");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

    AttentionTrace trace;
    {
        NoGradGuard ng;
        TraceCtx ctx{&trace, ""};
        ckpt.model.embed_relation(video->regions, ctx.sub("relation"));
        ckpt.model.embed_video_global(video->frames, ctx.sub("global"));
        if (!video->caption_indices.empty()) {
            const auto& cap = data.captions[video->caption_indices.front()];
            ckpt.model.embed_text(cap.tokens, ctx.sub("text"));
        }
    }

    std::string index;
    for (const auto& e : trace.entries) {
        std::string fname = e.name;
        for (auto& c : fname)
            if (c == '.' || c == '/') c = '_';
        fname += ".bicf";
        Blob b;
        for (std::size_t ext : e.shape) b.extents.push_back(std::uint32_t(ext));
        b.data.assign(e.values.begin(), e.values.end());
        write_blob((fs::path(out_dir) / fname).string(), b);
        index += e.name + " " + fname;
        for (std::size_t ext : e.shape) index += " " + std::to_string(ext);
        index += "\n";
    }
    wire::write_file((fs::path(out_dir) / "index.txt").string(), index);
    std::printf("wrote %zu attention records to %s\n", trace.entries.size(), out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bi-branch text-video retrieval harness"};
    app.require_subcommand(1);

    // --- synth --------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
    SyntheticSpec spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--pairs", spec.pairs, "number of video/caption pairs");
    synth->add_option("--captions-per-video", spec.captions_per_video);
    synth->add_option("--latent", spec.latent_dim, "latent dimension");
    synth->add_option("--noise", spec.noise_scale, "noise scale");
    synth->add_option("--tokens", spec.tokens_per_caption, "tokens per caption");
    synth->add_option("--frames", spec.dims.frames, "frames per clip (T)");
    synth->add_option("--proposals", spec.dims.proposals, "proposals per frame (N)");
    synth->add_option("--region-dim", spec.dims.region_dim);
    synth->add_option("--appearance-dim", spec.dims.appearance_dim);
    synth->add_option("--motion-dim", spec.dims.motion_dim);
    synth->add_option("--token-dim", spec.dims.token_dim);
    synth->add_option("--seed", spec.seed);
    synth->add_option("--split", spec.split, "split tag");

    // --- train ---------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train a model on a dataset");
    std::string train_config, train_data, train_out, train_trace;
    tr->add_option("--config", train_config, "config file (flat key-value)");
    tr->add_option("--data", train_data, "dataset manifest")->required();
    tr->add_option("--out", train_out, "checkpoint output path")->required();
    tr->add_option("--trace", train_trace, "also write the per-step loss trace here");

    // --- eval ----------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_data, eval_split;
    double eval_lambda = -1.0;
    ev->add_option("--checkpoint", eval_ckpt)->required();
    ev->add_option("--data", eval_data, "dataset manifest")->required();
    ev->add_option("--split", eval_split, "expected split tag of the manifest");
    ev->add_option("--lambda", eval_lambda, "override the similarity trade-off");

    // --- ablate ----------------------------------------------------------------
    auto* ab = app.add_subcommand("ablate", "train and compare all five residual variants");
    std::string ablate_config, ablate_data;
    ab->add_option("--config", ablate_config, "base config file");
    ab->add_option("--data", ablate_data, "dataset manifest")->required();

    // --- gradcheck -------------------------------------------------------------
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    GradCheckSettings gc_settings;
    std::string corrupt_group, gc_variant;
    gc->add_option("--seed", gc_settings.seed);
    gc->add_option("--variant", gc_variant, "check only this variant (default: all five)");
    gc->add_option("--corrupt-group", corrupt_group,
                   "test hook: bias one gradient of this group so the check fails");

    // --- dump-attention ---------------------------------------------------------
    auto* da = app.add_subcommand("dump-attention", "write raw attention weights for one item");
    std::string da_ckpt, da_data, da_item, da_out;
    da->add_option("--checkpoint", da_ckpt)->required();
    da->add_option("--data", da_data)->required();
    da->add_option("--item", da_item, "video id")->required();
    da->add_option("--out", da_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            std::string manifest = generate_synthetic(spec, synth_out);
            std::printf("manifest %s\n", manifest.c_str());
            return 0;
        }
        if (*tr) {
            TrainConfig cfg =
                train_config.empty() ? TrainConfig{} : load_train_config(train_config);
            cfg.validate();
            return cfg.scalar_kind == ScalarKind::Training32
                       ? run_train<float>(cfg, train_data, train_out, train_trace)
                       : run_train<double>(cfg, train_data, train_out, train_trace);
        }
        if (*ev) {
            std::optional<double> lam;
            if (ev->count("--lambda")) lam = eval_lambda;
            return peek_checkpoint_kind(eval_ckpt) == ScalarKind::Training32
                       ? run_eval<float>(eval_ckpt, eval_data, eval_split, lam)
                       : run_eval<double>(eval_ckpt, eval_data, eval_split, lam);
        }
        if (*ab) {
            TrainConfig cfg =
                ablate_config.empty() ? TrainConfig{} : load_train_config(ablate_config);
            cfg.validate();
            return cfg.scalar_kind == ScalarKind::Training32
                       ? run_ablate<float>(cfg, ablate_data)
                       : run_ablate<double>(cfg, ablate_data);
        }
        if (*gc) {
            gc_settings.corrupt_group = corrupt_group;
            if (!gc_variant.empty()) gc_settings.variants = {srt_variant_from_string(gc_variant)};
            auto report = run_gradcheck(gc_settings);
            for (const auto& g : report.groups)
                std::printf("%-5s group %-40s max_rel_err %.3e over %zu scalars\n",
                            g.pass ? "ok" : "FAIL", g.name.c_str(), g.max_rel_err, g.scalars);
            std::printf("%s in %.1fs (tolerance %.1e)\n", report.pass ? "PASS" : "FAIL",
                        report.seconds, report.tolerance);
            return report.pass ? 0 : 1;
        }
        if (*da) {
            return peek_checkpoint_kind(da_ckpt) == ScalarKind::Training32
                       ? run_dump_attention<float>(da_ckpt, da_data, da_item, da_out)
                       : run_dump_attention<double>(da_ckpt, da_data, da_item, da_out);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 3;
    }
    return 0;
}
