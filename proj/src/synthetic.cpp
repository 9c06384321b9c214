#include "bicnet/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <vector>

#include "bicnet/errors.hpp"
#include "bicnet/rng.hpp"

namespace fs = std::filesystem;

namespace bicnet {

void SyntheticSpec::validate() const {
    if (pairs == 0) throw ConfigError("synthetic: pairs must be positive");
    if (captions_per_video == 0) throw ConfigError("synthetic: captions_per_video must be positive");
    if (latent_dim == 0) throw ConfigError("synthetic: latent_dim must be positive");
    if (tokens_per_caption == 0) throw ConfigError("synthetic: tokens_per_caption must be positive");
    if (noise_scale < 0) throw ConfigError("synthetic: noise_scale must be non-negative");
    if (dims.frames == 0 || dims.proposals == 0 || dims.region_dim == 0 ||
        dims.appearance_dim == 0 || dims.motion_dim == 0 || dims.token_dim == 0)
        throw ConfigError("synthetic: every dims entry must be positive");
}

namespace {

// Row-major out_dim x latent map with entries scaled so image coordinates
// stay O(1) regardless of latent_dim.
std::vector<double> draw_map(std::size_t out_dim, std::size_t latent, Rng& rng) {
    std::vector<double> m(out_dim * latent);
    const double s = 1.0 / std::sqrt(double(latent));
    for (auto& v : m) v = rng.normal(0.0, s);
    return m;
}

void apply_map(const std::vector<double>& m, const std::vector<double>& z, std::size_t out_dim,
               double noise, Rng& rng, float* out) {
    const std::size_t latent = z.size();
    for (std::size_t i = 0; i < out_dim; ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < latent; ++j) acc += m[i * latent + j] * z[j];
        if (noise > 0) acc += noise * rng.normal();
        out[i] = float(acc);
    }
}

} // namespace

std::string generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "blobs", ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

    Rng rng(spec.seed);
    Rng map_rng = rng.derive(101);
    Rng latent_rng = rng.derive(202);
    Rng noise_rng = rng.derive(303);

    const std::size_t frame_dim = spec.dims.frame_feature_dim();
    const auto region_map = draw_map(spec.dims.region_dim, spec.latent_dim, map_rng);
    const auto frame_map = draw_map(frame_dim, spec.latent_dim, map_rng);
    const auto token_map = draw_map(spec.dims.token_dim, spec.latent_dim, map_rng);

    std::vector<ManifestEntry> entries;
    entries.reserve(spec.pairs);
    for (std::size_t p = 0; p < spec.pairs; ++p) {
        std::vector<double> z(spec.latent_dim);
        for (auto& v : z) v = latent_rng.normal();

        const std::string vid = "vid" + std::to_string(p);
        ManifestEntry entry;
        entry.video_id = vid;
        entry.regions_path = "blobs/" + vid + ".regions.bicf";
        entry.frames_path = "blobs/" + vid + ".frames.bicf";

        Blob regions;
        regions.extents = {std::uint32_t(spec.dims.frames), std::uint32_t(spec.dims.proposals),
                           std::uint32_t(spec.dims.region_dim)};
        regions.data.resize(regions.numel());
        for (std::size_t t = 0; t < spec.dims.frames; ++t)
            for (std::size_t n = 0; n < spec.dims.proposals; ++n)
                apply_map(region_map, z, spec.dims.region_dim, spec.noise_scale, noise_rng,
                          regions.data.data() +
                              (t * spec.dims.proposals + n) * spec.dims.region_dim);
        write_blob((fs::path(out_dir) / entry.regions_path).string(), regions);

        Blob frames;
        frames.extents = {std::uint32_t(spec.dims.frames), std::uint32_t(frame_dim)};
        frames.data.resize(frames.numel());
        for (std::size_t t = 0; t < spec.dims.frames; ++t)
            apply_map(frame_map, z, frame_dim, spec.noise_scale, noise_rng,
                      frames.data.data() + t * frame_dim);
        write_blob((fs::path(out_dir) / entry.frames_path).string(), frames);

        for (std::size_t c = 0; c < spec.captions_per_video; ++c) {
            const std::string cid = "cap" + std::to_string(p) + "_" + std::to_string(c);
            const std::string cpath = "blobs/" + cid + ".tokens.bicf";
            Blob tokens;
            tokens.extents = {std::uint32_t(spec.tokens_per_caption),
                              std::uint32_t(spec.dims.token_dim)};
            tokens.data.resize(tokens.numel());
            for (std::size_t s = 0; s < spec.tokens_per_caption; ++s)
                apply_map(token_map, z, spec.dims.token_dim, spec.noise_scale, noise_rng,
                          tokens.data.data() + s * spec.dims.token_dim);
            write_blob((fs::path(out_dir) / cpath).string(), tokens);
            entry.captions.emplace_back(cid, cpath);
        }
        entries.push_back(std::move(entry));
    }

    const std::string manifest = (fs::path(out_dir) / "manifest.txt").string();
    write_manifest(manifest, spec.dims, spec.split, entries);
    return manifest;
}

} // namespace bicnet
