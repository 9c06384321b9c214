#pragma once

// Synthetic paired dataset: each pair draws one latent vector, and the
// frame and token features are noisy random linear images of it, so matched
// pairs are statistically aligned and a model can learn the pairing.

#include <cstdint>
#include <string>

#include "bicnet/manifest.hpp"

namespace bicnet {

struct SyntheticSpec {
    std::size_t pairs = 32;
    std::size_t captions_per_video = 1;
    // Wide latents keep matched pairs learnable while leaving an untrained
    // readout at chance level; narrow ones leak alignment through random
    // projections.
    std::size_t latent_dim = 128;
    double noise_scale = 0.1;
    std::size_t tokens_per_caption = 6;
    DatasetDims dims{4, 5, 40, 32, 24, 48};
    std::uint64_t seed = 1;
    std::string split = "train";

    void validate() const;
};

// Writes blobs under <out_dir>/blobs and the manifest at
// <out_dir>/manifest.txt; returns the manifest path. Identical spec implies
// a bit-identical output tree.
std::string generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

} // namespace bicnet
