#pragma once

// Dataset manifest: a UTF-8 key-value text file naming the feature blobs,
// the dims block they must match, the caption->video pairing and the split
// tag. All blob paths are resolved relative to the manifest's directory.
//
//   format bicnet.manifest.v1
//   split train
//   dim.frames 4
//   dim.proposals 5
//   dim.region 40
//   dim.appearance 32
//   dim.motion 24
//   dim.token 48
//   video vid0 blobs/vid0.regions.bicf blobs/vid0.frames.bicf
//   caption cap0 vid0 blobs/cap0.tokens.bicf

#include <cstddef>
#include <string>
#include <vector>

#include "bicnet/blob.hpp"

namespace bicnet {

struct DatasetDims {
    std::size_t frames = 0;         // T
    std::size_t proposals = 0;      // N per frame
    std::size_t region_dim = 0;     // d_r
    std::size_t appearance_dim = 0; // d_a
    std::size_t motion_dim = 0;     // d_m3
    std::size_t token_dim = 0;      // d_t

    std::size_t frame_feature_dim() const { return appearance_dim + motion_dim; }
    bool operator==(const DatasetDims&) const = default;
};

struct VideoItem {
    std::string id;
    Blob regions; // T x N x d_r
    Blob frames;  // T x (d_a + d_m3)
    std::vector<std::size_t> caption_indices;
};

struct CaptionItem {
    std::string id;
    std::size_t video_index = 0;
    Blob tokens; // S x d_t, S free per caption
};

struct Dataset {
    DatasetDims dims;
    std::string split;
    std::vector<VideoItem> videos;
    std::vector<CaptionItem> captions;

    std::size_t pair_count() const { return captions.size(); }
};

// Parses the manifest, loads every referenced blob and validates each header
// against the dims block. Any mismatch is an ingest error naming the file
// and the expected vs found shape.
Dataset load_dataset(const std::string& manifest_path);

// Entry used by generators: relative blob paths, written verbatim.
struct ManifestEntry {
    std::string video_id;
    std::string regions_path;
    std::string frames_path;
    std::vector<std::pair<std::string, std::string>> captions; // (caption id, tokens path)
};

void write_manifest(const std::string& path, const DatasetDims& dims, const std::string& split,
                    const std::vector<ManifestEntry>& items);

} // namespace bicnet
