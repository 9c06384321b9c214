#include "bicnet/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "bicnet/errors.hpp"

namespace fs = std::filesystem;

namespace bicnet {

namespace {

constexpr const char* kManifestFormat = "bicnet.manifest.v1";

std::string shape_of(const Blob& b) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < b.extents.size(); ++i) {
        if (i) os << 'x';
        os << b.extents[i];
    }
    os << ']';
    return os.str();
}

void expect_extents(const Blob& b, const std::vector<std::uint32_t>& want,
                    const std::string& file) {
    if (b.extents != want) {
        std::ostringstream os;
        os << file << ": expected shape [";
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (i) os << 'x';
            os << want[i];
        }
        os << "], found " << shape_of(b);
        throw IngestError(os.str());
    }
}

void expect_finite(const Blob& b, const std::string& file) {
    for (float v : b.data)
        if (!std::isfinite(v)) throw IngestError(file + ": non-finite feature value");
}

std::size_t parse_count(const std::string& v, const std::string& what) {
    try {
        long long n = std::stoll(v);
        if (n <= 0) throw std::out_of_range("");
        return std::size_t(n);
    } catch (...) {
        throw IngestError("manifest: " + what + " must be a positive integer, got '" + v + "'");
    }
}

Blob read_blob_for_ingest(const std::string& path) {
    try {
        return read_blob(path);
    } catch (const IoError& e) {
        throw IngestError(std::string("missing or unreadable feature blob: ") + e.what());
    }
}

} // namespace

Dataset load_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    Dataset ds;
    std::unordered_map<std::string, std::size_t> video_index;
    struct PendingCaption {
        std::string id, video_id, path;
    };
    std::vector<PendingCaption> pending;
    bool saw_format = false;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        auto where = [&] { return manifest_path + ":" + std::to_string(lineno); };
        if (key == "format") {
            std::string v;
            ls >> v;
            if (v != kManifestFormat)
                throw IngestError(where() + ": unsupported manifest format '" + v + "'");
            saw_format = true;
        } else if (key == "split") {
            ls >> ds.split;
        } else if (key.rfind("dim.", 0) == 0) {
            std::string v;
            ls >> v;
            const std::string which = key.substr(4);
            std::size_t n = parse_count(v, key);
            if (which == "frames") ds.dims.frames = n;
            else if (which == "proposals") ds.dims.proposals = n;
            else if (which == "region") ds.dims.region_dim = n;
            else if (which == "appearance") ds.dims.appearance_dim = n;
            else if (which == "motion") ds.dims.motion_dim = n;
            else if (which == "token") ds.dims.token_dim = n;
            else throw IngestError(where() + ": unknown dims key '" + key + "'");
        } else if (key == "video") {
            std::string id, regions, frames;
            ls >> id >> regions >> frames;
            if (id.empty() || regions.empty() || frames.empty())
                throw IngestError(where() + ": video record needs <id> <regions> <frames>");
            if (video_index.count(id))
                throw IngestError(where() + ": duplicate video id '" + id + "'");
            VideoItem item;
            item.id = id;
            const std::string rpath = (base / regions).string();
            const std::string fpath = (base / frames).string();
            item.regions = read_blob_for_ingest(rpath);
            item.frames = read_blob_for_ingest(fpath);
            expect_extents(item.regions,
                           {std::uint32_t(ds.dims.frames), std::uint32_t(ds.dims.proposals),
                            std::uint32_t(ds.dims.region_dim)},
                           rpath);
            expect_extents(item.frames,
                           {std::uint32_t(ds.dims.frames),
                            std::uint32_t(ds.dims.frame_feature_dim())},
                           fpath);
            expect_finite(item.regions, rpath);
            expect_finite(item.frames, fpath);
            video_index[id] = ds.videos.size();
            ds.videos.push_back(std::move(item));
        } else if (key == "caption") {
            PendingCaption c;
            ls >> c.id >> c.video_id >> c.path;
            if (c.id.empty() || c.video_id.empty() || c.path.empty())
                throw IngestError(where() + ": caption record needs <id> <video_id> <tokens>");
            pending.push_back(std::move(c));
        } else {
            throw IngestError(where() + ": unknown manifest key '" + key + "'");
        }
    }
    if (!saw_format) throw IngestError(manifest_path + ": missing format line");

    std::unordered_map<std::string, std::size_t> caption_index;
    for (const auto& c : pending) {
        if (caption_index.count(c.id))
            throw IngestError(manifest_path + ": duplicate caption id '" + c.id + "'");
        caption_index[c.id] = 1;
        auto it = video_index.find(c.video_id);
        if (it == video_index.end())
            throw IngestError(manifest_path + ": caption '" + c.id + "' names unknown video '" +
                              c.video_id + "'");
        CaptionItem item;
        item.id = c.id;
        item.video_index = it->second;
        const std::string tpath = (base / c.path).string();
        item.tokens = read_blob_for_ingest(tpath);
        if (item.tokens.extents.size() != 2 || item.tokens.extents[1] != ds.dims.token_dim)
            throw IngestError(tpath + ": expected shape [S x " +
                              std::to_string(ds.dims.token_dim) + "], found " + shape_of(item.tokens));
        expect_finite(item.tokens, tpath);
        ds.videos[it->second].caption_indices.push_back(ds.captions.size());
        ds.captions.push_back(std::move(item));
    }
    return ds;
}

void write_manifest(const std::string& path, const DatasetDims& dims, const std::string& split,
                    const std::vector<ManifestEntry>& items) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "format " << kManifestFormat << '\n';
    out << "split " << split << '\n';
    out << "dim.frames " << dims.frames << '\n';
    out << "dim.proposals " << dims.proposals << '\n';
    out << "dim.region " << dims.region_dim << '\n';
    out << "dim.appearance " << dims.appearance_dim << '\n';
    out << "dim.motion " << dims.motion_dim << '\n';
    out << "dim.token " << dims.token_dim << '\n';
    for (const auto& it : items) {
        out << "video " << it.video_id << ' ' << it.regions_path << ' ' << it.frames_path << '\n';
        for (const auto& [cid, cpath] : it.captions)
            out << "caption " << cid << ' ' << it.video_id << ' ' << cpath << '\n';
    }
    if (!out) throw IoError("write failure on " + path);
}

} // namespace bicnet
