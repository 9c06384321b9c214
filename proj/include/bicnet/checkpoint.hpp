#pragma once

// Checkpoint container: the blob framing (little-endian, length-prefixed
// records) carrying a config snapshot, the dataset dims the model was built
// for, every named parameter and the optimizer state. Parameter payloads are
// stored in the run's scalar width, so a save/load round trip is bit-exact.

#include <cstdint>
#include <string>

#include "bicnet/adam.hpp"
#include "bicnet/blob.hpp"
#include "bicnet/errors.hpp"
#include "bicnet/model.hpp"

namespace bicnet {

inline constexpr char kCheckpointMagic[4] = {'B', 'I', 'C', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename S>
struct Checkpoint {
    BiCNetModel<S> model;
    AdamState<S> adam;
    std::uint64_t step = 0;
};

namespace ckptdetail {

template <typename S>
void put_scalar(std::string& out, S v);
template <>
inline void put_scalar<float>(std::string& out, float v) {
    wire::put_f32(out, v);
}
template <>
inline void put_scalar<double>(std::string& out, double v) {
    wire::put_f64(out, v);
}

template <typename S>
S get_scalar(wire::Reader& r);
template <>
inline float get_scalar<float>(wire::Reader& r) {
    return r.f32();
}
template <>
inline double get_scalar<double>(wire::Reader& r) {
    return r.f64();
}

template <typename S>
constexpr std::uint32_t kind_code() {
    return std::is_same_v<S, float> ? 0u : 1u;
}

inline void put_dims(std::string& out, const DatasetDims& d) {
    wire::put_u32(out, std::uint32_t(d.frames));
    wire::put_u32(out, std::uint32_t(d.proposals));
    wire::put_u32(out, std::uint32_t(d.region_dim));
    wire::put_u32(out, std::uint32_t(d.appearance_dim));
    wire::put_u32(out, std::uint32_t(d.motion_dim));
    wire::put_u32(out, std::uint32_t(d.token_dim));
}

inline DatasetDims get_dims(wire::Reader& r) {
    DatasetDims d;
    d.frames = r.u32();
    d.proposals = r.u32();
    d.region_dim = r.u32();
    d.appearance_dim = r.u32();
    d.motion_dim = r.u32();
    d.token_dim = r.u32();
    return d;
}

} // namespace ckptdetail

template <typename S>
void save_checkpoint(const Checkpoint<S>& ckpt, const std::string& path) {
    std::string out;
    out.append(kCheckpointMagic, 4);
    wire::put_u32(out, kCheckpointVersion);
    wire::put_u32(out, ckptdetail::kind_code<S>());
    wire::put_bytes(out, ckpt.model.cfg.serialize());
    ckptdetail::put_dims(out, ckpt.model.dims);
    wire::put_u64(out, ckpt.step);

    const auto& params = ckpt.model.store.all();
    wire::put_u32(out, std::uint32_t(params.size()));
    for (const auto& p : params) {
        wire::put_bytes(out, p.name);
        wire::put_u32(out, std::uint32_t(p.value.rank()));
        for (std::size_t e : p.value.shape()) wire::put_u32(out, std::uint32_t(e));
        for (S v : p.value.values()) ckptdetail::put_scalar<S>(out, v);
    }

    wire::put_f64(out, double(ckpt.adam.learning_rate));
    wire::put_f64(out, double(ckpt.adam.beta1));
    wire::put_f64(out, double(ckpt.adam.beta2));
    wire::put_f64(out, double(ckpt.adam.epsilon));
    wire::put_u64(out, ckpt.adam.step);
    if (ckpt.adam.first_moment.size() != params.size() ||
        ckpt.adam.second_moment.size() != params.size())
        throw UsageError("checkpoint save: optimizer state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (S v : ckpt.adam.first_moment[i]) ckptdetail::put_scalar<S>(out, v);
        for (S v : ckpt.adam.second_moment[i]) ckptdetail::put_scalar<S>(out, v);
    }
    wire::write_file(path, out);
}

// Reads only the header far enough to learn the stored scalar kind.
inline ScalarKind peek_checkpoint_kind(const std::string& path) {
    const std::string bytes = wire::read_file(path);
    wire::Reader r{bytes, 0, path};
    r.expect_magic(kCheckpointMagic);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    return r.u32() == 0 ? ScalarKind::Training32 : ScalarKind::Verification64;
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::string& path) {
    const std::string bytes = wire::read_file(path);
    wire::Reader r{bytes, 0, path};
    r.expect_magic(kCheckpointMagic);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t kind = r.u32();
    if (kind != ckptdetail::kind_code<S>())
        throw FormatError(path + ": checkpoint scalar kind does not match the requested engine");

    TrainConfig cfg = parse_train_config(r.bytes(), path + " (config snapshot)");
    DatasetDims dims = ckptdetail::get_dims(r);
    Checkpoint<S> ckpt;
    ckpt.model = BiCNetModel<S>::build(cfg, dims);
    ckpt.step = r.u64();

    auto& params = ckpt.model.store.all();
    const std::uint32_t count = r.u32();
    if (count != params.size())
        throw FormatError(path + ": checkpoint holds " + std::to_string(count) +
                          " parameters, model defines " + std::to_string(params.size()));
    for (auto& p : params) {
        const std::string name = r.bytes();
        if (name != p.name)
            throw FormatError(path + ": parameter order mismatch: expected '" + p.name +
                              "', found '" + name + "'");
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& e : shape) e = r.u32();
        if (shape != p.value.shape())
            throw FormatError(path + ": parameter '" + name + "' has shape " + shape_str(shape) +
                              ", model expects " + shape_str(p.value.shape()));
        auto w = p.value.values_mut();
        for (auto& v : w) v = ckptdetail::get_scalar<S>(r);
    }

    ckpt.adam = AdamState<S>::init(ckpt.model.store, S(0));
    ckpt.adam.learning_rate = S(r.f64());
    ckpt.adam.beta1 = S(r.f64());
    ckpt.adam.beta2 = S(r.f64());
    ckpt.adam.epsilon = S(r.f64());
    ckpt.adam.step = r.u64();
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (auto& v : ckpt.adam.first_moment[i]) v = ckptdetail::get_scalar<S>(r);
        for (auto& v : ckpt.adam.second_moment[i]) v = ckptdetail::get_scalar<S>(r);
    }
    r.expect_end();
    return ckpt;
}

} // namespace bicnet
