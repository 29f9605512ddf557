#pragma once

#include <cstdint>
#include <string>

#include "pcdetect/features.hpp"
#include "pcdetect/nn/model.hpp"
#include "pcdetect/nn/spec.hpp"
#include "pcdetect/rng.hpp"

namespace pcdetect::nn {

// Checkpoint layout (little-endian):
//   "PCDM" | u32 version | u32 spec_len | spec JSON | u64 param_count |
//   param_count * f32 | u64 FNV-1a over everything before it
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string serialize_model(const Model<float>& model)
{
    std::string out = "PCDM";
    const std::string spec = spec_to_json(model.spec()).dump();
    pcdetect::detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    pcdetect::detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.size()));
    out += spec;
    pcdetect::detail::put_le<std::uint64_t>(out, model.parameter_count());
    for (float w : model.parameters())
        pcdetect::detail::put_le<float>(out, w);
    Fnv1a h;
    h.update(out.data(), out.size());
    pcdetect::detail::put_le<std::uint64_t>(out, h.value());
    return out;
}

inline Model<float> deserialize_model(const std::string& in)
{
    if (in.size() < 4 + 4 + 4 + 8 + 8 || in.compare(0, 4, "PCDM") != 0)
        throw Error(ErrorCode::ChecksumMismatch, "not a model checkpoint");
    {
        Fnv1a h;
        h.update(in.data(), in.size() - 8);
        std::size_t tail = in.size() - 8;
        if (pcdetect::detail::get_le<std::uint64_t>(in, tail) != h.value())
            throw Error(ErrorCode::ChecksumMismatch, "checkpoint checksum does not match its contents");
    }
    std::size_t pos = 4;
    if (pcdetect::detail::get_le<std::uint32_t>(in, pos) != kCheckpointVersion)
        throw Error(ErrorCode::FormatVersionMismatch, "unsupported checkpoint version");
    const auto spec_len = pcdetect::detail::get_le<std::uint32_t>(in, pos);
    if (pos + spec_len > in.size())
        throw Error(ErrorCode::ChecksumMismatch, "truncated checkpoint");
    const auto spec = spec_from_json(nlohmann::json::parse(in.substr(pos, spec_len)));
    pos += spec_len;
    Model<float> model(spec);
    const auto count = pcdetect::detail::get_le<std::uint64_t>(in, pos);
    if (count != model.parameter_count() || pos + count * sizeof(float) + 8 != in.size())
        throw Error(ErrorCode::SpecMismatch, "parameter count does not match the stored architecture");
    for (float& w : model.parameters())
        w = pcdetect::detail::get_le<float>(in, pos);
    return model;
}

inline void save_model(const std::string& path, const Model<float>& model)
{
    pcdetect::detail::write_file(path, serialize_model(model));
}

inline Model<float> load_model(const std::string& path)
{
    return deserialize_model(pcdetect::detail::read_file(path));
}

/// Throws SpecMismatch unless the model consumes `kind` features of order n.
inline void require_input(const ModelSpec& spec, FeatureKind kind, std::size_t n)
{
    if (spec.input_kind != kind || spec.input != feature_shape(kind, n))
        throw Error(ErrorCode::SpecMismatch, "model expects " + to_string(spec.input_kind) + " input of shape " +
                                                 std::to_string(spec.input[0]) + "x" + std::to_string(spec.input[1]) +
                                                 "x" + std::to_string(spec.input[2]) + ", got " + to_string(kind) +
                                                 " of order " + std::to_string(n));
}

inline Model<float> load_model(const std::string& path, FeatureKind kind, std::size_t n)
{
    auto m = load_model(path);
    require_input(m.spec(), kind, n);
    return m;
}

} // namespace pcdetect::nn
