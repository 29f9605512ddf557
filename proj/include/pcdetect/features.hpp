#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "pcdetect/consistency.hpp"
#include "pcdetect/matrix.hpp"
#include "pcdetect/priority.hpp"

namespace pcdetect {

// det3d: (n,n,n) determinant tensor. error2d: (n,n,1) log error matrix.
// raw2d: (n,n,1) bare comparison values, kept as the no-preprocessing baseline.
enum class FeatureKind : std::uint32_t { Det3d = 0, Error2d = 1, Raw2d = 2 };

inline std::string to_string(FeatureKind k)
{
    switch (k) {
    case FeatureKind::Det3d: return "det3d";
    case FeatureKind::Error2d: return "error2d";
    case FeatureKind::Raw2d: return "raw2d";
    }
    return "unknown";
}

inline FeatureKind parse_feature_kind(const std::string& s)
{
    if (s == "det3d")
        return FeatureKind::Det3d;
    if (s == "error2d")
        return FeatureKind::Error2d;
    if (s == "raw2d")
        return FeatureKind::Raw2d;
    throw Error(ErrorCode::InvalidArgument, "unknown feature kind '" + s + "'");
}

inline std::array<std::size_t, 3> feature_shape(FeatureKind k, std::size_t n)
{
    return k == FeatureKind::Det3d ? std::array<std::size_t, 3>{n, n, n} : std::array<std::size_t, 3>{n, n, 1};
}

struct FeatureTensor {
    FeatureKind kind = FeatureKind::Det3d;
    std::array<std::size_t, 3> shape{};
    std::vector<double> values; // row-major over shape

    double operator()(std::size_t i, std::size_t j, std::size_t k = 0) const
    {
        return values[(i * shape[1] + j) * shape[2] + k];
    }
};

namespace detail {

inline double det3(const std::array<double, 9>& m)
{
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

} // namespace detail

/// d_ijk = det of the 3x3 submatrix of C on rows and columns (i, j, k), over
/// all n^3 index triples (zero whenever an index repeats).
inline FeatureTensor det_tensor(const PCMatrix& c)
{
    const std::size_t n = c.order();
    FeatureTensor f{FeatureKind::Det3d, {n, n, n}, std::vector<double>(n * n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                if (i == j || j == k || i == k)
                    continue;
                const std::array<double, 9> sub = {c(i, i), c(i, j), c(i, k), c(j, i), c(j, j),
                                                   c(j, k), c(k, i), c(k, j), c(k, k)};
                f.values[(i * n + j) * n + k] = detail::det3(sub);
            }
    return f;
}

/// ln e_ij of the error matrix, with weights from `method`. Antisymmetric and
/// zero for consistent input.
inline FeatureTensor error_feature(const PCMatrix& c, PriorityMethod method = PriorityMethod::GMM)
{
    const std::size_t n = c.order();
    const auto e = error_matrix(c, priorities(c, method));
    FeatureTensor f{FeatureKind::Error2d, {n, n, 1}, std::vector<double>(n * n)};
    for (std::size_t i = 0; i < n * n; ++i)
        f.values[i] = std::log(e.values[i]);
    return f;
}

inline FeatureTensor raw_feature(const PCMatrix& c)
{
    const std::size_t n = c.order();
    return {FeatureKind::Raw2d, {n, n, 1}, std::vector<double>(c.data().begin(), c.data().end())};
}

inline FeatureTensor make_feature(const PCMatrix& c, FeatureKind kind)
{
    switch (kind) {
    case FeatureKind::Det3d: return det_tensor(c);
    case FeatureKind::Error2d: return error_feature(c);
    case FeatureKind::Raw2d: return raw_feature(c);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown feature kind");
}

inline constexpr double kDetLogFloor = 1e-12;
inline constexpr double kDetLogWeight = 0.1;

/// Input value for one determinant. For a reciprocal triple d = t + 1/t - 2
/// with t the cycle ratio, and 2 asinh(sqrt(d)/2) recovers |ln t|. The small
/// log term separates exact zeros (triples the basic attack makes consistent)
/// from merely small ones.
inline double det_input(double d)
{
    const double v = std::max(d, 0.0);
    return 2.0 * std::asinh(std::sqrt(v) / 2.0) + kDetLogWeight * std::log(v + kDetLogFloor);
}

/// Network input for a feature, narrowed to float. det3d goes through
/// det_input; the other kinds pass through unchanged.
inline std::vector<float> network_input(const FeatureTensor& f)
{
    std::vector<float> out(f.values.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(f.kind == FeatureKind::Det3d ? det_input(f.values[i]) : f.values[i]);
    return out;
}

// Binary feature cache:
//   "PCDF" | u32 version | u32 kind | u32 n | u64 count | u64 key |
//   count * prod(shape) f32 values | count u8 labels
// All integers and floats little-endian.
struct FeatureCache {
    FeatureKind kind = FeatureKind::Det3d;
    std::size_t n = 0;
    std::uint64_t key = 0;
    std::vector<float> values;
    std::vector<std::uint8_t> labels;

    std::size_t count() const { return labels.size(); }
    std::size_t stride() const
    {
        const auto s = feature_shape(kind, n);
        return s[0] * s[1] * s[2];
    }
};

namespace detail {

template <class T>
void put_le(std::string& out, T v)
{
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(b, b + sizeof(T));
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos)
{
    if (pos + sizeof(T) > in.size())
        throw Error(ErrorCode::CorruptSample, "unexpected end of binary data");
    unsigned char b[sizeof(T)];
    std::memcpy(b, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(b, b + sizeof(T));
    pos += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

} // namespace detail

inline constexpr std::uint32_t kFeatureCacheVersion = 1;

inline void save_feature_cache(const std::string& path, const FeatureCache& cache)
{
    if (cache.values.size() != cache.count() * cache.stride())
        throw Error(ErrorCode::ShapeMismatch, "feature cache values do not match count * shape");
    std::string out = "PCDF";
    detail::put_le<std::uint32_t>(out, kFeatureCacheVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cache.kind));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cache.n));
    detail::put_le<std::uint64_t>(out, cache.count());
    detail::put_le<std::uint64_t>(out, cache.key);
    for (float v : cache.values)
        detail::put_le<float>(out, v);
    out.append(reinterpret_cast<const char*>(cache.labels.data()), cache.labels.size());
    detail::write_file(path, out);
}

/// Loads a cache; throws SpecMismatch if `expected_key` is given and differs.
inline FeatureCache load_feature_cache(const std::string& path, std::optional<std::uint64_t> expected_key = {})
{
    const std::string in = detail::read_file(path);
    if (in.size() < 4 || in.compare(0, 4, "PCDF") != 0)
        throw Error(ErrorCode::CorruptSample, "not a feature cache file");
    std::size_t pos = 4;
    if (detail::get_le<std::uint32_t>(in, pos) != kFeatureCacheVersion)
        throw Error(ErrorCode::FormatVersionMismatch, "unsupported feature cache version");
    FeatureCache c;
    c.kind = static_cast<FeatureKind>(detail::get_le<std::uint32_t>(in, pos));
    c.n = detail::get_le<std::uint32_t>(in, pos);
    const auto count = detail::get_le<std::uint64_t>(in, pos);
    c.key = detail::get_le<std::uint64_t>(in, pos);
    if (expected_key && *expected_key != c.key)
        throw Error(ErrorCode::SpecMismatch, "feature cache belongs to a different dataset");
    const std::size_t total = count * c.stride();
    if (in.size() != pos + total * sizeof(float) + count)
        throw Error(ErrorCode::CorruptSample, "feature cache size does not match its header");
    c.values.resize(total);
    for (auto& v : c.values)
        v = detail::get_le<float>(in, pos);
    c.labels.assign(in.begin() + static_cast<std::ptrdiff_t>(pos), in.end());
    return c;
}

} // namespace pcdetect
