#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace pcdetect {

// Deterministic random stream. The engine is std::mt19937_64 (fully specified
// by the standard); all conversions to reals and bounded integers are done
// here so sequences do not depend on the standard library's distributions.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : RngStream({seed}) {}

    // Independent stream keyed by a tuple, e.g. (seed, pair_index).
    RngStream(std::initializer_list<std::uint64_t> key)
    {
        std::vector<std::uint32_t> words;
        words.reserve(key.size() * 2 + 1);
        words.push_back(static_cast<std::uint32_t>(key.size()));
        for (std::uint64_t k : key) {
            words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
            words.push_back(static_cast<std::uint32_t>(k >> 32));
        }
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0, 1).
    double uniform_open01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, bound) by rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound)
    {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = next_u64();
        while (x >= limit)
            x = next_u64();
        return x % bound;
    }

    double exponential() { return -std::log(uniform_open01()); }

private:
    std::mt19937_64 engine_;
};

// 64-bit FNV-1a, used for content digests and checkpoint checksums.
class Fnv1a {
public:
    void update(const void* data, std::size_t size)
    {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

} // namespace pcdetect
