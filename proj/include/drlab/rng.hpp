#pragma once

#include <cstdint>
#include <span>

namespace dr {

// Counter-based generator: output i of stream (seed, stream) is a pure hash of
// (seed, stream, i), so parallel tasks get reproducible, non-overlapping draws.
class Rng {
public:
    Rng() : Rng(1, 0) {}
    Rng(std::uint64_t seed, std::uint64_t stream) {
        key_ = mix(seed ^ 0x9e3779b97f4a7c15ULL) ^ mix(stream + 0xbf58476d1ce4e5b9ULL);
    }

    std::uint64_t next_u64() { return mix(key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL); }

    // Uniform on [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Index into a discrete CDF given as cumulative probabilities ending at ~1.
    std::size_t next_index(std::span<const double> cdf) {
        double u = next_double();
        std::size_t i = 0;
        while (i + 1 < cdf.size() && u >= cdf[i]) ++i;
        return i;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t ctr_ = 0;
};

}  // namespace dr
