#pragma once

#include <cstdint>

namespace fairsched {

/// Small portable generator; streams are identical on every platform,
/// unlike the std distributions.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Independent per-stream seed derived from a base seed.
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream) {
    SplitMix64 mix(base ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
    return mix.next();
}

}  // namespace fairsched
