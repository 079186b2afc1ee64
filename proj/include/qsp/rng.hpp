#pragma once

#include <cstdint>
#include <random>

namespace qsp {

// Splittable random stream. Every stochastic routine takes one of these, so a
// 64-bit seed replays any run exactly. Substreams are derived by hashing
// (seed, id) through SplitMix64, which keeps parallel consumers independent of
// each other and of the draw order in the parent.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

    RngStream substream(std::uint64_t id) const {
        return RngStream(mix(seed_ ^ (0x9e3779b97f4a7c15ull + id * 0xbf58476d1ce4e5b9ull)));
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() {
        return (engine_() >> 11) * 0x1.0p-53;
    }

    double normal() { return normal_(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace qsp
