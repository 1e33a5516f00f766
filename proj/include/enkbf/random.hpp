#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace enkbf {

/// Purpose tags for independent noise streams derived from one seed.
enum class StreamTag : std::uint64_t {
    initial_state = 1,
    brownian = 2,
    fast_initial = 3,
    filter_noise = 4,
    prior = 5,
    innovation = 6,
    trial = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(master ^ splitmix64(a)) + b);
}

inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag) {
    return derive_seed(master, static_cast<std::uint64_t>(tag));
}

/// Standard-normal stream keyed by (seed, tag). Same key, same numbers.
class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, StreamTag tag) : engine_(derive_seed(seed, tag)) {}

    double normal() { return normal_(engine_); }

    void fill_normal(std::span<double> out) {
        for (double& v : out) v = normal_(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace enkbf
