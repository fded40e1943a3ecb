#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fellerdyn {

/// splitmix64 finalizer (stateless).
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for one logical substream. Each Monte Carlo path derives independent
/// chain and Brownian streams from (master_seed, path_index, tag), so results
/// do not depend on how paths are distributed over threads.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t path,
                                 std::uint64_t tag) {
    return splitmix64(splitmix64(splitmix64(master) ^ path) ^ tag);
}

constexpr std::uint64_t kChainStream = 0x434841494eULL;     // "CHAIN"
constexpr std::uint64_t kBrownianStream = 0x42524f574eULL;  // "BROWN"

inline std::mt19937_64 make_engine(std::uint64_t master, std::uint64_t path,
                                   std::uint64_t tag) {
    return std::mt19937_64(stream_seed(master, path, tag));
}

/// Uniform in (0,1), never exactly 0 or 1.
inline double uniform01(std::mt19937_64& g) {
    double u;
    do {
        u = static_cast<double>(g() >> 11) * 0x1.0p-53;
    } while (u <= 0.0 || u >= 1.0);
    return u;
}

/// Standard normal via Box-Muller (implementation-pinned, unlike
/// std::normal_distribution).
class NormalStream {
public:
    explicit NormalStream(std::mt19937_64 g) : g_(g) {}

    double next() {
        if (have_) {
            have_ = false;
            return spare_;
        }
        const double u1 = uniform01(g_);
        const double u2 = uniform01(g_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(6.283185307179586476925286766559 * u2);
        have_ = true;
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 g_;
    double spare_ = 0.0;
    bool have_ = false;
};

}  // namespace fellerdyn
