#pragma once

#include <cmath>
#include <cstdint>

namespace setdist {

// Counter-based random streams. Every logical consumer (a Monte Carlo path,
// a bound-table sample, a noise mode) owns a stream addressed by
// (seed, stream ids...); draws are a pure function of that address and a
// running counter, so results do not depend on scheduling or worker count.
//
// Scheme: the stream key is derived by folding the ids into the seed with
// the SplitMix64 output mix; the stream itself is SplitMix64 with the usual
// golden-gamma increment. Normals use Box-Muller and always consume exactly
// two uniforms, never caching the paired value.

namespace detail {
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(detail::splitmix64_mix(seed)) {}

    RngStream(std::uint64_t seed, std::uint64_t id0)
        : state_(detail::splitmix64_mix(detail::splitmix64_mix(seed) ^ (id0 + 0x51ed270b8d5c4661ULL))) {}

    RngStream(std::uint64_t seed, std::uint64_t id0, std::uint64_t id1)
        : RngStream(RngStream(seed, id0).state_ ^ 0xd6e8feb86659fd93ULL, id1) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on (0,1]: never returns 0, safe under log().
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes two uniforms per call.
    double next_normal() {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_;
};

} // namespace setdist
