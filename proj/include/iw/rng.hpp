#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace iw::sim {

/// 64-bit mixing function (splitmix64 finalizer). Bijective on uint64.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

/// Derives an independent stream key from a seed and up to three substream
/// indices (preset, grid point, replication). Each component is mixed before
/// combination so that neighbouring indices land far apart in state space.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a = 0,
                                   std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
    std::uint64_t k = mix64(seed + 0x9e3779b97f4a7c15ULL);
    k = mix64(k ^ mix64(a + 0xa0761d6478bd642fULL));
    k = mix64(k ^ mix64(b + 0xe7037ed1a0b428dbULL));
    k = mix64(k ^ mix64(c + 0x8ebc6af09c88c6e3ULL));
    return k;
}

/// Counter-based pseudo-random stream (splitmix64). A stream is fully
/// determined by its key, so replications keyed by (seed, point, index)
/// produce identical draws no matter which thread runs them.
class RngStream {
  public:
    explicit RngStream(std::uint64_t key) noexcept : state_(key) {}

    std::uint64_t next_u64() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform on the open interval (0, 1); never returns an endpoint.
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw via Box-Muller. Always consumes exactly two
    /// uniforms, keeping the draw count per replication fixed.
    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::uint64_t state_;
};

} // namespace iw::sim
