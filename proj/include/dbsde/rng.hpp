#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dbsde::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stateless 64-bit hash of a (seed, path, step, lane) counter.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                                     std::uint64_t lane) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ path);
    h = splitmix64(h ^ (step * 0xd1b54a32d192ed03ULL));
    return splitmix64(h ^ (lane * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
constexpr double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal draw addressed by its counter (Box-Muller, cosine branch).
inline double normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t lane) noexcept {
    const double u1 = to_open_unit(counter_hash(seed, path, step, 2 * lane));
    const double u2 = to_open_unit(counter_hash(seed, path, step, 2 * lane + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace dbsde::rng
