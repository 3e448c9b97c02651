#ifndef ECODQN_RNG_HPP
#define ECODQN_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace ecodqn {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a named sub-seed from a master seed ("graph", "init", "env", ...).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : stream) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix64(master ^ mix64(h));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(master ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// The standard distributions are implementation-defined; these are not, so
// seeded streams stay bit-identical across standard libraries.

inline double uniform01(Rng &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool coin(Rng &rng, double p) {
    return uniform01(rng) < p;
}

/// Uniform integer in [0, bound). Lemire's nearly-divisionless rejection.
inline std::uint64_t uniform_index(Rng &rng, std::uint64_t bound) {
    std::uint64_t x = rng();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = -bound % bound;
        while (low < threshold) {
            x = rng();
            m = static_cast<__uint128_t>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

} // namespace ecodqn

#endif // ECODQN_RNG_HPP
