#pragma once

#include <cstdint>
#include <random>

#include "cooldown/math.hpp"

namespace cooldown {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

/// Reproducible per-path Gaussian stream. Streams are keyed by
/// (master_seed, path_index); the generator is mt19937_64 (its output sequence
/// is pinned by the standard) and normals come from the inverse CDF, so the
/// same key yields the same draws on every platform.
class NormalStream {
public:
    NormalStream(std::uint64_t master_seed, std::uint64_t path_index)
        : engine_(derive_seed(master_seed, path_index)) {}

    static std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t path_index) {
        std::uint64_t h = detail::splitmix64(master_seed);
        h ^= detail::splitmix64(path_index + 0x632BE59BD9B4E019ull);
        return detail::splitmix64(h);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return inverse_normal_cdf(uniform()); }

private:
    std::mt19937_64 engine_;
};

} // namespace cooldown
