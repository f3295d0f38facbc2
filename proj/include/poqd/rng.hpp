#pragma once

#include <cstdint>
#include <string_view>

namespace poqd {

/// splitmix64 step. Stable across platforms, unlike <random> distributions,
/// so seeded artifacts (embeddings, synthetic instances) are byte-reproducible.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::string_view s);

/// Small deterministic generator used wherever reproducibility matters.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Inclusive on both ends.
    int uniform_int(int lo, int hi);

    /// Standard normal via Box-Muller.
    double gaussian();

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace poqd
