#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace drpc {

// mt19937_64 with hand-rolled draws, so sequences do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

    // Uniform integer in [lo, hi].
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }

    bool chance(double p) { return uniform() < p; }

    template <class It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::size_t>(last - first);
        for (std::size_t i = n; i > 1; --i) std::swap(first[i - 1], first[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

// Named sub-seed derived from a run seed, so independent consumers of
// randomness do not share streams.
inline std::uint64_t sub_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char c : name) h = (h ^ c) * 1099511628211ULL;
    // splitmix64 finalizer
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

}  // namespace drpc
