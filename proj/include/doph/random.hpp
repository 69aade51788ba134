#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

#include "common.hpp"

namespace doph {

/// All randomized components draw from this engine; its output sequence is
/// fixed by the C++ standard, so equal seeds reproduce bit-identical results
/// on every platform.
using RandomEngine = std::mt19937_64;

/// One step of the splitmix64 generator (Steele, Lea & Flood's finalizer).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed. Used so that trial
/// i of a Monte Carlo run gets the same sub-seed no matter how trials are
/// batched or ordered.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t state = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    std::uint64_t out = splitmix64(state);
    return splitmix64(state) ^ out;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

/// Unbiased uniform draw from [0, bound) via rejection sampling.
inline std::uint64_t uniform_below(RandomEngine& rng, std::uint64_t bound) {
    if (bound == 0) throw ConfigError("uniform_below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

/// Samples `count` distinct values from [0, universe), sorted ascending.
inline std::vector<std::uint32_t> sample_distinct(std::uint32_t count, std::uint32_t universe,
                                                  RandomEngine& rng) {
    if (count > universe)
        throw ConfigError("sample_distinct: requested more values than the universe holds");
    std::vector<std::uint32_t> out;
    out.reserve(count);
    if (count == 0) return out;
    // Sparse draws use rejection into a set; dense draws use a partial shuffle.
    if (static_cast<std::uint64_t>(count) * 3 < universe) {
        std::unordered_set<std::uint32_t> seen;
        seen.reserve(count * 2);
        while (seen.size() < count) {
            const auto v = static_cast<std::uint32_t>(uniform_below(rng, universe));
            if (seen.insert(v).second) out.push_back(v);
        }
    } else {
        std::vector<std::uint32_t> pool(universe);
        for (std::uint32_t i = 0; i < universe; ++i) pool[i] = i;
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto j = i + static_cast<std::uint32_t>(uniform_below(rng, universe - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace doph
