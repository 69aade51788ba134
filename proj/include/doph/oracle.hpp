#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "common.hpp"
#include "rational.hpp"
#include "random.hpp"
#include "sketch.hpp"
#include "stats.hpp"
#include "theory.hpp"

namespace doph {

/// Result of an exhaustive collision count: for each bin, the number of
/// enumerated configurations in which the two densified sketches agree.
class CollisionCensus {
  public:
    CollisionCensus(std::vector<std::int64_t> per_bin, std::int64_t denominator, Scheme scheme)
        : per_bin_(std::move(per_bin)), denominator_(denominator), scheme_(scheme) {}

    std::size_t bin_count() const { return per_bin_.size(); }
    Scheme scheme() const { return scheme_; }
    std::int64_t denominator() const { return denominator_; }
    const std::vector<std::int64_t>& per_bin_collisions() const { return per_bin_; }
    bool enumerated() const { return true; }

    Rational per_bin_probability(std::size_t j) const {
        return Rational(per_bin_[j], denominator_);
    }

    /// Exact expectation of the match-fraction estimator.
    Rational expected_estimate() const {
        std::int64_t total = 0;
        for (const auto c : per_bin_) total += c;
        return Rational(total, denominator_ * static_cast<std::int64_t>(per_bin_.size()));
    }

  private:
    std::vector<std::int64_t> per_bin_;
    std::int64_t denominator_;
    Scheme scheme_;
};

namespace detail {

constexpr std::uint32_t kEnumerationMaxUniverse = 8;
constexpr std::uint32_t kEnumerationMaxBins = 8;

/// Enumeration core with an explicit offset constant so fault-injection
/// paths can run it with a deliberately wrong spacing.
inline CollisionCensus exact_collision_census(const SparseBinarySet& s1,
                                              const SparseBinarySet& s2,
                                              const UniverseParams& params, Scheme scheme,
                                              std::uint64_t offset_constant) {
    const std::uint32_t D = params.universe_size();
    const std::uint32_t k = params.bin_count();
    if (D > kEnumerationMaxUniverse || k > kEnumerationMaxBins)
        throw ConfigError("exact_collision_probability: enumeration bounded to universes of at "
                          "most 8 positions and 8 bins (D! · 2^k configurations)");
    if (s1.empty() || s2.empty())
        throw EmptyInputError("exact_collision_probability: sets must be non-empty");
    if (s1.universe_size() > D || s2.universe_size() > D)
        throw ConfigError("exact_collision_probability: set universe exceeds parameters");

    std::vector<std::uint32_t> perm(D);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::int64_t> counts(k, 0);
    std::int64_t denom = 0;

    OphSketch o1, o2;
    DensifiedSketch d1, d2;
    DirectionBits bits = DirectionBits::from_bits(std::vector<std::uint8_t>(k, 0));
    const std::uint32_t mask_count = (scheme == Scheme::Bidirectional) ? (1u << k) : 1u;
    do {
        oph_sketch_into(s1, perm, params, o1);
        oph_sketch_into(s2, perm, params, o2);
        for (std::uint32_t mask = 0; mask < mask_count; ++mask) {
            if (scheme == Scheme::Rotation) {
                densify_rotation_with_offset(o1, offset_constant, d1, nullptr);
                densify_rotation_with_offset(o2, offset_constant, d2, nullptr);
            } else {
                for (std::uint32_t j = 0; j < k; ++j) bits.set(j, (mask >> j) & 1u);
                densify_bidirectional_with_offset(o1, bits, offset_constant, d1, nullptr);
                densify_bidirectional_with_offset(o2, bits, offset_constant, d2, nullptr);
            }
            for (std::uint32_t j = 0; j < k; ++j) counts[j] += (d1[j] == d2[j]);
            ++denom;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    return CollisionCensus(std::move(counts), denom, scheme);
}

}  // namespace detail

/// Enumerates every permutation of the universe (and, for the bidirectional
/// scheme, every direction-bit vector) and counts per-bin collisions of the
/// densified sketches. Exact, so the per-bin probability can be compared to
/// the resemblance with rational equality.
inline CollisionCensus exact_collision_probability(const SparseBinarySet& s1,
                                                   const SparseBinarySet& s2,
                                                   const UniverseParams& params, Scheme scheme) {
    return detail::exact_collision_census(s1, s2, params, scheme, params.offset_constant());
}

/// Exact probability that two empty bins borrow from the same donor, under
/// the model of the closed forms: two empty bins placed among m non-empty
/// ones on a circle of m+2 positions, all (m+1)(m+2) ordered placements
/// equally likely (times the direction-bit choices for the bidirectional
/// scheme). Must equal 2/(m+1) for rotation and 1.5/(m+1) for bidirectional.
inline Rational reuse_probability(std::uint32_t m, Scheme scheme) {
    if (m < 1) throw ConfigError("reuse_probability: needs at least one non-empty bin");
    const std::uint32_t k = m + 2;

    // Donor of empty position e when scanning in `dir` (+1 clockwise, -1
    // counterclockwise), skipping the other empty position.
    const auto donor = [k](std::uint32_t e, std::uint32_t other, int dir) {
        auto pos = static_cast<std::int32_t>(e);
        const auto kk = static_cast<std::int32_t>(k);
        for (;;) {
            pos = (pos + dir + kk) % kk;
            const auto upos = static_cast<std::uint32_t>(pos);
            if (upos != e && upos != other) return upos;
        }
    };

    std::int64_t same = 0;
    std::int64_t total = 0;
    for (std::uint32_t e1 = 0; e1 < k; ++e1) {
        for (std::uint32_t e2 = 0; e2 < k; ++e2) {
            if (e1 == e2) continue;
            if (scheme == Scheme::Rotation) {
                same += (donor(e1, e2, +1) == donor(e2, e1, +1));
                ++total;
            } else {
                for (int q1 = 0; q1 < 2; ++q1) {
                    for (int q2 = 0; q2 < 2; ++q2) {
                        const auto d1 = donor(e1, e2, q1 == 0 ? -1 : +1);
                        const auto d2 = donor(e2, e1, q2 == 0 ? -1 : +1);
                        same += (d1 == d2);
                        ++total;
                    }
                }
            }
        }
    }
    return Rational(same, total);
}

/// Exhaustive distribution of the empty-bin count: enumerates every size-u
/// subset of [0, D) as the post-permutation positions of the union. Exact
/// rationals; bounded to tiny universes.
inline std::vector<Rational> empty_bin_pmf_exhaustive(std::uint32_t u, std::uint32_t D,
                                                      std::uint32_t k) {
    if (D == 0 || k == 0 || D % k != 0)
        throw ConfigError("empty_bin_pmf_exhaustive: bins must evenly divide the universe");
    if (u == 0 || u > D) throw ConfigError("empty_bin_pmf_exhaustive: union size out of range");
    if (D > 20) throw ConfigError("empty_bin_pmf_exhaustive: universe too large to enumerate");
    const std::uint32_t w = D / k;

    std::vector<std::int64_t> counts(k + 1, 0);
    std::int64_t total = 0;
    std::vector<std::uint32_t> pick(u);
    std::iota(pick.begin(), pick.end(), 0);
    std::vector<std::uint8_t> occupied(k);
    for (;;) {
        std::fill(occupied.begin(), occupied.end(), 0);
        for (const auto pos : pick) occupied[pos / w] = 1;
        std::uint32_t empty = 0;
        for (const auto o : occupied) empty += (o == 0);
        ++counts[empty];
        ++total;
        // Advance to the next combination in lexicographic order.
        std::int32_t i = static_cast<std::int32_t>(u) - 1;
        while (i >= 0 && pick[i] == D - u + static_cast<std::uint32_t>(i)) --i;
        if (i < 0) break;
        ++pick[i];
        for (auto j = static_cast<std::uint32_t>(i) + 1; j < u; ++j) pick[j] = pick[j - 1] + 1;
    }

    std::vector<Rational> pmf;
    pmf.reserve(k + 1);
    for (const auto c : counts) pmf.emplace_back(c, total);
    return pmf;
}

/// Canonical pair of index sets realizing the given sizes and overlap:
/// S1 = [0, f1), S2 = [f1−a, f1+f2−a). Under a uniform permutation only the
/// three counts matter, so contiguous sets lose no generality.
inline std::pair<SparseBinarySet, SparseBinarySet> canonical_pair(const PairStats& ps) {
    std::vector<std::uint32_t> v1(ps.f1());
    std::iota(v1.begin(), v1.end(), 0);
    std::vector<std::uint32_t> v2(ps.f2());
    std::iota(v2.begin(), v2.end(), static_cast<std::uint32_t>(ps.f1() - ps.intersection_size()));
    const std::uint32_t universe = ps.params().requested_universe_size();
    return {SparseBinarySet(universe, std::move(v1)), SparseBinarySet(universe, std::move(v2))};
}

/// Mean squared error of the resemblance estimator over sampled hash
/// families, with its standard error.
struct MseEstimate {
    double mse = 0.0;
    double std_error = 0.0;
    std::uint64_t trials = 0;
};

struct PairedMse {
    MseEstimate rotation;
    MseEstimate bidirectional;
};

namespace detail {

inline PairedMse empirical_mse_impl(const PairStats& ps, std::uint64_t trials, std::uint64_t seed,
                                    bool run_rotation, bool run_bidirectional) {
    if (trials == 0) throw ConfigError("empirical_mse: needs at least one trial");
    const auto [s1, s2] = canonical_pair(ps);
    const UniverseParams& params = ps.params();
    const std::uint32_t k = params.bin_count();
    const long double r = ps.resemblance().value_long();

    SeededPermutation perm(params.universe_size(), 0);
    DirectionBits bits = DirectionBits::from_seed(k, 0);
    OphSketch o1, o2;
    DensifiedSketch d1, d2;
    MeanAccumulator acc_rot, acc_bid;

    for (std::uint64_t t = 0; t < trials; ++t) {
        perm.reseed(derive_seed(seed, t, 0));
        oph_sketch_into(s1, perm.mapping(), params, o1);
        oph_sketch_into(s2, perm.mapping(), params, o2);
        if (run_rotation) {
            densify_rotation_into(o1, params, d1);
            densify_rotation_into(o2, params, d2);
            const long double est = estimate_resemblance(d1, d2);
            acc_rot.add((est - r) * (est - r));
        }
        if (run_bidirectional) {
            bits.reseed(derive_seed(seed, t, 1));
            densify_bidirectional_into(o1, bits, params, d1);
            densify_bidirectional_into(o2, bits, params, d2);
            const long double est = estimate_resemblance(d1, d2);
            acc_bid.add((est - r) * (est - r));
        }
    }

    const auto pack = [](const MeanAccumulator& acc) {
        MseEstimate e;
        e.trials = acc.count();
        if (acc.count() > 0) {
            e.mse = static_cast<double>(acc.mean());
            e.std_error = static_cast<double>(acc.std_error());
        }
        return e;
    };
    PairedMse out;
    if (run_rotation) out.rotation = pack(acc_rot);
    if (run_bidirectional) out.bidirectional = pack(acc_bid);
    return out;
}

}  // namespace detail

/// Empirical MSE of one scheme's estimator over independent hash families.
inline MseEstimate empirical_mse(const PairStats& ps, std::uint64_t trials, Scheme scheme,
                                 std::uint64_t seed) {
    const auto both = detail::empirical_mse_impl(ps, trials, seed, scheme == Scheme::Rotation,
                                                 scheme == Scheme::Bidirectional);
    return scheme == Scheme::Rotation ? both.rotation : both.bidirectional;
}

/// Both schemes measured on the same sampled permutations (paired trials).
inline PairedMse empirical_mse_paired(const PairStats& ps, std::uint64_t trials,
                                      std::uint64_t seed) {
    return detail::empirical_mse_impl(ps, trials, seed, true, true);
}

/// Per-trial match-pair statistics bucketed by the observed number of
/// simultaneously non-empty bins m. The three statistics are the ordered
/// pair sums Σ_{i≠j} M_i^N M_j^N, Σ_{i≠j} (M_i^N M_j^E + M_i^E M_j^N), and
/// Σ_{i≠j} M_i^E M_j^E, whose conditional expectations the closed forms
/// predict.
struct LemmaCensusBucket {
    MeanAccumulator nn;
    MeanAccumulator ne;
    MeanAccumulator ee;
    long double expected_nn = 0.0L;
    long double expected_ne = 0.0L;
    long double expected_ee = 0.0L;
};

struct MatchBreakdown {
    Scheme scheme = Scheme::Rotation;
    std::uint32_t k = 0;
    std::uint64_t total_trials = 0;
    std::uint64_t seed = 0;
    std::vector<LemmaCensusBucket> by_m;  // index = observed m, 0..k

    std::uint64_t bucket_trials(std::uint32_t m) const { return by_m[m].nn.count(); }
};

/// Probability that two empty bins reuse the same donor, as used by the E-E
/// closed form; m = 1 has a single possible donor so p = 1 regardless of
/// scheme.
inline long double reuse_probability_closed_form(std::uint32_t m, Scheme scheme) {
    if (m < 1) throw ConfigError("reuse_probability_closed_form: m must be at least 1");
    if (m == 1) return 1.0L;
    return (scheme == Scheme::Rotation ? 2.0L : 1.5L) / (static_cast<long double>(m) + 1.0L);
}

/// Conditional expectations of the three match-pair sums given m.
struct LemmaExpectations {
    long double nn = 0.0L;
    long double ne = 0.0L;
    long double ee = 0.0L;
};

inline LemmaExpectations lemma_expected_values(const PairStats& ps, Scheme scheme,
                                               std::uint32_t m) {
    const long double r = ps.resemblance().value_long();
    const long double r2 = r * ps.leave_one_out_resemblance().value_long();
    const long double kk = static_cast<long double>(ps.bin_count());
    const long double mm = static_cast<long double>(m);
    LemmaExpectations e;
    e.nn = mm * (mm - 1.0L) * r2;
    if (m >= 1) {
        e.ne = 2.0L * (kk - mm) * (r + (mm - 1.0L) * r2);
        const long double p = reuse_probability_closed_form(m, scheme);
        e.ee = (kk - mm) * (kk - mm - 1.0L) * (p * r + (1.0L - p) * r2);
    }
    return e;
}

/// Samples hash families and tallies the match-pair statistics per observed
/// m, alongside the closed-form conditional expectations.
inline MatchBreakdown lemma_census(const PairStats& ps, std::uint64_t trials, Scheme scheme,
                                   std::uint64_t seed) {
    if (trials == 0) throw ConfigError("lemma_census: needs at least one trial");
    const auto [s1, s2] = canonical_pair(ps);
    const UniverseParams& params = ps.params();
    const std::uint32_t k = params.bin_count();

    MatchBreakdown out;
    out.scheme = scheme;
    out.k = k;
    out.total_trials = trials;
    out.seed = seed;
    out.by_m.resize(k + 1);
    for (std::uint32_t m = 0; m <= k; ++m) {
        if (m >= 1) {
            const auto e = lemma_expected_values(ps, scheme, m);
            out.by_m[m].expected_nn = e.nn;
            out.by_m[m].expected_ne = e.ne;
            out.by_m[m].expected_ee = e.ee;
        }
    }

    SeededPermutation perm(params.universe_size(), 0);
    DirectionBits bits = DirectionBits::from_seed(k, 0);
    OphSketch o1, o2;
    DensifiedSketch d1, d2;
    for (std::uint64_t t = 0; t < trials; ++t) {
        perm.reseed(derive_seed(seed, t, 0));
        oph_sketch_into(s1, perm.mapping(), params, o1);
        oph_sketch_into(s2, perm.mapping(), params, o2);
        if (scheme == Scheme::Rotation) {
            densify_rotation_into(o1, params, d1);
            densify_rotation_into(o2, params, d2);
        } else {
            bits.reseed(derive_seed(seed, t, 1));
            densify_bidirectional_into(o1, bits, params, d1);
            densify_bidirectional_into(o2, bits, params, d2);
        }
        std::uint32_t n_nonempty_match = 0, n_empty_match = 0, n_both_empty = 0;
        for (std::uint32_t j = 0; j < k; ++j) {
            const bool both_empty = o1.is_empty(j) && o2.is_empty(j);
            n_both_empty += both_empty;
            if (d1[j] == d2[j]) {
                if (both_empty) {
                    ++n_empty_match;
                } else {
                    ++n_nonempty_match;
                }
            }
        }
        const std::uint32_t m = k - n_both_empty;
        auto& bucket = out.by_m[m];
        const long double nn = static_cast<long double>(n_nonempty_match) * n_nonempty_match -
                               n_nonempty_match;
        const long double ne = 2.0L * n_nonempty_match * n_empty_match;
        const long double ee =
            static_cast<long double>(n_empty_match) * n_empty_match - n_empty_match;
        bucket.nn.add(nn);
        bucket.ne.add(ne);
        bucket.ee.add(ee);
    }
    return out;
}

}  // namespace doph
