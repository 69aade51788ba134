#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "common.hpp"
#include "rational.hpp"
#include "sketch.hpp"

namespace doph {

/// Pair geometry (set sizes f1, f2, shared count a) over a binned universe.
/// All closed forms below are driven by these five integers; the universe
/// size is the padded one, because that is the domain the permutation acts on.
class PairStats {
  public:
    PairStats(std::uint64_t f1, std::uint64_t f2, std::uint64_t a, const UniverseParams& params)
        : f1_(f1), f2_(f2), a_(a), params_(params) {
        if (f1_ == 0 || f2_ == 0)
            throw ConfigError("PairStats: set sizes must be positive (sketching rejects empty sets)");
        if (a_ > f1_ || a_ > f2_)
            throw ConfigError("PairStats: intersection exceeds a set size");
        if (f1_ + f2_ - a_ > params_.requested_universe_size())
            throw ConfigError("PairStats: union does not fit in the universe");
    }

    std::uint64_t f1() const { return f1_; }
    std::uint64_t f2() const { return f2_; }
    std::uint64_t intersection_size() const { return a_; }
    std::uint64_t union_size() const { return f1_ + f2_ - a_; }
    const UniverseParams& params() const { return params_; }
    std::uint32_t bin_count() const { return params_.bin_count(); }
    std::uint32_t universe_size() const { return params_.universe_size(); }

    /// R = a / (f1 + f2 − a).
    Rational resemblance() const {
        return Rational(static_cast<std::int64_t>(a_), static_cast<std::int64_t>(union_size()));
    }

    /// R̃ = (a−1)/(f1+f2−a−1): the resemblance after removing one shared
    /// element. Defined as 1 for singleton identical sets; that value is only
    /// ever multiplied by configurations requiring two distinct matching
    /// bins, which such pairs cannot produce.
    Rational leave_one_out_resemblance() const {
        if (union_size() == 1) return Rational(1, 1);
        return Rational(static_cast<std::int64_t>(a_) - 1,
                        static_cast<std::int64_t>(union_size()) - 1);
    }

  private:
    std::uint64_t f1_;
    std::uint64_t f2_;
    std::uint64_t a_;
    UniverseParams params_;
};

/// Fraction of positions where two densified sketches agree. Unbiased for
/// the resemblance under both schemes.
inline double estimate_resemblance(const DensifiedSketch& d1, const DensifiedSketch& d2) {
    if (d1.scheme() != d2.scheme())
        throw ConfigError("estimate_resemblance: sketches use different densification schemes");
    if (d1.bin_count() != d2.bin_count() || d1.bin_count() == 0)
        throw ConfigError("estimate_resemblance: sketch lengths differ or are zero");
    std::size_t matches = 0;
    for (std::size_t j = 0; j < d1.bin_count(); ++j) matches += (d1[j] == d2[j]);
    return static_cast<double>(matches) / static_cast<double>(d1.bin_count());
}

/// Number of bins left raw-empty by both sketches (N_emp).
inline std::size_t simultaneous_empty_count(const OphSketch& sk1, const OphSketch& sk2) {
    if (sk1.bin_count() != sk2.bin_count())
        throw ConfigError("simultaneous_empty_count: sketch lengths differ");
    std::size_t n = 0;
    for (std::size_t j = 0; j < sk1.bin_count(); ++j) n += (sk1.is_empty(j) && sk2.is_empty(j));
    return n;
}

namespace detail {

/// Compensated (Neumaier) accumulator in long double.
struct NeumaierSum {
    long double sum = 0.0L;
    long double comp = 0.0L;

    void add(long double v) {
        const long double t = sum + v;
        if (std::fabs(sum) >= std::fabs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }

    long double value() const { return sum + comp; }
};

}  // namespace detail

/// How a distribution over the simultaneously-empty-bin count was evaluated.
enum class PmfMethod : std::uint8_t {
    /// The inclusion-exclusion alternating sum, evaluated in log space.
    AlternatingSum = 0,
    /// Cancellation-free occupancy recursion; used when the alternating sum's
    /// running error bound shows it cannot deliver the required accuracy.
    OccupancyRecursion = 1,
};

/// Distribution of N_emp, the number of bins containing none of the union's
/// elements after permutation. Entries are clamped to [0,1] and renormalized
/// when roundoff moves the total off 1; the raw diagnostics stay readable.
class EmptyBinDistribution {
  public:
    std::size_t bin_count() const { return probabilities_.size() - 1; }
    long double operator[](std::size_t i) const { return probabilities_[i]; }
    const std::vector<long double>& probabilities() const { return probabilities_; }

    PmfMethod method() const { return method_; }
    /// Sum of the entries before clamping/renormalization.
    long double raw_sum() const { return raw_sum_; }
    /// Most negative entry seen before clamping (0 when none were negative).
    long double min_raw_value() const { return min_raw_; }
    bool renormalized() const { return renormalized_; }

    /// Σ_i P_i · g(i).
    template <typename F>
    long double expectation(F&& g) const {
        detail::NeumaierSum acc;
        for (std::size_t i = 0; i < probabilities_.size(); ++i) {
            if (probabilities_[i] > 0.0L) acc.add(probabilities_[i] * g(i));
        }
        return acc.value();
    }

    /// Expectation restricted to i ≤ k−1 (at least one simultaneously
    /// non-empty bin) and renormalized over that event. With a non-empty
    /// union P_k = 0, so the restriction only matters as a guard.
    template <typename F>
    long double expectation_given_some_occupied(F&& g) const {
        detail::NeumaierSum acc;
        detail::NeumaierSum mass;
        for (std::size_t i = 0; i + 1 < probabilities_.size(); ++i) {
            if (probabilities_[i] > 0.0L) {
                acc.add(probabilities_[i] * g(i));
                mass.add(probabilities_[i]);
            }
        }
        const long double m = mass.value();
        if (m <= 0.0L) throw ConfigError("EmptyBinDistribution: no mass on occupied configurations");
        return acc.value() / m;
    }

  private:
    friend EmptyBinDistribution empty_bin_pmf(const PairStats&);
    friend class PmfBuilder;

    std::vector<long double> probabilities_;
    PmfMethod method_ = PmfMethod::AlternatingSum;
    long double raw_sum_ = 0.0L;
    long double min_raw_ = 0.0L;
    bool renormalized_ = false;
};

namespace detail {

constexpr long double kLongDoubleEps = 1.08e-19L;
constexpr long double kNegInf = -1e4900L;

/// log k!/(i! s! (k−i−s)!) via lgammal.
inline long double log_trinomial(std::uint64_t k, std::uint64_t i, std::uint64_t s) {
    return std::lgamma(static_cast<long double>(k) + 1.0L) -
           std::lgamma(static_cast<long double>(i) + 1.0L) -
           std::lgamma(static_cast<long double>(s) + 1.0L) -
           std::lgamma(static_cast<long double>(k - i - s) + 1.0L);
}

struct AlternatingPmfResult {
    std::vector<long double> pmf;
    long double max_abs_error = 0.0L;  // conservative bound on Σ_i |error in P_i|
};

/// Inclusion-exclusion evaluation: P_i = Σ_s (−1)^s k!/(i!s!c!) Q(c) with
/// c = k−i−s and Q(c) = Π_{t<u} (c·w − t)/(D − t), all in log space with
/// sign-aware compensated summation. Also returns a running bound on the
/// cancellation error so callers can tell when the result is unusable.
inline AlternatingPmfResult pmf_alternating(std::uint64_t u, std::uint64_t D, std::uint64_t k) {
    const std::uint64_t w = D / k;
    // log Q(c) as a summed series of log ratios; -inf marks Q(c) = 0.
    std::vector<long double> log_q(k + 1, kNegInf);
    for (std::uint64_t c = 1; c <= k; ++c) {
        if (c * w < u) continue;
        NeumaierSum acc;
        for (std::uint64_t t = 0; t < u; ++t) {
            acc.add(std::log((static_cast<long double>(c * w) - t) /
                              (static_cast<long double>(D) - t)));
        }
        log_q[c] = acc.value();
    }
    if (u == 0) log_q[0] = 0.0L;

    AlternatingPmfResult out;
    out.pmf.assign(k + 1, 0.0L);
    std::vector<long double> log_terms;
    for (std::uint64_t i = 0; i <= k; ++i) {
        log_terms.clear();
        long double max_log = kNegInf;
        for (std::uint64_t s = 0; s + i <= k; ++s) {
            const std::uint64_t c = k - i - s;
            long double lt = kNegInf;
            if (log_q[c] > kNegInf) {
                lt = log_trinomial(k, i, s) + log_q[c];
                max_log = std::max(max_log, lt);
            }
            log_terms.push_back(lt);
        }
        if (max_log <= kNegInf) continue;
        NeumaierSum scaled;
        long double abs_scaled = 0.0L;
        for (std::size_t s = 0; s < log_terms.size(); ++s) {
            if (log_terms[s] <= kNegInf) continue;
            const long double mag = std::exp(log_terms[s] - max_log);
            scaled.add((s % 2 == 0) ? mag : -mag);
            abs_scaled += mag;
        }
        const long double scale = std::exp(max_log);
        out.pmf[i] = scale * scaled.value();
        // Each term's log magnitude carries ~eps relative error, which the
        // exp turns into eps·|log| relative error on the term itself; after
        // cancellation those become absolute errors on P_i.
        const long double condition = 8.0L + 2.0L * std::fabs(max_log) +
                                      static_cast<long double>(log_terms.size());
        out.max_abs_error += scale * abs_scaled * kLongDoubleEps * condition;
    }
    return out;
}

/// Cancellation-free evaluation. By bin exchangeability
///   P_i = C(k,i) · Q(k−i) · σ(k−i, u)
/// where σ(j, b) is the probability that b union elements confined to j bins
/// hit every one of those bins. σ satisfies a positive recursion over the
/// count landing in the last bin (multivariate hypergeometric), so every
/// intermediate stays in [0,1] and no subtractive cancellation occurs.
inline std::vector<long double> pmf_occupancy(std::uint64_t u, std::uint64_t D, std::uint64_t k) {
    const std::uint64_t w = D / k;
    // Cumulative log-factorial table, logfact[n] = ln n!.
    std::vector<long double> logfact(D + 1, 0.0L);
    {
        NeumaierSum acc;
        for (std::uint64_t n = 1; n <= D; ++n) {
            acc.add(std::log(static_cast<long double>(n)));
            logfact[n] = acc.value();
        }
    }
    const auto log_choose = [&](std::uint64_t n, std::uint64_t r) -> long double {
        return logfact[n] - logfact[r] - logfact[n - r];
    };

    const std::uint64_t jmax = std::min(u, k);
    std::vector<long double> sigma_at_u(jmax + 1, 0.0L);
    std::vector<long double> prev(u + 1, 0.0L);
    std::vector<long double> cur(u + 1, 0.0L);
    prev[0] = 1.0L;  // zero bins hold zero elements
    if (u == 0) sigma_at_u[0] = 1.0L;
    for (std::uint64_t j = 1; j <= jmax; ++j) {
        std::fill(cur.begin(), cur.end(), 0.0L);
        const std::uint64_t rest = (j - 1) * w;
        const std::uint64_t b_hi = std::min(u, j * w);
        for (std::uint64_t b = j; b <= b_hi; ++b) {
            const std::uint64_t x_lo = (b > rest) ? b - rest : 1;
            const std::uint64_t x_hi = std::min<std::uint64_t>(w, b - (j - 1));
            if (x_lo > x_hi) continue;
            // Hypergeometric weights T(x) = C(w,x) C(rest, b−x) / C(jw, b),
            // generated outward from the mode so endpoints may underflow
            // without dragging the whole sum to zero.
            std::uint64_t x0 = static_cast<std::uint64_t>(
                (static_cast<long double>(b + 1) * (w + 1)) / static_cast<long double>(j * w + 2));
            x0 = std::max(x_lo, std::min(x_hi, x0));
            const long double t0 = std::exp(log_choose(w, x0) + log_choose(rest, b - x0) -
                                             log_choose(j * w, b));
            const long double cutoff = t0 * 1e-26L;
            NeumaierSum acc;
            long double t = t0;
            for (std::uint64_t x = x0;; --x) {  // downward sweep, x0 included
                acc.add(t * prev[b - x]);
                if (x == x_lo) break;
                t *= static_cast<long double>(x) * (static_cast<long double>(rest) - b + x);
                t /= static_cast<long double>(w - x + 1) * (static_cast<long double>(b) - x + 1);
                if (t < cutoff) break;
            }
            t = t0;
            for (std::uint64_t x = x0 + 1; x <= x_hi; ++x) {  // upward sweep
                t *= static_cast<long double>(w - x + 1) * (static_cast<long double>(b) - x + 1);
                t /= static_cast<long double>(x) * (static_cast<long double>(rest) - b + x);
                if (t < cutoff) break;
                acc.add(t * prev[b - x]);
            }
            cur[b] = acc.value();
        }
        sigma_at_u[j] = cur[u];
        std::swap(prev, cur);
    }

    std::vector<long double> pmf(k + 1, 0.0L);
    for (std::uint64_t j = (u > 0 ? 1 : 0); j <= jmax; ++j) {
        if (j * w < u || sigma_at_u[j] <= 0.0L) continue;
        NeumaierSum log_ratio;
        for (std::uint64_t t = 0; t < u; ++t) {
            log_ratio.add(std::log((static_cast<long double>(j * w) - t) /
                                    (static_cast<long double>(D) - t)));
        }
        const long double log_pi = log_choose(k, k - j) + log_ratio.value() +
                                   std::log(sigma_at_u[j]);
        pmf[k - j] = std::exp(log_pi);
    }
    if (u == 0) pmf[k] = 1.0L;
    return pmf;
}

}  // namespace detail

/// Distribution of the simultaneously-empty-bin count for a pair whose union
/// has f1+f2−a elements placed by a uniform permutation over D positions
/// split into k bins. Evaluates the alternating inclusion-exclusion sum in
/// log space; when that sum's own error bound shows catastrophic cancellation
/// (sparse pairs at large k), switches to an equivalent cancellation-free
/// recursion. Results are cached by (f1, f2, a, D, k).
inline EmptyBinDistribution empty_bin_pmf(const PairStats& ps) {
    const std::uint64_t u = ps.union_size();
    const std::uint64_t D = ps.universe_size();
    const std::uint64_t k = ps.bin_count();
    if (u == 0) throw ConfigError("empty_bin_pmf: degenerate pair with empty union");

    struct Key {
        std::uint64_t f1, f2, a, D, k;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& key) const {
            std::uint64_t h = key.f1;
            for (std::uint64_t v : {key.f2, key.a, key.D, key.k}) {
                std::uint64_t s = h ^ (v + 0x9e3779b97f4a7c15ULL);
                h = splitmix64(s);
            }
            return static_cast<std::size_t>(h);
        }
    };
    static std::unordered_map<Key, std::shared_ptr<const EmptyBinDistribution>, KeyHash> cache;
    static std::shared_mutex cache_mutex;

    const Key key{ps.f1(), ps.f2(), ps.intersection_size(), D, k};
    {
        std::shared_lock lock(cache_mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return *it->second;
    }

    EmptyBinDistribution dist;
    auto alternating = detail::pmf_alternating(u, D, k);
    if (alternating.max_abs_error < 1e-13L) {
        dist.probabilities_ = std::move(alternating.pmf);
        dist.method_ = PmfMethod::AlternatingSum;
    } else {
        dist.probabilities_ = detail::pmf_occupancy(u, D, k);
        dist.method_ = PmfMethod::OccupancyRecursion;
    }

    // Support hygiene: u elements occupy at most u bins, so N_emp ≥ k − u.
    const std::uint64_t support_lo = (u < k) ? k - u : 0;
    for (std::uint64_t i = 0; i < support_lo; ++i) dist.probabilities_[i] = 0.0L;

    detail::NeumaierSum total;
    long double min_raw = 0.0L;
    for (auto& p : dist.probabilities_) {
        min_raw = std::min(min_raw, p);
        total.add(p);
        if (p < 0.0L) p = 0.0L;
        if (p > 1.0L) p = 1.0L;
    }
    dist.raw_sum_ = total.value();
    dist.min_raw_ = min_raw;
    if (std::fabs(dist.raw_sum_ - 1.0L) > 1e-9L) {
        if (dist.raw_sum_ <= 0.0L)
            throw ConfigError("empty_bin_pmf: evaluation collapsed; parameters out of supported range");
        for (auto& p : dist.probabilities_) p /= dist.raw_sum_;
        dist.renormalized_ = true;
    }

    auto shared = std::make_shared<const EmptyBinDistribution>(dist);
    {
        std::unique_lock lock(cache_mutex);
        if (cache.size() >= 512) cache.clear();
        cache.emplace(key, std::move(shared));
    }
    return dist;
}

/// The four expectation coefficients and both closed-form variances, plus the
/// closed-form gap. Everything is evaluated in long double off one shared
/// pmf so the identity gap == var_rotation − var_bidirectional carries
/// through numerically.
struct VarianceBreakdown {
    long double a_term = 0.0L;       // 2 E[n/(k−n+1)]
    long double b_term = 0.0L;       // (k+1) E[(k−n−1)/(k−n+1)]
    long double a_plus_term = 0.0L;  // E[n(4k−n+1)/(2(k−n+1))]
    long double b_plus_term = 0.0L;  // E[(2k³+n²−n(2k²+2k+1)−2k)/(2(k−n+1))]
    long double var_rotation = 0.0L;
    long double var_bidirectional = 0.0L;
    long double gap_closed_form = 0.0L;
};

inline VarianceBreakdown variance_breakdown(const PairStats& ps) {
    const std::uint32_t k = ps.bin_count();
    if (k < 2) throw ConfigError("variance_breakdown: needs at least two bins");
    const EmptyBinDistribution dist = empty_bin_pmf(ps);

    // var_rotation − var_bidirectional equals the gap term by term for any
    // fixed pmf, but the gap can sit ten orders of magnitude below the
    // variances on dense pairs, so the expectations and the assembly run in
    // quad precision and only the results round back to long double.
    using quad = __float128;
    const quad kk = static_cast<long double>(k);
    const quad r = ps.resemblance().value_long();
    const quad r2 = r * static_cast<quad>(ps.leave_one_out_resemblance().value_long());

    quad mass = 0, a = 0, b = 0, a_plus = 0, b_plus = 0, gap = 0;
    for (std::size_t i = 0; i + 1 <= k; ++i) {
        const long double pl = dist[i];
        if (pl <= 0.0L) continue;
        const quad p = pl;
        const quad n = static_cast<long double>(i);
        const quad room = kk - n + 1;
        mass += p;
        a += p * 2 * n / room;
        b += p * (kk + 1) * (kk - n - 1) / room;
        a_plus += p * n * (4 * kk - n + 1) / (2 * room);
        b_plus += p * (2 * kk * kk * kk + n * n - n * (2 * kk * kk + 2 * kk + 1) - 2 * kk) /
                  (2 * room);
        gap += p * n * (n - 1) / (2 * kk * kk * room);
    }
    if (mass <= 0) throw ConfigError("variance_breakdown: no mass on occupied configurations");

    VarianceBreakdown out;
    out.a_term = static_cast<long double>(a / mass);
    out.b_term = static_cast<long double>(b / mass);
    out.a_plus_term = static_cast<long double>(a_plus / mass);
    out.b_plus_term = static_cast<long double>(b_plus / mass);
    out.var_rotation =
        static_cast<long double>(r / kk + (a * r + b * r2) / (mass * kk) - r * r);
    out.var_bidirectional = static_cast<long double>(
        r / kk + (a_plus * r + b_plus * r2) / (mass * kk * kk) - r * r);
    out.gap_closed_form = static_cast<long double>(gap / mass * (r - r2));
    return out;
}

/// Closed-form variance of the rotation-scheme estimator.
inline double variance_rotation(const PairStats& ps) {
    return static_cast<double>(variance_breakdown(ps).var_rotation);
}

/// Closed-form variance of the bidirectional-scheme estimator.
inline double variance_bidirectional(const PairStats& ps) {
    return static_cast<double>(variance_breakdown(ps).var_bidirectional);
}

/// Closed-form variance improvement of the bidirectional scheme:
/// E[n(n−1)/(2k²(k−n+1))]·(R − R·R̃), always ≥ 0.
inline double variance_gap(const PairStats& ps) {
    return static_cast<double>(variance_breakdown(ps).gap_closed_form);
}

}  // namespace doph
