#pragma once

#include <cmath>
#include <cstdint>

#include "common.hpp"

namespace doph {

/// Streaming mean/variance accumulator (sum and sum of squares in long
/// double; the trial counts here never get close to losing integer digits).
class MeanAccumulator {
  public:
    void add(long double x) {
        ++n_;
        sum_ += x;
        sumsq_ += x * x;
    }

    std::uint64_t count() const { return n_; }

    long double mean() const {
        if (n_ == 0) throw ConfigError("MeanAccumulator: no samples");
        return sum_ / static_cast<long double>(n_);
    }

    long double sample_variance() const {
        if (n_ < 2) return 0.0L;
        const long double m = mean();
        const long double v =
            (sumsq_ - static_cast<long double>(n_) * m * m) / static_cast<long double>(n_ - 1);
        return v > 0.0L ? v : 0.0L;
    }

    /// Standard error of the mean.
    long double std_error() const {
        if (n_ == 0) return 0.0L;
        return std::sqrt(sample_variance() / static_cast<long double>(n_));
    }

  private:
    std::uint64_t n_ = 0;
    long double sum_ = 0.0L;
    long double sumsq_ = 0.0L;
};

/// One-sided sign test: probability of seeing at least `wins` successes in
/// wins+losses fair coin flips (ties must be dropped by the caller).
inline double sign_test_p_value(std::uint64_t wins, std::uint64_t losses) {
    const std::uint64_t n = wins + losses;
    if (n == 0) return 1.0;
    if (n > 1024) throw ConfigError("sign_test_p_value: too many observations for exact test");
    long double p = 0.0L;
    long double log_half = std::log(0.5L);
    for (std::uint64_t i = wins; i <= n; ++i) {
        const long double log_term = std::lgamma(static_cast<long double>(n) + 1.0L) -
                                     std::lgamma(static_cast<long double>(i) + 1.0L) -
                                     std::lgamma(static_cast<long double>(n - i) + 1.0L) +
                                     static_cast<long double>(n) * log_half;
        p += std::exp(log_term);
    }
    return static_cast<double>(p > 1.0L ? 1.0L : p);
}

}  // namespace doph
