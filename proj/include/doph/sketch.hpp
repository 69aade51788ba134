#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "random.hpp"
#include "rational.hpp"

namespace doph {

/// Operation counters used to assert the advertised costs: hashing a vector
/// costs one permutation lookup per nonzero, densification costs at most two
/// circular scans over the bins.
struct HashCostCounters {
    std::uint64_t permutation_lookups = 0;
    std::uint64_t oph_bin_inits = 0;
    std::uint64_t densify_bin_visits = 0;

    std::uint64_t total_bin_ops() const { return oph_bin_inits + densify_bin_visits; }
};

/// Hashed universe geometry: the universe is padded up to a multiple of the
/// bin count so every bin spans exactly `bin_width` consecutive positions.
/// The offset constant C = bin_width + 1 strictly exceeds every in-bin value,
/// which is what keeps borrowed values from colliding with raw ones.
class UniverseParams {
  public:
    UniverseParams(std::uint32_t requested_universe, std::uint32_t bin_count) {
        if (requested_universe == 0) throw ConfigError("UniverseParams: universe must be non-empty");
        if (bin_count == 0) throw ConfigError("UniverseParams: bin count must be positive");
        requested_ = requested_universe;
        bins_ = bin_count;
        const std::uint64_t padded =
            (static_cast<std::uint64_t>(requested_universe) + bin_count - 1) / bin_count * bin_count;
        if (padded > std::numeric_limits<std::uint32_t>::max())
            throw ConfigError("UniverseParams: padded universe exceeds 32-bit index range");
        padded_ = static_cast<std::uint32_t>(padded);
        width_ = padded_ / bins_;
    }

    std::uint32_t universe_size() const { return padded_; }
    std::uint32_t requested_universe_size() const { return requested_; }
    std::uint32_t bin_count() const { return bins_; }
    std::uint32_t bin_width() const { return width_; }
    std::uint64_t offset_constant() const { return static_cast<std::uint64_t>(width_) + 1; }
    bool was_padded() const { return padded_ != requested_; }

    friend bool operator==(const UniverseParams& a, const UniverseParams& b) {
        return a.requested_ == b.requested_ && a.bins_ == b.bins_;
    }

  private:
    std::uint32_t requested_ = 0;
    std::uint32_t padded_ = 0;
    std::uint32_t bins_ = 0;
    std::uint32_t width_ = 0;
};

/// A set of distinct indices over [0, universe_size), kept sorted.
class SparseBinarySet {
  public:
    SparseBinarySet(std::uint32_t universe_size, std::vector<std::uint32_t> indices)
        : universe_(universe_size), indices_(std::move(indices)) {
        std::sort(indices_.begin(), indices_.end());
        indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
        if (!indices_.empty() && indices_.back() >= universe_)
            throw ConfigError("SparseBinarySet: index " + std::to_string(indices_.back()) +
                              " outside universe of size " + std::to_string(universe_));
    }

    std::uint32_t universe_size() const { return universe_; }
    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }
    const std::vector<std::uint32_t>& indices() const { return indices_; }

  private:
    std::uint32_t universe_;
    std::vector<std::uint32_t> indices_;
};

/// Exact resemblance |S1 ∩ S2| / |S1 ∪ S2| as a fraction. Two empty sets
/// resemble each other fully by convention.
inline Rational resemblance_exact(const SparseBinarySet& s1, const SparseBinarySet& s2) {
    if (s1.universe_size() != s2.universe_size())
        throw ConfigError("resemblance_exact: sets live in different universes");
    if (s1.empty() && s2.empty()) return Rational(1, 1);
    const auto& a = s1.indices();
    const auto& b = s2.indices();
    std::int64_t shared = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++shared;
            ++i;
            ++j;
        }
    }
    const auto total = static_cast<std::int64_t>(a.size() + b.size()) - shared;
    return Rational(shared, total);
}

/// A uniformly random bijection on [0, domain), materialized as an array via
/// a seeded Fisher-Yates shuffle. Memory is 4 bytes per domain element, so a
/// cap guards against accidentally materializing a huge universe.
class SeededPermutation {
  public:
    static constexpr std::uint32_t kDefaultMaxDomain = 1u << 26;

    SeededPermutation(std::uint32_t domain_size, std::uint64_t seed,
                      std::uint32_t max_domain = kDefaultMaxDomain)
        : domain_(domain_size), seed_(seed) {
        if (domain_ == 0) throw ConfigError("SeededPermutation: domain must be non-empty");
        if (domain_ > max_domain)
            throw ConfigError("SeededPermutation: domain " + std::to_string(domain_) +
                              " exceeds the materialization cap " + std::to_string(max_domain));
        mapping_.resize(domain_);
        reseed(seed);
    }

    /// Rebuilds the permutation in place for a new seed; equivalent to
    /// constructing a fresh instance with the same domain.
    void reseed(std::uint64_t seed) {
        seed_ = seed;
        for (std::uint32_t i = 0; i < domain_; ++i) mapping_[i] = i;
        RandomEngine rng(seed);
        for (std::uint32_t i = domain_ - 1; i > 0; --i) {
            const auto j = static_cast<std::uint32_t>(uniform_below(rng, i + 1));
            std::swap(mapping_[i], mapping_[j]);
        }
    }

    std::uint32_t apply(std::uint32_t element) const { return mapping_[element]; }
    std::uint32_t domain_size() const { return domain_; }
    std::uint64_t seed() const { return seed_; }
    std::span<const std::uint32_t> mapping() const { return mapping_; }

  private:
    std::uint32_t domain_;
    std::uint64_t seed_;
    std::vector<std::uint32_t> mapping_;
};

/// Classic minwise hash: the smallest permuted index of the set.
inline std::uint32_t minwise_hash(const SparseBinarySet& s, const SeededPermutation& perm) {
    if (s.empty()) throw EmptyInputError("minwise_hash: set is empty");
    if (s.universe_size() > perm.domain_size())
        throw ConfigError("minwise_hash: set universe exceeds permutation domain");
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    for (const auto e : s.indices()) best = std::min(best, perm.apply(e));
    return best;
}

/// Raw one-permutation sketch: bin j holds the minimum permuted index that
/// fell into bin j, reduced mod bin_width; bins nothing fell into hold Empty.
class OphSketch {
  public:
    static constexpr std::uint32_t kEmpty = std::numeric_limits<std::uint32_t>::max();
    static constexpr std::uint32_t kNoAnchor = std::numeric_limits<std::uint32_t>::max();

    OphSketch() = default;

    explicit OphSketch(std::vector<std::uint32_t> bins) : bins_(std::move(bins)) {
        recompute_anchor();
    }

    std::size_t bin_count() const { return bins_.size(); }
    bool is_empty(std::size_t j) const { return bins_[j] == kEmpty; }
    std::uint32_t operator[](std::size_t j) const { return bins_[j]; }
    const std::vector<std::uint32_t>& bins() const { return bins_; }

    /// Index of one non-empty bin (kNoAnchor when all bins are empty).
    std::uint32_t anchor() const { return anchor_; }

    std::size_t empty_bin_count() const {
        return static_cast<std::size_t>(std::count(bins_.begin(), bins_.end(), kEmpty));
    }

    void reset(std::size_t bin_count) {
        bins_.assign(bin_count, kEmpty);
        anchor_ = kNoAnchor;
    }

    void place(std::size_t j, std::uint32_t value) {
        if (value < bins_[j]) bins_[j] = value;
        if (anchor_ == kNoAnchor) anchor_ = static_cast<std::uint32_t>(j);
    }

  private:
    void recompute_anchor() {
        anchor_ = kNoAnchor;
        for (std::size_t j = 0; j < bins_.size(); ++j) {
            if (bins_[j] != kEmpty) {
                anchor_ = static_cast<std::uint32_t>(j);
                break;
            }
        }
    }

    std::vector<std::uint32_t> bins_;
    std::uint32_t anchor_ = kNoAnchor;
};

/// Computes the raw sketch into `out`, reusing its storage. The `mapping`
/// span must be a bijection on [0, params.universe_size()).
inline void oph_sketch_into(const SparseBinarySet& s, std::span<const std::uint32_t> mapping,
                            const UniverseParams& params, OphSketch& out,
                            HashCostCounters* counters = nullptr) {
    if (s.empty()) throw EmptyInputError("oph_sketch: set is empty");
    if (mapping.size() != params.universe_size())
        throw ConfigError("oph_sketch: permutation domain does not match the padded universe");
    if (s.universe_size() > params.universe_size())
        throw ConfigError("oph_sketch: set universe exceeds the padded universe");
    const std::uint32_t w = params.bin_width();
    out.reset(params.bin_count());
    for (const auto e : s.indices()) {
        const std::uint32_t p = mapping[e];
        out.place(p / w, p % w);
    }
    if (counters != nullptr) {
        counters->permutation_lookups += s.size();
        counters->oph_bin_inits += params.bin_count();
    }
}

inline OphSketch oph_sketch(const SparseBinarySet& s, const SeededPermutation& perm,
                            const UniverseParams& params, HashCostCounters* counters = nullptr) {
    OphSketch out;
    oph_sketch_into(s, perm.mapping(), params, out, counters);
    return out;
}

/// Per-bin borrow directions for the bidirectional scheme. The bits are part
/// of the hash family: two vectors sketched under the same family share them,
/// which is what makes borrowed bins comparable.
class DirectionBits {
  public:
    static DirectionBits from_seed(std::uint32_t bin_count, std::uint64_t seed) {
        DirectionBits d;
        d.seed_ = seed;
        d.bits_.resize(bin_count);
        RandomEngine rng(seed);
        std::uint64_t word = 0;
        for (std::uint32_t j = 0; j < bin_count; ++j) {
            if (j % 64 == 0) word = rng();
            d.bits_[j] = static_cast<std::uint8_t>((word >> (j % 64)) & 1u);
        }
        return d;
    }

    static DirectionBits from_bits(std::vector<std::uint8_t> bits) {
        DirectionBits d;
        d.bits_ = std::move(bits);
        for (auto& b : d.bits_) b = (b != 0);
        return d;
    }

    std::size_t size() const { return bits_.size(); }
    bool operator[](std::size_t j) const { return bits_[j] != 0; }
    void set(std::size_t j, bool v) { bits_[j] = v ? 1 : 0; }
    std::uint64_t seed() const { return seed_; }

    void reseed(std::uint64_t seed) { *this = from_seed(static_cast<std::uint32_t>(bits_.size()), seed); }

  private:
    std::vector<std::uint8_t> bits_;
    std::uint64_t seed_ = 0;
};

/// Sketch with every bin filled: raw bins keep their value v, borrowed bins
/// hold v + t*C where t is the circular distance to the donor bin.
class DensifiedSketch {
  public:
    DensifiedSketch() = default;
    DensifiedSketch(std::vector<std::uint64_t> values, Scheme scheme)
        : values_(std::move(values)), scheme_(scheme) {}

    std::size_t bin_count() const { return values_.size(); }
    std::uint64_t operator[](std::size_t j) const { return values_[j]; }
    const std::vector<std::uint64_t>& values() const { return values_; }
    Scheme scheme() const { return scheme_; }

    void reset(std::size_t bin_count, Scheme scheme) {
        values_.assign(bin_count, 0);
        scheme_ = scheme;
    }

    void set(std::size_t j, std::uint64_t v) { values_[j] = v; }

  private:
    std::vector<std::uint64_t> values_;
    Scheme scheme_ = Scheme::Rotation;
};

namespace detail {

// The offset constant is a parameter here only so tests can inject a wrong
// one and watch the collision checks fail.
inline void densify_rotation_with_offset(const OphSketch& sk, std::uint64_t offset_constant,
                                         DensifiedSketch& out, HashCostCounters* counters) {
    const auto k = static_cast<std::uint32_t>(sk.bin_count());
    const std::uint32_t anchor = sk.anchor();
    if (anchor == OphSketch::kNoAnchor)
        throw EmptyInputError("densify: all bins are empty");
    out.reset(k, Scheme::Rotation);
    // One backward circular pass; the carry is always the nearest non-empty
    // bin clockwise of the current position.
    std::uint64_t carry_value = sk[anchor];
    std::uint32_t carry_pos = anchor;
    out.set(anchor, carry_value);
    for (std::uint32_t step = 1; step < k; ++step) {
        const std::uint32_t j = (anchor + k - step) % k;
        if (!sk.is_empty(j)) {
            carry_value = sk[j];
            carry_pos = j;
            out.set(j, carry_value);
        } else {
            const std::uint32_t t = (carry_pos + k - j) % k;
            out.set(j, carry_value + static_cast<std::uint64_t>(t) * offset_constant);
        }
    }
    if (counters != nullptr) counters->densify_bin_visits += k;
}

inline void densify_bidirectional_with_offset(const OphSketch& sk, const DirectionBits& bits,
                                              std::uint64_t offset_constant, DensifiedSketch& out,
                                              HashCostCounters* counters) {
    const auto k = static_cast<std::uint32_t>(sk.bin_count());
    if (bits.size() != k)
        throw ConfigError("densify: direction bits do not match the bin count");
    const std::uint32_t anchor = sk.anchor();
    if (anchor == OphSketch::kNoAnchor)
        throw EmptyInputError("densify: all bins are empty");
    out.reset(k, Scheme::Bidirectional);
    out.set(anchor, sk[anchor]);
    // Forward pass fills the bins that borrow counterclockwise (bit 0),
    // backward pass fills the ones that borrow clockwise (bit 1).
    std::uint64_t carry_value = sk[anchor];
    std::uint32_t carry_pos = anchor;
    for (std::uint32_t step = 1; step < k; ++step) {
        const std::uint32_t j = (anchor + step) % k;
        if (!sk.is_empty(j)) {
            carry_value = sk[j];
            carry_pos = j;
            out.set(j, carry_value);
        } else if (!bits[j]) {
            const std::uint32_t t = (j + k - carry_pos) % k;
            out.set(j, carry_value + static_cast<std::uint64_t>(t) * offset_constant);
        }
    }
    carry_value = sk[anchor];
    carry_pos = anchor;
    for (std::uint32_t step = 1; step < k; ++step) {
        const std::uint32_t j = (anchor + k - step) % k;
        if (!sk.is_empty(j)) {
            carry_value = sk[j];
            carry_pos = j;
        } else if (bits[j]) {
            const std::uint32_t t = (carry_pos + k - j) % k;
            out.set(j, carry_value + static_cast<std::uint64_t>(t) * offset_constant);
        }
    }
    if (counters != nullptr) counters->densify_bin_visits += 2ull * k - 1;
}

}  // namespace detail

inline void densify_rotation_into(const OphSketch& sk, const UniverseParams& params,
                                  DensifiedSketch& out, HashCostCounters* counters = nullptr) {
    if (sk.bin_count() != params.bin_count())
        throw ConfigError("densify: sketch bin count does not match the parameters");
    detail::densify_rotation_with_offset(sk, params.offset_constant(), out, counters);
}

inline DensifiedSketch densify_rotation(const OphSketch& sk, const UniverseParams& params,
                                        HashCostCounters* counters = nullptr) {
    DensifiedSketch out;
    densify_rotation_into(sk, params, out, counters);
    return out;
}

inline void densify_bidirectional_into(const OphSketch& sk, const DirectionBits& bits,
                                       const UniverseParams& params, DensifiedSketch& out,
                                       HashCostCounters* counters = nullptr) {
    if (sk.bin_count() != params.bin_count())
        throw ConfigError("densify: sketch bin count does not match the parameters");
    detail::densify_bidirectional_with_offset(sk, bits, params.offset_constant(), out, counters);
}

inline DensifiedSketch densify_bidirectional(const OphSketch& sk, const DirectionBits& bits,
                                             const UniverseParams& params,
                                             HashCostCounters* counters = nullptr) {
    DensifiedSketch out;
    densify_bidirectional_into(sk, bits, params, out, counters);
    return out;
}

/// A complete hashing family: universe geometry, scheme, one permutation and
/// (for the bidirectional scheme) one direction-bit vector. Immutable once
/// constructed except through reseed().
class HashFamily {
  public:
    HashFamily(const UniverseParams& params, Scheme scheme, std::uint64_t perm_seed,
               std::uint64_t bits_seed,
               std::uint32_t max_domain = SeededPermutation::kDefaultMaxDomain)
        : params_(params),
          scheme_(scheme),
          perm_(params.universe_size(), perm_seed, max_domain),
          bits_(DirectionBits::from_seed(params.bin_count(), bits_seed)) {}

    const UniverseParams& params() const { return params_; }
    Scheme scheme() const { return scheme_; }
    const SeededPermutation& permutation() const { return perm_; }
    const DirectionBits& direction_bits() const { return bits_; }

    void reseed(std::uint64_t perm_seed, std::uint64_t bits_seed) {
        perm_.reseed(perm_seed);
        bits_.reseed(bits_seed);
    }

    OphSketch oph(const SparseBinarySet& s, HashCostCounters* counters = nullptr) const {
        return oph_sketch(s, perm_, params_, counters);
    }

    DensifiedSketch sketch(const SparseBinarySet& s, HashCostCounters* counters = nullptr) const {
        DensifiedSketch out;
        OphSketch scratch;
        sketch_into(s, out, scratch, counters);
        return out;
    }

    /// Allocation-free variant for hot loops; `scratch` holds the raw sketch.
    void sketch_into(const SparseBinarySet& s, DensifiedSketch& out, OphSketch& scratch,
                     HashCostCounters* counters = nullptr) const {
        oph_sketch_into(s, perm_.mapping(), params_, scratch, counters);
        if (scheme_ == Scheme::Rotation) {
            densify_rotation_into(scratch, params_, out, counters);
        } else {
            densify_bidirectional_into(scratch, bits_, params_, out, counters);
        }
    }

  private:
    UniverseParams params_;
    Scheme scheme_;
    SeededPermutation perm_;
    DirectionBits bits_;
};

/// Full pipeline: permute, bin, densify.
inline DensifiedSketch sketch_pipeline(const SparseBinarySet& s, const HashFamily& family,
                                       HashCostCounters* counters = nullptr) {
    return family.sketch(s, counters);
}

}  // namespace doph
