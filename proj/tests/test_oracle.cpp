#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "doph/doph.hpp"

using namespace doph;

TEST_CASE("enumerated per-bin collision equals resemblance") {
    struct Case {
        std::uint32_t universe, bins;
        std::vector<std::uint32_t> s1, s2;
        Rational want;
    };
    const std::vector<Case> cases = {
        {4, 2, {0, 1}, {1, 2}, Rational(1, 3)},
        {4, 2, {0}, {0, 1, 2, 3}, Rational(1, 4)},
        {6, 3, {0, 2, 4}, {1, 2, 4}, Rational(1, 2)},
        {8, 4, {0, 3, 5}, {3, 5, 6}, Rational(1, 2)},
    };
    for (const auto& c : cases) {
        const UniverseParams up(c.universe, c.bins);
        const SparseBinarySet s1(c.universe, c.s1), s2(c.universe, c.s2);
        REQUIRE(resemblance_exact(s1, s2) == c.want);
        for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
            const auto census = exact_collision_probability(s1, s2, up, scheme);
            INFO("D=" << c.universe << " k=" << c.bins << " scheme=" << to_string(scheme));
            for (std::uint32_t j = 0; j < census.bin_count(); ++j) {
                CHECK(census.per_bin_probability(j) == c.want);
            }
            CHECK(census.expected_estimate() == c.want);
            CHECK(census.enumerated());
        }
    }
}

TEST_CASE("enumeration handles the degenerate resemblances") {
    const UniverseParams up(6, 3);
    const SparseBinarySet same(6, {1, 4}), other(6, {1, 4});
    const SparseBinarySet left(6, {0, 1}), right(6, {4, 5});
    for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
        const auto ident = exact_collision_probability(same, other, up, scheme);
        for (std::uint32_t j = 0; j < 3; ++j)
            CHECK(ident.per_bin_probability(j) == Rational(1, 1));
        const auto disj = exact_collision_probability(left, right, up, scheme);
        for (std::uint32_t j = 0; j < 3; ++j)
            CHECK(disj.per_bin_probability(j) == Rational(0, 1));
    }
}

TEST_CASE("enumeration refuses unbounded configurations") {
    const UniverseParams big(10, 2);
    const SparseBinarySet s(10, {0, 1});
    CHECK_THROWS_AS(exact_collision_probability(s, s, big, Scheme::Rotation), ConfigError);
    const UniverseParams ok(4, 2);
    CHECK_THROWS_AS(
        exact_collision_probability(SparseBinarySet(4, {}), SparseBinarySet(4, {1}), ok,
                                    Scheme::Rotation),
        EmptyInputError);
}

TEST_CASE("reuse probability enumeration matches the closed forms") {
    CHECK(reuse_probability(1, Scheme::Rotation) == Rational(1, 1));
    CHECK(reuse_probability(1, Scheme::Bidirectional) == Rational(1, 1));
    CHECK(reuse_probability(2, Scheme::Rotation) == Rational(2, 3));
    CHECK(reuse_probability(2, Scheme::Bidirectional) == Rational(1, 2));
    for (std::uint32_t m = 2; m <= 8; ++m) {
        CHECK(reuse_probability(m, Scheme::Rotation) == Rational(2, m + 1));
        CHECK(reuse_probability(m, Scheme::Bidirectional) == Rational(3, 2 * (m + 1)));
        CHECK(reuse_probability_closed_form(m, Scheme::Rotation) ==
              Rational(2, m + 1).value_long());
        CHECK(reuse_probability_closed_form(m, Scheme::Bidirectional) ==
              Rational(3, 2 * (m + 1)).value_long());
    }
    CHECK_THROWS_AS(reuse_probability(0, Scheme::Rotation), ConfigError);
}

TEST_CASE("exhaustive empty-bin counts are exact") {
    const auto pmf = empty_bin_pmf_exhaustive(2, 4, 2);
    REQUIRE(pmf.size() == 3);
    CHECK(pmf[0] == Rational(2, 3));
    CHECK(pmf[1] == Rational(1, 3));
    CHECK(pmf[2] == Rational(0, 1));
    Rational total(0, 1);
    for (const auto& p : empty_bin_pmf_exhaustive(3, 6, 3)) total = total + p;
    CHECK(total == Rational(1, 1));
    CHECK_THROWS_AS(empty_bin_pmf_exhaustive(2, 24, 6), ConfigError);
}

TEST_CASE("canonical pairs realize the requested counts") {
    const PairStats ps(5, 4, 2, UniverseParams(32, 4));
    const auto [s1, s2] = canonical_pair(ps);
    CHECK(s1.size() == 5);
    CHECK(s2.size() == 4);
    CHECK(resemblance_exact(s1, s2) == ps.resemblance());
}

TEST_CASE("empirical mse is zero for degenerate pairs and reproducible") {
    const PairStats same(3, 3, 3, UniverseParams(24, 6));
    CHECK(empirical_mse(same, 300, Scheme::Rotation, 5).mse == 0.0);
    CHECK(empirical_mse(same, 300, Scheme::Bidirectional, 5).mse == 0.0);

    const PairStats disjoint(3, 3, 0, UniverseParams(24, 6));
    CHECK(empirical_mse(disjoint, 300, Scheme::Rotation, 5).mse == 0.0);

    const PairStats ps(6, 6, 3, UniverseParams(24, 6));
    const auto a = empirical_mse(ps, 500, Scheme::Bidirectional, 11);
    const auto b = empirical_mse(ps, 500, Scheme::Bidirectional, 11);
    const auto c = empirical_mse(ps, 500, Scheme::Bidirectional, 12);
    CHECK(a.mse == b.mse);
    CHECK(a.std_error == b.std_error);
    CHECK(a.trials == 500);
    CHECK(a.mse != c.mse);

    const auto paired = empirical_mse_paired(ps, 500, 11);
    CHECK(paired.bidirectional.mse == a.mse);
    CHECK_THROWS_AS(empirical_mse(ps, 0, Scheme::Rotation, 1), ConfigError);
}

TEST_CASE("schemes produce identical match patterns given one occupied bin") {
    // When the union occupies a single bin, every empty bin of either set
    // borrows from that bin, and the shared direction bits make both sets
    // walk the same way. Conditioned on m = 1 the distribution over per-bin
    // match patterns must be the same for the two schemes.
    const UniverseParams up(8, 4);
    const SparseBinarySet s1(8, {0, 1}), s2(8, {1});
    std::vector<std::uint32_t> perm(8);
    std::iota(perm.begin(), perm.end(), 0);

    std::map<std::uint32_t, std::int64_t> hist_rot, hist_bid;
    std::int64_t denom_rot = 0, denom_bid = 0;
    OphSketch o1, o2;
    DensifiedSketch d1, d2;
    DirectionBits bits = DirectionBits::from_bits({0, 0, 0, 0});
    const auto match_mask = [](const DensifiedSketch& a, const DensifiedSketch& b) {
        std::uint32_t mask = 0;
        for (std::uint32_t j = 0; j < a.bin_count(); ++j) mask |= (a[j] == b[j]) << j;
        return mask;
    };
    do {
        oph_sketch_into(s1, perm, up, o1);
        oph_sketch_into(s2, perm, up, o2);
        if (4 - simultaneous_empty_count(o1, o2) != 1) continue;
        densify_rotation_into(o1, up, d1);
        densify_rotation_into(o2, up, d2);
        ++hist_rot[match_mask(d1, d2)];
        ++denom_rot;
        for (std::uint32_t mask = 0; mask < 16; ++mask) {
            for (std::uint32_t j = 0; j < 4; ++j) bits.set(j, (mask >> j) & 1u);
            densify_bidirectional_into(o1, bits, up, d1);
            densify_bidirectional_into(o2, bits, up, d2);
            ++hist_bid[match_mask(d1, d2)];
            ++denom_bid;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    REQUIRE(denom_rot > 0);
    REQUIRE(denom_bid == denom_rot * 16);
    CHECK(hist_rot.size() == hist_bid.size());
    for (const auto& [pattern, count] : hist_rot) {
        REQUIRE(hist_bid.contains(pattern));
        CHECK(Rational(count, denom_rot) == Rational(hist_bid.at(pattern), denom_bid));
    }
}

TEST_CASE("match census buckets by m and tracks the conditional means") {
    const PairStats ps(6, 6, 3, UniverseParams(24, 6));
    const std::uint64_t trials = 20000;
    for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
        const auto census = lemma_census(ps, trials, scheme, 31);
        CHECK(census.k == 6);
        CHECK(census.total_trials == trials);
        std::uint64_t bucketed = 0;
        for (std::uint32_t m = 0; m <= 6; ++m) bucketed += census.bucket_trials(m);
        CHECK(bucketed == trials);
        CHECK(census.bucket_trials(0) == 0);

        for (std::uint32_t m = 1; m <= 6; ++m) {
            const auto& b = census.by_m[m];
            if (b.nn.count() < 500) continue;
            INFO("scheme=" << to_string(scheme) << " m=" << m
                           << " trials=" << b.nn.count());
            const auto statistic_ok = [&](const MeanAccumulator& acc, long double expected) {
                const long double se = acc.std_error();
                return se == 0.0L ? acc.mean() == expected
                                  : std::abs(acc.mean() - expected) <= 4.0L * se;
            };
            CHECK(statistic_ok(b.nn, b.expected_nn));
            CHECK(statistic_ok(b.ne, b.expected_ne));
            CHECK(statistic_ok(b.ee, b.expected_ee));
        }
    }
}

TEST_CASE("conditional closed forms specialize correctly at the edges") {
    const PairStats ps(6, 6, 3, UniverseParams(24, 6));
    const long double r = ps.resemblance().value_long();
    const long double rr = r * ps.leave_one_out_resemblance().value_long();
    const auto full = lemma_expected_values(ps, Scheme::Rotation, 6);
    CHECK(full.ne == 0.0L);
    CHECK(full.ee == 0.0L);
    CHECK(std::abs(full.nn - 30.0L * rr) < 1e-18L);

    // With m = 1 all borrows share the lone donor, so p = 1 for both schemes.
    const auto lone_rot = lemma_expected_values(ps, Scheme::Rotation, 1);
    const auto lone_bid = lemma_expected_values(ps, Scheme::Bidirectional, 1);
    CHECK(lone_rot.ee == lone_bid.ee);
    CHECK(std::abs(lone_rot.ee - 20.0L * r) < 1e-18L);
}
