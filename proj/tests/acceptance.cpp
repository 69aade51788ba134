// Acceptance suite: one criterion per numbered check, each printing a single
// PASS/FAIL verdict line. Run all with no arguments or a single one with
// --criterion N. Exit code 0 only if every selected criterion passes.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "doph/doph.hpp"

using namespace doph;

namespace {

constexpr std::uint64_t kMseSeed = 1009;
constexpr std::uint64_t kCensusSeed = 424242;
constexpr std::uint64_t kRetrievalSeed = 77;

constexpr double kMseStdErrors = 3.0;
constexpr long double kGapRelTol = 1e-10L;
constexpr double kCensusSigmas = 3.0;
constexpr long double kPmfSumTol = 1e-9L;
constexpr long double kPmfTinyTol = 1e-12L;
constexpr double kRecallTolerance = 0.01;  // one percentage point
constexpr double kSignTestAlpha = 0.05;

bool g_verbose = true;

void detail(const char* fmt, ...) {
    if (!g_verbose) return;
    va_list args;
    va_start(args, fmt);
    std::printf("  ");
    std::vprintf(fmt, args);
    std::printf("\n");
    va_end(args);
}

// --------------------------------------------------------------------------
// 1. Exhaustive per-bin collision probability equals resemblance.

bool criterion_collision() {
    struct Case {
        std::uint32_t universe, bins;
        std::vector<std::uint32_t> s1, s2;
    };
    const std::vector<Case> cases = {
        {4, 2, {0, 1}, {1, 2}},
        {4, 2, {0}, {0, 1, 2, 3}},
        {6, 3, {0, 2, 4}, {1, 2, 4}},
        {6, 2, {1, 3, 5}, {1, 3, 5}},
        {6, 3, {0, 1}, {4, 5}},
        {8, 4, {0, 3, 5}, {3, 5, 6}},
        {8, 2, {0, 1, 2, 3}, {1, 2, 3, 4}},
    };
    bool pass = true;
    for (const auto& c : cases) {
        const UniverseParams up(c.universe, c.bins);
        const SparseBinarySet s1(c.universe, c.s1), s2(c.universe, c.s2);
        const Rational want = resemblance_exact(s1, s2);
        for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
            const auto census = exact_collision_probability(s1, s2, up, scheme);
            bool exact = true;
            for (std::uint32_t j = 0; j < census.bin_count(); ++j)
                exact = exact && census.per_bin_probability(j) == want;
            detail("D=%u k=%u %s: resemblance %s, per-bin collision %s", c.universe, c.bins,
                   to_string(scheme), want.to_string().c_str(),
                   exact ? "equal in every bin" : "DIFFERS");
            pass = pass && exact;
        }
    }
    return pass;
}

// --------------------------------------------------------------------------
// 2. Donor reuse probabilities.

bool criterion_reuse() {
    bool pass = true;
    for (std::uint32_t m = 1; m <= 8; ++m) {
        const Rational want_rot = m == 1 ? Rational(1, 1) : Rational(2, m + 1);
        const Rational want_bid = m == 1 ? Rational(1, 1) : Rational(3, 2 * (m + 1));
        const Rational got_rot = reuse_probability(m, Scheme::Rotation);
        const Rational got_bid = reuse_probability(m, Scheme::Bidirectional);
        detail("m=%u: rotation %s (want %s), bidirectional %s (want %s)", m,
               got_rot.to_string().c_str(), want_rot.to_string().c_str(),
               got_bid.to_string().c_str(), want_bid.to_string().c_str());
        pass = pass && got_rot == want_rot && got_bid == want_bid;
    }
    return pass;
}

// --------------------------------------------------------------------------
// 3. Monte Carlo estimator MSE vs closed-form variance.

struct VarianceSetting {
    std::uint32_t f1, f2, a, universe, bins;
};

const std::vector<VarianceSetting>& variance_grid() {
    static const std::vector<VarianceSetting> grid = {
        {5, 5, 2, 4096, 64},        // union 8, an eighth of k
        {20, 20, 8, 4096, 64},      // union 32, half of k
        {80, 80, 32, 4096, 64},     // union 128, twice k
        {320, 320, 128, 4096, 64},  // union 512, eight times k
        {1280, 1280, 512, 16384, 256},
        {940, 948, 907, 65536, 256},
    };
    return grid;
}

bool criterion_mse() {
    const std::uint64_t trials = 100000;
    bool pass = true;
    for (const auto& s : variance_grid()) {
        const PairStats ps(s.f1, s.f2, s.a, UniverseParams(s.universe, s.bins));
        const PairedMse paired = empirical_mse_paired(ps, trials, kMseSeed);
        const double want_rot = variance_rotation(ps);
        const double want_bid = variance_bidirectional(ps);
        const auto z_rot = std::abs(paired.rotation.mse - want_rot) /
                           std::max(paired.rotation.std_error, 1e-300);
        const auto z_bid = std::abs(paired.bidirectional.mse - want_bid) /
                           std::max(paired.bidirectional.std_error, 1e-300);
        detail("union=%llu k=%u: rotation mse %.4e vs %.4e (|z|=%.2f), "
               "bidirectional %.4e vs %.4e (|z|=%.2f)",
               (unsigned long long)ps.union_size(), s.bins, paired.rotation.mse, want_rot, z_rot,
               paired.bidirectional.mse, want_bid, z_bid);
        pass = pass && z_rot <= kMseStdErrors && z_bid <= kMseStdErrors;
    }
    return pass;
}

// --------------------------------------------------------------------------
// 4. Variance improvement: closed form, sign, monotonicity in sparsity.

bool criterion_gap() {
    bool pass = true;
    for (const auto& s : variance_grid()) {
        const PairStats ps(s.f1, s.f2, s.a, UniverseParams(s.universe, s.bins));
        const auto vb = variance_breakdown(ps);
        const long double diff = vb.var_rotation - vb.var_bidirectional;
        const long double scale = std::max(std::abs(vb.gap_closed_form), 1e-300L);
        const long double rel = std::abs(diff - vb.gap_closed_form) / scale;
        detail("union=%llu k=%u: gap %.6Le, closed-form relative error %.2Le",
               (unsigned long long)ps.union_size(), s.bins, vb.gap_closed_form, rel);
        pass = pass && rel <= kGapRelTol && vb.gap_closed_form >= 0.0L;
    }

    // Same resemblance, shrinking union: the improvement must grow.
    long double prev = -1.0L;
    bool monotone = true;
    for (const std::uint32_t scale : {64u, 32u, 16u, 8u}) {
        const PairStats ps(2 * scale, 2 * scale, scale, UniverseParams(2048, 16));
        const long double gap = variance_breakdown(ps).gap_closed_form;
        monotone = monotone && gap > prev && gap >= 0.0L;
        prev = gap;
    }
    detail("fixed resemblance 1/3 at k=16: gap strictly grows as the union shrinks: %s",
           monotone ? "yes" : "NO");
    return pass && monotone;
}

// --------------------------------------------------------------------------
// 5. Conditional match-pair censuses.

bool criterion_census() {
    const std::uint64_t trials = 1000000;
    const std::uint64_t min_bucket = 100;
    struct Config {
        std::uint32_t f1, f2, a;
    };
    bool pass = true;
    for (const auto& c : std::vector<Config>{{6, 6, 3}, {9, 8, 4}}) {
        const PairStats ps(c.f1, c.f2, c.a, UniverseParams(24, 6));
        for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
            const auto census = lemma_census(ps, trials, scheme, kCensusSeed);
            long double worst = 0.0L;
            std::uint32_t buckets = 0;
            for (std::uint32_t m = 1; m <= census.k; ++m) {
                const auto& b = census.by_m[m];
                if (b.nn.count() < min_bucket) continue;
                ++buckets;
                const auto z = [](const MeanAccumulator& acc, long double expected) {
                    const long double se = acc.std_error();
                    if (se == 0.0L)
                        return acc.mean() == expected ? 0.0L : 1e9L;
                    return std::abs((acc.mean() - expected) / se);
                };
                worst = std::max({worst, z(b.nn, b.expected_nn), z(b.ne, b.expected_ne),
                                  z(b.ee, b.expected_ee)});
            }
            detail("pair (%u,%u,%u) %s: %u buckets with >=%llu trials, worst |z| = %.2Lf", c.f1,
                   c.f2, c.a, to_string(scheme), buckets, (unsigned long long)min_bucket, worst);
            pass = pass && buckets >= 2 && worst <= kCensusSigmas;
        }
    }
    return pass;
}

// --------------------------------------------------------------------------
// 6. Empty-bin distribution.

bool criterion_pmf() {
    bool pass = true;
    struct SumCase {
        std::uint32_t u, universe, bins;
    };
    const std::vector<SumCase> sums = {
        {4, 65536, 8},        {100, 65536, 64},      {300, 65536, 512},
        {1000, 65536, 256},   {1000, 65536, 512},    {10000, 1048576, 256},
        {10000, 1048576, 512},
    };
    for (const auto& c : sums) {
        const PairStats ps(c.u, c.u, c.u, UniverseParams(c.universe, c.bins));
        const auto pmf = empty_bin_pmf(ps);
        const long double err = std::abs(pmf.raw_sum() - 1.0L);
        detail("u=%u k=%u: |sum - 1| = %.2Le (%s evaluation)", c.u, c.bins, err,
               pmf.method() == PmfMethod::AlternatingSum ? "alternating" : "recursive");
        pass = pass && err <= kPmfSumTol;
    }

    struct TinyCase {
        std::uint32_t u, universe, bins;
    };
    for (const auto& c : std::vector<TinyCase>{{2, 4, 2}, {3, 6, 2}, {2, 6, 3}, {3, 6, 3}}) {
        const auto exact = empty_bin_pmf_exhaustive(c.u, c.universe, c.bins);
        const PairStats ps(c.u, c.u, c.u, UniverseParams(c.universe, c.bins));
        const auto pmf = empty_bin_pmf(ps);
        long double worst = 0.0L;
        for (std::uint32_t i = 0; i <= c.bins; ++i)
            worst = std::max(worst, std::abs(pmf[i] - exact[i].value_long()));
        detail("u=%u D=%u k=%u: max deviation from enumeration %.2Le", c.u, c.universe, c.bins,
               worst);
        pass = pass && worst <= kPmfTinyTol;
    }
    return pass;
}

// --------------------------------------------------------------------------
// 7. Retrieval: equal recall, fewer retrieved points for the bidirectional
// scheme, paired across runs.

bool criterion_retrieval() {
    CorpusSpec spec;
    spec.n_train = 10000;
    spec.n_query = 1000;
    spec.universe_size = 47236;
    spec.mean_nnz = 100;
    spec.planted_per_query = 3;
    spec.planted_resemblance = 0.85;
    spec.related_per_query = 7;
    spec.related_resemblance = 0.65;
    spec.seed = kRetrievalSeed;
    const GeneratedCorpus corpus = generate_corpus(spec);
    const auto gold = compute_gold(corpus.train, corpus.queries, 10);

    const LshParams params(4, 32);
    const std::uint32_t runs = 10;
    double recall_rot = 0.0, recall_bid = 0.0;
    double cand_rot = 0.0, cand_bid = 0.0;
    std::uint64_t wins = 0, losses = 0;
    for (std::uint32_t run = 0; run < runs; ++run) {
        RecallSummary per_scheme[2];
        for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
            LshFamilyConfig cfg;
            cfg.universe_size = spec.universe_size;
            cfg.scheme = scheme;
            cfg.perm_seed = derive_seed(kRetrievalSeed, run, 0);
            cfg.bits_seed = derive_seed(kRetrievalSeed, run, 1);
            const LshIndex idx = build_index(corpus.train, params, cfg);
            per_scheme[static_cast<int>(scheme)] =
                evaluate_recall(idx, corpus.train, corpus.queries, 10, &gold);
        }
        const auto& rot = per_scheme[0];
        const auto& bid = per_scheme[1];
        detail("run %u: recall %.4f vs %.4f, candidates %.1f vs %.1f, bucket entries %.1f vs %.1f",
               run, rot.mean_recall, bid.mean_recall, rot.mean_candidates, bid.mean_candidates,
               rot.mean_scanned, bid.mean_scanned);
        recall_rot += rot.mean_recall;
        recall_bid += bid.mean_recall;
        cand_rot += rot.mean_candidates;
        cand_bid += bid.mean_candidates;
        if (bid.mean_candidates < rot.mean_candidates) {
            ++wins;
        } else if (bid.mean_candidates > rot.mean_candidates) {
            ++losses;
        }
    }
    recall_rot /= runs;
    recall_bid /= runs;
    cand_rot /= runs;
    cand_bid /= runs;
    const double p = sign_test_p_value(wins, losses);
    detail("means over %u runs: recall %.4f vs %.4f (diff %.4f), candidates %.1f vs %.1f, "
           "sign test wins %llu/%llu, one-sided p = %.4g",
           runs, recall_rot, recall_bid, std::abs(recall_rot - recall_bid), cand_rot, cand_bid,
           (unsigned long long)wins, (unsigned long long)(wins + losses), p);
    const bool recall_ok = std::abs(recall_rot - recall_bid) <= kRecallTolerance;
    const bool fewer = cand_bid < cand_rot && p < kSignTestAlpha;
    return recall_ok && fewer;
}

// --------------------------------------------------------------------------
// 8. Cost counters.

bool criterion_cost() {
    bool pass = true;
    const std::uint32_t d = 200;
    RandomEngine rng(404);
    const std::uint32_t universe = 1u << 20;
    const SparseBinarySet s(universe, sample_distinct(d, universe, rng));

    for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
        for (const std::uint32_t k : {256u, 512u}) {
            HashCostCounters counters{};
            const HashFamily fam(UniverseParams(universe, k), scheme, 7, 8);
            fam.sketch(s, &counters);
            detail("%s k=%u: %llu permutation lookups, %llu bin inits, %llu densify visits",
                   to_string(scheme), k, (unsigned long long)counters.permutation_lookups,
                   (unsigned long long)counters.oph_bin_inits,
                   (unsigned long long)counters.densify_bin_visits);
            pass = pass && counters.densify_bin_visits <= 2ull * k;
            pass = pass && counters.permutation_lookups == s.size();
        }
    }

    // Doubling k must double only the bin-scan work.
    HashCostCounters c256{}, c512{};
    HashFamily f256(UniverseParams(universe, 256), Scheme::Bidirectional, 7, 8);
    HashFamily f512(UniverseParams(universe, 512), Scheme::Bidirectional, 7, 8);
    f256.sketch(s, &c256);
    f512.sketch(s, &c512);
    const double ratio = static_cast<double>(c512.total_bin_ops()) /
                         static_cast<double>(c256.total_bin_ops());
    detail("k 256 -> 512: bin-op ratio %.3f, permutation lookups %llu -> %llu", ratio,
           (unsigned long long)c256.permutation_lookups,
           (unsigned long long)c512.permutation_lookups);
    pass = pass && c512.permutation_lookups == c256.permutation_lookups;
    pass = pass && ratio > 1.9 && ratio < 2.1;
    return pass;
}

struct Criterion {
    int id;
    const char* name;
    bool (*run)();
};

const Criterion kCriteria[] = {
    {1, "per-bin collision probability equals resemblance (exhaustive)", criterion_collision},
    {2, "donor reuse probabilities match their closed forms (exhaustive)", criterion_reuse},
    {3, "empirical estimator mse matches closed-form variance (3 standard errors)",
     criterion_mse},
    {4, "variance improvement matches its closed form and grows with sparsity", criterion_gap},
    {5, "conditional match-pair censuses match closed forms (3 sigma)", criterion_census},
    {6, "empty-bin distribution sums to one and matches tiny enumerations", criterion_pmf},
    {7, "retrieval keeps recall while retrieving fewer candidates", criterion_retrieval},
    {8, "densification stays within two bin scans per vector", criterion_cost},
};

}  // namespace

int main(int argc, char** argv) {
    int selected = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            selected = std::atoi(argv[++i]);
        } else if (std::strcmp(argv[i], "--quiet") == 0) {
            g_verbose = false;
        } else {
            std::fprintf(stderr, "usage: %s [--criterion N] [--quiet]\n", argv[0]);
            return 2;
        }
    }

    bool all_pass = true;
    for (const auto& c : kCriteria) {
        if (selected != 0 && c.id != selected) continue;
        const bool pass = c.run();
        std::printf("criterion %d [%s]: %s\n", c.id, c.name, pass ? "PASS" : "FAIL");
        all_pass = all_pass && pass;
    }
    return all_pass ? 0 : 1;
}
