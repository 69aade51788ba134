#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "doph/doph.hpp"

namespace {

using namespace doph;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerifyFailed = 2;
constexpr int kExitIo = 3;

std::string format(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
}

std::string fmt_double(double v) { return format("%.10g", v); }

/// Writes to --out when given, stdout otherwise.
class OutputTarget {
  public:
    explicit OutputTarget(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
            if (!*file_) throw IoError("cannot open " + path + " for writing");
            path_ = path;
        }
    }

    std::ostream& stream() { return file_ ? *file_ : std::cout; }

    void finish() {
        if (!file_) return;
        file_->flush();
        if (!*file_) throw IoError("write failed for " + path_);
    }

  private:
    std::unique_ptr<std::ofstream> file_;
    std::string path_;
};

std::vector<Scheme> parse_schemes(const std::string& name) {
    if (name == "rotation") return {Scheme::Rotation};
    if (name == "bidirectional") return {Scheme::Bidirectional};
    if (name == "both") return {Scheme::Rotation, Scheme::Bidirectional};
    throw ConfigError("unknown scheme: " + name + " (expected rotation|bidirectional|both)");
}

struct PairArg {
    std::uint32_t f1 = 0, f2 = 0, shared = 0;
};

PairArg parse_pair_arg(const std::string& text) {
    PairArg p;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%u:%u:%u%c", &p.f1, &p.f2, &p.shared, &extra) != 3)
        throw ConfigError("bad --pair value '" + text + "' (expected f1:f2:a)");
    return p;
}

// ---------------------------------------------------------------------------
// verify

struct CheckTally {
    int passed = 0;
    int failed = 0;
    int skipped = 0;

    void record(std::ostream& out, const std::string& name, const std::string& expected,
                const std::string& observed, bool pass) {
        out << (pass ? "PASS " : "FAIL ") << name << ": expected " << expected << ", observed "
            << observed << "\n";
        (pass ? passed : failed) += 1;
    }

    void skip(std::ostream& out, const std::string& name, const std::string& why) {
        out << "SKIP " << name << ": " << why << "\n";
        ++skipped;
    }
};

struct VerifyOptions {
    std::uint64_t seed = 1;
    std::uint64_t census_trials = 200000;
    std::uint64_t mse_trials = 20000;
    bool bad_offset = false;
    std::string out_path;
};

void verify_collisions(std::ostream& out, CheckTally& tally, bool bad_offset) {
    struct Case {
        std::uint32_t universe, bins;
        std::vector<std::uint32_t> s1, s2;
    };
    const std::vector<Case> cases = {
        {4, 2, {0, 1}, {1, 2}},    {4, 2, {0}, {0, 1, 2, 3}}, {6, 3, {0, 2, 4}, {1, 2, 4}},
        {6, 2, {1, 3, 5}, {1, 3, 5}}, {6, 3, {0, 1}, {4, 5}},    {8, 4, {0, 3, 5}, {3, 5, 6}},
        {8, 2, {0, 1, 2, 3}, {1, 2, 3, 4}},
    };
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const auto& c = cases[ci];
        const UniverseParams up(c.universe, c.bins);
        const SparseBinarySet s1(c.universe, c.s1), s2(c.universe, c.s2);
        const Rational want = resemblance_exact(s1, s2);
        const std::uint64_t offset = bad_offset ? 0 : up.offset_constant();
        for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
            const auto census = detail::exact_collision_census(s1, s2, up, scheme, offset);
            bool all_equal = true;
            Rational worst = want;
            for (std::uint32_t j = 0; j < census.bin_count(); ++j) {
                const Rational got = census.per_bin_probability(j);
                if (got != want) {
                    all_equal = false;
                    worst = got;
                }
            }
            tally.record(out,
                         format("collision pair%zu %s (D=%u k=%u)", ci, to_string(scheme),
                                c.universe, c.bins),
                         want.to_string() + " per bin",
                         all_equal ? want.to_string() + " in every bin"
                                   : "a bin at " + worst.to_string(),
                         all_equal);
        }
    }
}

void verify_reuse(std::ostream& out, CheckTally& tally) {
    for (std::uint32_t m = 1; m <= 8; ++m) {
        const Rational want_rot = m == 1 ? Rational(1, 1) : Rational(2, m + 1);
        const Rational want_bid = m == 1 ? Rational(1, 1) : Rational(3, 2 * (m + 1));
        const Rational got_rot = reuse_probability(m, Scheme::Rotation);
        const Rational got_bid = reuse_probability(m, Scheme::Bidirectional);
        tally.record(out, format("reuse probability m=%u rotation", m), want_rot.to_string(),
                     got_rot.to_string(), got_rot == want_rot);
        tally.record(out, format("reuse probability m=%u bidirectional", m), want_bid.to_string(),
                     got_bid.to_string(), got_bid == want_bid);
    }
}

void verify_pmf(std::ostream& out, CheckTally& tally) {
    struct Case {
        std::uint32_t u, universe, bins;
    };
    for (const auto& c : std::vector<Case>{{2, 4, 2}, {3, 6, 3}, {3, 4, 2}}) {
        const auto exact = empty_bin_pmf_exhaustive(c.u, c.universe, c.bins);
        const PairStats ps(c.u, c.u, c.u, UniverseParams(c.universe, c.bins));
        const auto pmf = empty_bin_pmf(ps);
        long double worst = 0.0L;
        for (std::uint32_t i = 0; i <= c.bins; ++i) {
            const long double want = i < c.bins ? exact[i].value_long() : 0.0L;
            const long double got = i < c.bins ? pmf[i] : 0.0L;
            worst = std::max(worst, std::abs(got - want));
        }
        tally.record(out, format("empty-bin pmf vs exhaustive (u=%u D=%u k=%u)", c.u, c.universe,
                                 c.bins),
                     "max abs error <= 1e-12", format("%.3Lg", worst), worst <= 1e-12L);
    }
}

void verify_gap_identity(std::ostream& out, CheckTally& tally) {
    struct Case {
        std::uint32_t f1, f2, a, universe, bins;
    };
    const std::vector<Case> cases = {
        {16, 16, 8, 1024, 16},  {32, 32, 16, 1024, 16}, {64, 64, 32, 1024, 16},
        {84, 84, 42, 1024, 16}, {24, 24, 12, 4096, 64}, {96, 96, 48, 4096, 64},
    };
    for (const auto& c : cases) {
        const PairStats ps(c.f1, c.f2, c.a, UniverseParams(c.universe, c.bins));
        const auto vb = variance_breakdown(ps);
        const long double diff = vb.var_rotation - vb.var_bidirectional;
        const long double scale = std::max(std::abs(vb.gap_closed_form), 1e-30L);
        const long double rel = std::abs(diff - vb.gap_closed_form) / scale;
        const bool pass = rel <= 1e-10L && vb.gap_closed_form >= 0.0L;
        tally.record(out,
                     format("variance gap identity (f1=%u f2=%u a=%u k=%u)", c.f1, c.f2, c.a,
                            c.bins),
                     "closed form matches breakdown within 1e-10 relative, gap >= 0",
                     format("relative error %.3Lg, gap %.6Lg", rel, vb.gap_closed_form), pass);
    }
}

void verify_census(std::ostream& out, CheckTally& tally, std::uint64_t trials,
                   std::uint64_t seed) {
    const PairStats ps(6, 6, 3, UniverseParams(24, 6));
    for (const auto scheme : {Scheme::Rotation, Scheme::Bidirectional}) {
        const auto census = lemma_census(ps, trials, scheme, seed);
        for (std::uint32_t m = 1; m <= ps.bin_count(); ++m) {
            const auto& bucket = census.by_m[m];
            if (bucket.nn.count() < 100) {
                if (bucket.nn.count() > 0)
                    tally.skip(out, format("match census m=%u %s", m, to_string(scheme)),
                               format("only %llu trials in bucket",
                                      (unsigned long long)bucket.nn.count()));
                continue;
            }
            const auto z = [](const MeanAccumulator& acc, long double expected) {
                const long double se = acc.std_error();
                if (se == 0.0L) return std::abs((long double)(acc.mean() - expected)) > 0 ? 1e9L : 0.0L;
                return std::abs((acc.mean() - expected) / se);
            };
            const long double worst =
                std::max({z(bucket.nn, bucket.expected_nn), z(bucket.ne, bucket.expected_ne),
                          z(bucket.ee, bucket.expected_ee)});
            tally.record(out, format("match census m=%u %s", m, to_string(scheme)),
                         "all three pair-type means within 4 standard errors",
                         format("max |z| = %.3Lf over %llu trials", worst,
                                (unsigned long long)bucket.nn.count()),
                         worst <= 4.0L);
        }
    }
}

void verify_mse(std::ostream& out, CheckTally& tally, std::uint64_t trials, std::uint64_t seed) {
    struct Case {
        std::uint32_t f1, f2, a, universe, bins;
    };
    for (const auto& c : std::vector<Case>{{24, 24, 12, 256, 16}, {12, 12, 8, 128, 8}}) {
        const PairStats ps(c.f1, c.f2, c.a, UniverseParams(c.universe, c.bins));
        const auto paired = empirical_mse_paired(ps, trials, seed);
        const double want_rot = variance_rotation(ps);
        const double want_bid = variance_bidirectional(ps);
        const auto check = [&](const MseEstimate& est, double want, Scheme scheme) {
            const double z = est.std_error > 0 ? std::abs(est.mse - want) / est.std_error : 0.0;
            tally.record(out,
                         format("estimator mse %s (f1=%u f2=%u a=%u k=%u)", to_string(scheme),
                                c.f1, c.f2, c.a, c.bins),
                         "empirical mse within 4 standard errors of closed form",
                         format("|z| = %.3f (mse %.6g vs %.6g)", z, est.mse, want), z <= 4.0);
        };
        check(paired.rotation, want_rot, Scheme::Rotation);
        check(paired.bidirectional, want_bid, Scheme::Bidirectional);
    }
}

int run_verify(const VerifyOptions& opt) {
    OutputTarget target(opt.out_path);
    std::ostream& out = target.stream();
    out << "# verification report\n";
    out << "# seed=" << opt.seed << " census_trials=" << opt.census_trials
        << " mse_trials=" << opt.mse_trials << " bad_offset=" << (opt.bad_offset ? 1 : 0) << "\n";
    CheckTally tally;
    verify_collisions(out, tally, opt.bad_offset);
    verify_reuse(out, tally);
    verify_pmf(out, tally);
    verify_gap_identity(out, tally);
    verify_census(out, tally, opt.census_trials, opt.seed);
    verify_mse(out, tally, opt.mse_trials, opt.seed);
    out << "RESULT: " << tally.passed << " passed, " << tally.failed << " failed, "
        << tally.skipped << " skipped\n";
    target.finish();
    return tally.failed == 0 ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------------------
// mse

struct MseOptions {
    std::vector<std::string> pair_args;
    std::vector<std::uint32_t> k_grid = {64, 128, 256, 512};
    std::uint32_t universe = 65536;
    std::uint64_t trials = 2000;
    std::string scheme = "both";
    std::uint64_t seed = 1;
    std::string out_path;
};

int run_mse(const MseOptions& opt) {
    std::vector<PairArg> pairs;
    if (opt.pair_args.empty()) {
        pairs = {{4995, 4995, 4553}, {940, 948, 907}, {205, 214, 193}};
    } else {
        for (const auto& text : opt.pair_args) pairs.push_back(parse_pair_arg(text));
    }
    if (opt.k_grid.empty()) throw ConfigError("--k grid must be nonempty");
    const auto schemes = parse_schemes(opt.scheme);

    OutputTarget target(opt.out_path);
    std::ostream& out = target.stream();
    out << "# mse experiment: universe=" << opt.universe << " trials=" << opt.trials
        << " seed=" << opt.seed << "\n";
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
        out << "# pair p" << pi << ": f1=" << pairs[pi].f1 << " f2=" << pairs[pi].f2
            << " a=" << pairs[pi].shared << "\n";
    }
    for (const auto k : opt.k_grid) {
        const UniverseParams up(opt.universe, k);
        if (up.was_padded())
            out << "# note: universe padded from " << up.requested_universe_size() << " to "
                << up.universe_size() << " for k=" << k << "\n";
    }
    out << "pair_id,k,scheme,empirical_mse,theoretical_var,trials,seed,std_error,f1,f2,a,D\n";

    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
        const auto& p = pairs[pi];
        for (const auto k : opt.k_grid) {
            const PairStats ps(p.f1, p.f2, p.shared, UniverseParams(opt.universe, k));
            const std::uint64_t cell_seed = derive_seed(opt.seed, pi, k);
            const PairedMse paired = empirical_mse_paired(ps, opt.trials, cell_seed);
            for (const auto scheme : schemes) {
                const MseEstimate& est =
                    scheme == Scheme::Rotation ? paired.rotation : paired.bidirectional;
                const double theo = scheme == Scheme::Rotation ? variance_rotation(ps)
                                                               : variance_bidirectional(ps);
                out << "p" << pi << "," << k << "," << to_string(scheme) << ","
                    << fmt_double(est.mse) << "," << fmt_double(theo) << "," << est.trials << ","
                    << opt.seed << "," << fmt_double(est.std_error) << "," << p.f1 << "," << p.f2
                    << "," << p.shared << "," << ps.universe_size() << "\n";
            }
        }
    }
    target.finish();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// retrieval corpus helpers

CorpusSpec corpus_spec_from(std::uint32_t n_train, std::uint32_t n_query, std::uint32_t universe,
                            std::uint32_t nnz, std::uint32_t planted, double resemblance,
                            std::uint32_t related, double related_resemblance,
                            std::uint64_t seed) {
    CorpusSpec spec;
    spec.n_train = n_train;
    spec.n_query = n_query;
    spec.universe_size = universe;
    spec.mean_nnz = nnz;
    spec.planted_per_query = planted;
    spec.planted_resemblance = resemblance;
    spec.related_per_query = related;
    spec.related_resemblance = related_resemblance;
    spec.seed = seed;
    return spec;
}

std::uint64_t corpus_digest(const std::vector<SparseBinarySet>& train,
                            const std::vector<SparseBinarySet>& queries, std::uint32_t gold_n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    mix(gold_n);
    for (const auto* part : {&train, &queries}) {
        mix(part->size());
        for (const auto& s : *part) {
            mix(s.universe_size());
            mix(s.size());
            for (const auto idx : s.indices()) mix(idx);
        }
    }
    return h;
}

using GoldTable = std::vector<std::vector<std::uint32_t>>;

std::optional<GoldTable> load_gold_cache(const std::string& path, std::uint64_t digest) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    std::uint64_t magic = 0, stored = 0, rows = 0;
    f.read(reinterpret_cast<char*>(&magic), 8);
    f.read(reinterpret_cast<char*>(&stored), 8);
    f.read(reinterpret_cast<char*>(&rows), 8);
    if (!f || magic != 0x444f474c44415348ULL || stored != digest) return std::nullopt;
    GoldTable gold(rows);
    for (auto& row : gold) {
        std::uint64_t n = 0;
        f.read(reinterpret_cast<char*>(&n), 8);
        if (!f || n > 1000000) return std::nullopt;
        row.resize(n);
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(n * 4));
        if (!f) return std::nullopt;
    }
    return gold;
}

void save_gold_cache(const std::string& path, std::uint64_t digest, const GoldTable& gold) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open gold cache " + path + " for writing");
    const std::uint64_t magic = 0x444f474c44415348ULL;
    const std::uint64_t rows = gold.size();
    f.write(reinterpret_cast<const char*>(&magic), 8);
    f.write(reinterpret_cast<const char*>(&digest), 8);
    f.write(reinterpret_cast<const char*>(&rows), 8);
    for (const auto& row : gold) {
        const std::uint64_t n = row.size();
        f.write(reinterpret_cast<const char*>(&n), 8);
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(n * 4));
    }
    if (!f) throw IoError("write failed for gold cache " + path);
}

// ---------------------------------------------------------------------------
// retrieve

struct RetrieveOptions {
    std::uint32_t n_train = 10000;
    std::uint32_t n_query = 1000;
    std::uint32_t universe = 47236;
    std::uint32_t nnz = 100;
    std::uint32_t planted = 3;
    double resemblance = 0.85;
    std::uint32_t related = 5;
    double related_resemblance = 0.35;
    std::uint32_t hashes_per_table = 2;
    std::vector<std::uint32_t> l_grid = {4, 8, 16, 32};
    std::uint32_t runs = 10;
    std::uint32_t gold_n = 10;
    std::string scheme = "both";
    std::uint64_t seed = 1;
    std::string gold_cache;
    std::string out_path;
};

int run_retrieve(const RetrieveOptions& opt) {
    if (opt.l_grid.empty()) throw ConfigError("--L grid must be nonempty");
    if (opt.runs == 0) throw ConfigError("--runs must be positive");
    const auto schemes = parse_schemes(opt.scheme);

    const CorpusSpec spec =
        corpus_spec_from(opt.n_train, opt.n_query, opt.universe, opt.nnz, opt.planted,
                         opt.resemblance, opt.related, opt.related_resemblance, opt.seed);
    const GeneratedCorpus corpus = generate_corpus(spec);

    OutputTarget target(opt.out_path);
    std::ostream& out = target.stream();
    out << "# retrieval experiment: n_train=" << opt.n_train << " n_query=" << opt.n_query
        << " D=" << opt.universe << " nnz=" << opt.nnz << " planted=" << opt.planted
        << " resemblance=" << fmt_double(opt.resemblance) << " related=" << opt.related
        << " related_resemblance=" << fmt_double(opt.related_resemblance)
        << " K=" << opt.hashes_per_table << " runs=" << opt.runs << " seed=" << opt.seed << "\n";
    for (const auto L : opt.l_grid) {
        const UniverseParams up(opt.universe, opt.hashes_per_table * L);
        if (up.was_padded())
            out << "# note: universe padded from " << up.requested_universe_size() << " to "
                << up.universe_size() << " for K*L=" << opt.hashes_per_table * L << "\n";
    }

    GoldTable gold;
    const std::uint64_t digest = corpus_digest(corpus.train, corpus.queries, opt.gold_n);
    bool cached = false;
    if (!opt.gold_cache.empty()) {
        if (auto loaded = load_gold_cache(opt.gold_cache, digest)) {
            gold = std::move(*loaded);
            cached = true;
        }
    }
    if (gold.empty()) gold = compute_gold(corpus.train, corpus.queries, opt.gold_n);
    if (!opt.gold_cache.empty() && !cached) save_gold_cache(opt.gold_cache, digest, gold);
    out << "# gold standard: exact top-" << opt.gold_n << "\n";

    out << "dataset,scheme,K,L,run,mean_recall_at_10,mean_candidates_scanned,mean_bucket_entries,"
           "seed\n";
    const std::string dataset = format("synthetic-D%u-nnz%u", opt.universe, opt.nnz);
    for (const auto scheme : schemes) {
        for (const auto L : opt.l_grid) {
            for (std::uint32_t run = 0; run < opt.runs; ++run) {
                LshFamilyConfig cfg;
                cfg.universe_size = opt.universe;
                cfg.scheme = scheme;
                cfg.perm_seed = derive_seed(opt.seed, run, 0);
                cfg.bits_seed = derive_seed(opt.seed, run, 1);
                const LshIndex idx =
                    build_index(corpus.train, LshParams(opt.hashes_per_table, L), cfg);
                const RecallSummary summary =
                    evaluate_recall(idx, corpus.train, corpus.queries, opt.gold_n, &gold);
                out << dataset << "," << to_string(scheme) << "," << opt.hashes_per_table << ","
                    << L << "," << run << "," << fmt_double(summary.mean_recall) << ","
                    << fmt_double(summary.mean_candidates) << ","
                    << fmt_double(summary.mean_scanned) << "," << opt.seed << "\n";
            }
        }
    }
    target.finish();
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gen-corpus

struct GenCorpusOptions {
    std::uint32_t n_train = 10000;
    std::uint32_t n_query = 1000;
    std::uint32_t universe = 47236;
    std::uint32_t nnz = 100;
    std::uint32_t planted = 3;
    double resemblance = 0.85;
    std::uint32_t related = 0;
    double related_resemblance = 0.35;
    std::uint64_t seed = 1;
    std::string format_name = "indices";
    std::string out_prefix;
};

int run_gen_corpus(const GenCorpusOptions& opt) {
    const CorpusFormat fmt = parse_corpus_format(opt.format_name);
    const CorpusSpec spec =
        corpus_spec_from(opt.n_train, opt.n_query, opt.universe, opt.nnz, opt.planted,
                         opt.resemblance, opt.related, opt.related_resemblance, opt.seed);
    const GeneratedCorpus corpus = generate_corpus(spec);
    save_corpus(opt.out_prefix + ".train.txt", corpus.train, fmt);
    save_corpus(opt.out_prefix + ".queries.txt", corpus.queries, fmt);
    std::ofstream planted(opt.out_prefix + ".planted.txt", std::ios::trunc);
    if (!planted) throw IoError("cannot open " + opt.out_prefix + ".planted.txt for writing");
    for (std::size_t qi = 0; qi < corpus.planted_ids.size(); ++qi) {
        planted << qi << ":";
        for (const auto id : corpus.planted_ids[qi]) planted << ' ' << id;
        planted << "\n";
    }
    if (!planted) throw IoError("write failed for " + opt.out_prefix + ".planted.txt");
    std::cout << "wrote " << corpus.train.size() << " training and " << corpus.queries.size()
              << " query vectors under prefix " << opt.out_prefix << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// index / query

struct IndexOptions {
    std::string in_path;
    std::string format_name = "indices";
    std::uint32_t universe = 0;  // 0 = auto
    std::uint32_t hashes_per_table = 2;
    std::uint32_t table_count = 8;
    std::string scheme = "rotation";
    bool independent_tables = false;
    std::uint64_t seed = 1;
    std::string out_path;
};

int run_index(const IndexOptions& opt) {
    const auto schemes = parse_schemes(opt.scheme);
    if (schemes.size() != 1) throw ConfigError("index: pick one scheme, not 'both'");
    const CorpusFormat fmt = parse_corpus_format(opt.format_name);
    const std::uint32_t total = opt.hashes_per_table * opt.table_count;
    const LoadedCorpus corpus = load_corpus(opt.in_path, fmt, opt.universe, total);
    LshFamilyConfig cfg;
    cfg.universe_size = corpus.universe_size;
    cfg.scheme = schemes[0];
    cfg.perm_seed = derive_seed(opt.seed, 0);
    cfg.bits_seed = derive_seed(opt.seed, 1);
    cfg.independent_tables = opt.independent_tables;
    const LshIndex idx =
        build_index(corpus.sets, LshParams(opt.hashes_per_table, opt.table_count), cfg);
    idx.save(opt.out_path);
    if (corpus.auto_sized)
        std::cout << "# note: universe auto-sized to " << corpus.universe_size << "\n";
    const UniverseParams up(corpus.universe_size, total);
    if (up.was_padded())
        std::cout << "# note: universe padded from " << up.requested_universe_size() << " to "
                  << up.universe_size() << " for K*L=" << total << "\n";
    if (idx.skipped_empty_count() > 0)
        std::cerr << "warning: skipped " << idx.skipped_empty_count() << " empty corpus items\n";
    std::cout << "indexed " << idx.indexed_count() << " items into " << opt.table_count
              << " tables at " << opt.out_path << "\n";
    return kExitOk;
}

struct QueryOptions {
    std::string index_path;
    std::string queries_path;
    std::string train_path;
    std::string format_name = "indices";
    std::uint32_t gold_n = 10;
    std::string out_path;
};

int run_query(const QueryOptions& opt) {
    const CorpusFormat fmt = parse_corpus_format(opt.format_name);
    const LshIndex idx = load_index(opt.index_path);
    const std::uint32_t universe = idx.family_config().universe_size;
    const LoadedCorpus queries = load_corpus(opt.queries_path, fmt, universe);

    GoldTable gold;
    if (!opt.train_path.empty()) {
        const LoadedCorpus train = load_corpus(opt.train_path, fmt, universe);
        gold = compute_gold(train.sets, queries.sets, opt.gold_n);
    }

    OutputTarget target(opt.out_path);
    std::ostream& out = target.stream();
    out << "# query run: index=" << opt.index_path << " universe=" << universe
        << " K=" << idx.lsh_params().hashes_per_table << " L=" << idx.lsh_params().table_count
        << " scheme=" << to_string(idx.family_config().scheme) << "\n";
    out << (gold.empty() ? "query_id,candidates,scanned\n"
                         : "query_id,candidates,scanned,recall_at_10\n");
    for (std::size_t qi = 0; qi < queries.sets.size(); ++qi) {
        const RetrievalResult res = idx.query(queries.sets[qi]);
        out << qi << "," << res.candidates.size() << "," << res.scanned;
        if (!gold.empty()) {
            std::size_t hits = 0;
            for (const auto id : gold[qi])
                hits += std::binary_search(res.candidates.begin(), res.candidates.end(), id);
            const double recall =
                gold[qi].empty() ? 0.0
                                 : static_cast<double>(hits) / static_cast<double>(gold[qi].size());
            out << "," << fmt_double(recall);
        }
        out << "\n";
    }
    target.finish();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"densified one permutation hashing: verification and benchmarks"};
    app.require_subcommand(1);

    VerifyOptions vo;
    auto* verify = app.add_subcommand("verify", "run enumeration and sampling checks");
    verify->add_option("--seed", vo.seed, "master seed for sampled checks");
    verify->add_option("--trials", vo.census_trials, "trials for the match census");
    verify->add_option("--mse-trials", vo.mse_trials, "trials for the mse spot check");
    verify->add_flag("--bad-offset", vo.bad_offset,
                     "fault injection: densify with a zero offset constant");
    verify->add_option("--out", vo.out_path, "write the report to a file instead of stdout");

    MseOptions mo;
    auto* mse = app.add_subcommand("mse", "empirical vs closed-form estimator mse (CSV)");
    mse->add_option("--pair", mo.pair_args, "pair as f1:f2:a (repeatable)");
    mse->add_option("--k", mo.k_grid, "bin counts to sweep");
    mse->add_option("--D", mo.universe, "universe size");
    mse->add_option("--trials", mo.trials, "hash families per cell");
    mse->add_option("--scheme", mo.scheme, "rotation|bidirectional|both");
    mse->add_option("--seed", mo.seed, "master seed");
    mse->add_option("--out", mo.out_path, "CSV path (stdout if omitted)");

    RetrieveOptions ro;
    auto* retrieve = app.add_subcommand("retrieve", "synthetic retrieval experiment (CSV)");
    retrieve->add_option("--n-train", ro.n_train, "training vectors");
    retrieve->add_option("--n-query", ro.n_query, "query vectors");
    retrieve->add_option("--D", ro.universe, "universe size");
    retrieve->add_option("--nnz", ro.nnz, "mean nonzeros per vector");
    retrieve->add_option("--planted", ro.planted, "planted near-duplicates per query");
    retrieve->add_option("--resemblance", ro.resemblance, "planted target resemblance");
    retrieve->add_option("--related", ro.related, "moderately related items per query");
    retrieve->add_option("--related-resemblance", ro.related_resemblance,
                         "related-tier target resemblance");
    retrieve->add_option("--K", ro.hashes_per_table, "hash values per table key");
    retrieve->add_option("--L", ro.l_grid, "table counts to sweep");
    retrieve->add_option("--runs", ro.runs, "independent repetitions");
    retrieve->add_option("--gold-n", ro.gold_n, "gold standard depth");
    retrieve->add_option("--scheme", ro.scheme, "rotation|bidirectional|both");
    retrieve->add_option("--seed", ro.seed, "master seed");
    retrieve->add_option("--gold-cache", ro.gold_cache, "cache file for the exact gold standard");
    retrieve->add_option("--out", ro.out_path, "CSV path (stdout if omitted)");

    GenCorpusOptions go;
    auto* gen = app.add_subcommand("gen-corpus", "write a synthetic corpus to disk");
    gen->add_option("--n-train", go.n_train, "training vectors");
    gen->add_option("--n-query", go.n_query, "query vectors");
    gen->add_option("--D", go.universe, "universe size");
    gen->add_option("--nnz", go.nnz, "mean nonzeros per vector");
    gen->add_option("--planted", go.planted, "planted near-duplicates per query");
    gen->add_option("--resemblance", go.resemblance, "planted target resemblance");
    gen->add_option("--related", go.related, "moderately related items per query");
    gen->add_option("--related-resemblance", go.related_resemblance,
                    "related-tier target resemblance");
    gen->add_option("--seed", go.seed, "master seed");
    gen->add_option("--format", go.format_name, "indices|svmlight");
    gen->add_option("--out", go.out_prefix, "output path prefix")->required();

    IndexOptions io;
    auto* index = app.add_subcommand("index", "build and serialize an index");
    index->add_option("--in", io.in_path, "corpus file")->required();
    index->add_option("--format", io.format_name, "indices|svmlight");
    index->add_option("--D", io.universe, "universe size (0 = auto from data)");
    index->add_option("--K", io.hashes_per_table, "hash values per table key");
    index->add_option("--L", io.table_count, "table count");
    index->add_option("--scheme", io.scheme, "rotation|bidirectional");
    index->add_flag("--independent-tables", io.independent_tables,
                    "one hash family per table instead of a shared family");
    index->add_option("--seed", io.seed, "master seed");
    index->add_option("--out", io.out_path, "index file")->required();

    QueryOptions qo;
    auto* query = app.add_subcommand("query", "query a serialized index (CSV)");
    query->add_option("--index", qo.index_path, "index file")->required();
    query->add_option("--queries", qo.queries_path, "query corpus file")->required();
    query->add_option("--train", qo.train_path, "training corpus for exact recall");
    query->add_option("--format", qo.format_name, "indices|svmlight");
    query->add_option("--gold-n", qo.gold_n, "gold standard depth");
    query->add_option("--out", qo.out_path, "CSV path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (verify->parsed()) return run_verify(vo);
        if (mse->parsed()) return run_mse(mo);
        if (retrieve->parsed()) return run_retrieve(ro);
        if (gen->parsed()) return run_gen_corpus(go);
        if (index->parsed()) return run_index(io);
        if (query->parsed()) return run_query(qo);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
