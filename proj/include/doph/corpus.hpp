#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "common.hpp"
#include "random.hpp"
#include "sketch.hpp"

namespace doph {

enum class CorpusFormat : std::uint8_t { Indices = 0, Svmlight = 1 };

inline CorpusFormat parse_corpus_format(const std::string& name) {
    if (name == "indices") return CorpusFormat::Indices;
    if (name == "svmlight") return CorpusFormat::Svmlight;
    throw ConfigError("unknown corpus format: " + name);
}

inline const char* to_string(CorpusFormat f) {
    return f == CorpusFormat::Indices ? "indices" : "svmlight";
}

struct LoadedCorpus {
    std::vector<SparseBinarySet> sets;
    std::uint32_t universe_size = 0;
    bool auto_sized = false;
};

namespace detail {

inline std::uint32_t parse_index_token(const std::string& tok, std::uint64_t line_no) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(tok, &used);
    } catch (const std::exception&) {
        throw ParseError("invalid index token '" + tok + "'", line_no);
    }
    if (used != tok.size()) throw ParseError("invalid index token '" + tok + "'", line_no);
    if (v > 0xffffffffUL) throw ParseError("index token '" + tok + "' out of range", line_no);
    return static_cast<std::uint32_t>(v);
}

inline std::vector<std::uint32_t> parse_indices_line(const std::string& line,
                                                     std::uint64_t line_no) {
    std::istringstream in(line);
    std::vector<std::uint32_t> row;
    std::string tok;
    bool first = true;
    while (in >> tok) {
        if (first && tok.size() > 1 && tok.back() == ':') {
            first = false;
            continue;  // optional "id:" prefix
        }
        first = false;
        row.push_back(parse_index_token(tok, line_no));
    }
    return row;
}

inline std::vector<std::uint32_t> parse_svmlight_line(const std::string& line,
                                                      std::uint64_t line_no) {
    std::istringstream in(line);
    std::vector<std::uint32_t> row;
    std::string tok;
    if (!(in >> tok)) return row;  // label token; caller filters blank lines
    while (in >> tok) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size())
            throw ParseError("expected idx:val, got '" + tok + "'", line_no);
        const std::uint32_t idx = parse_index_token(tok.substr(0, colon), line_no);
        double val = 0.0;
        std::size_t used = 0;
        try {
            val = std::stod(tok.substr(colon + 1), &used);
        } catch (const std::exception&) {
            throw ParseError("invalid value in '" + tok + "'", line_no);
        }
        if (used != tok.size() - colon - 1)
            throw ParseError("invalid value in '" + tok + "'", line_no);
        if (val != 0.0) row.push_back(idx);
    }
    return row;
}

inline bool blank_line(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace detail

/// Reads one set per line. universe_size == 0 requests auto sizing: the
/// universe becomes max index + 1 rounded up to a multiple of bin_count.
/// With an explicit universe, any out-of-range index is an error.
inline LoadedCorpus load_corpus(const std::string& path, CorpusFormat format,
                                std::uint32_t universe_size = 0, std::uint32_t bin_count = 1) {
    std::ifstream f(path);
    if (!f) throw IoError("load_corpus: cannot open " + path);
    std::vector<std::vector<std::uint32_t>> rows;
    std::uint64_t max_index = 0;
    bool saw_index = false;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (detail::blank_line(line) || line[line.find_first_not_of(" \t")] == '#') continue;
        std::vector<std::uint32_t> row = format == CorpusFormat::Indices
                                             ? detail::parse_indices_line(line, line_no)
                                             : detail::parse_svmlight_line(line, line_no);
        for (const auto idx : row) {
            if (universe_size != 0 && idx >= universe_size)
                throw ParseError("index " + std::to_string(idx) + " outside universe of size " +
                                     std::to_string(universe_size),
                                 line_no);
            max_index = std::max<std::uint64_t>(max_index, idx);
            saw_index = true;
        }
        rows.push_back(std::move(row));
    }
    if (f.bad()) throw IoError("load_corpus: read failed for " + path);
    if (rows.empty()) throw EmptyInputError("load_corpus: empty corpus in " + path);

    LoadedCorpus out;
    if (universe_size == 0) {
        if (bin_count == 0) throw ConfigError("load_corpus: bin count must be positive");
        const std::uint64_t needed = saw_index ? max_index + 1 : bin_count;
        const std::uint64_t padded = (needed + bin_count - 1) / bin_count * bin_count;
        if (padded > 0xffffffffUL) throw ConfigError("load_corpus: auto universe too large");
        out.universe_size = static_cast<std::uint32_t>(padded);
        out.auto_sized = true;
    } else {
        out.universe_size = universe_size;
    }
    out.sets.reserve(rows.size());
    for (auto& row : rows) out.sets.emplace_back(out.universe_size, std::move(row));
    return out;
}

inline void save_corpus(const std::string& path, const std::vector<SparseBinarySet>& sets,
                        CorpusFormat format = CorpusFormat::Indices) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("save_corpus: cannot open " + path + " for writing");
    for (const auto& s : sets) {
        if (format == CorpusFormat::Svmlight) {
            f << '1';
            for (const auto idx : s.indices()) f << ' ' << idx << ":1";
        } else {
            bool first = true;
            for (const auto idx : s.indices()) {
                if (!first) f << ' ';
                f << idx;
                first = false;
            }
        }
        f << '\n';
    }
    if (!f) throw IoError("save_corpus: write failed for " + path);
}

/// Request for one pair with exact sizes |S1|=f1, |S2|=f2, |S1∩S2|=a.
struct SyntheticPairSpec {
    std::uint32_t f1 = 0;
    std::uint32_t f2 = 0;
    std::uint32_t shared = 0;  // a
    std::uint32_t universe_size = 0;
    std::uint64_t seed = 0;
};

inline std::pair<SparseBinarySet, SparseBinarySet> generate_pair(const SyntheticPairSpec& spec) {
    if (spec.f1 == 0 || spec.f2 == 0)
        throw ConfigError("generate_pair: set sizes must be positive");
    if (spec.shared > std::min(spec.f1, spec.f2))
        throw ConfigError("generate_pair: intersection larger than a set");
    const std::uint64_t u = static_cast<std::uint64_t>(spec.f1) + spec.f2 - spec.shared;
    if (u > spec.universe_size)
        throw ConfigError("generate_pair: union does not fit the universe");
    RandomEngine rng(derive_seed(spec.seed, 0));
    std::vector<std::uint32_t> pool =
        sample_distinct(static_cast<std::uint32_t>(u), spec.universe_size, rng);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::uint32_t> s1(pool.begin(), pool.begin() + spec.shared);
    std::vector<std::uint32_t> s2 = s1;
    s1.insert(s1.end(), pool.begin() + spec.shared, pool.begin() + spec.f1);
    s2.insert(s2.end(), pool.begin() + spec.f1, pool.end());
    return {SparseBinarySet(spec.universe_size, std::move(s1)),
            SparseBinarySet(spec.universe_size, std::move(s2))};
}

/// Synthetic retrieval corpus: background items with Poisson-distributed
/// sparsity plus, for each query, a few planted near-duplicates at a target
/// resemblance and optionally a second tier of moderately related items.
/// Defaults mimic a high-dimensional sparse text corpus.
struct CorpusSpec {
    std::uint32_t n_train = 10000;
    std::uint32_t n_query = 1000;
    std::uint32_t universe_size = 47236;
    std::uint32_t mean_nnz = 100;
    std::uint32_t planted_per_query = 3;
    double planted_resemblance = 0.85;
    std::uint32_t related_per_query = 0;
    double related_resemblance = 0.35;
    std::uint64_t seed = 1;
};

struct GeneratedCorpus {
    std::vector<SparseBinarySet> train;
    std::vector<SparseBinarySet> queries;
    std::vector<std::vector<std::uint32_t>> planted_ids;  // per query, train ids
};

namespace detail {

inline std::uint32_t draw_nnz(RandomEngine& rng, std::uint32_t mean, std::uint32_t universe) {
    std::poisson_distribution<std::uint32_t> dist(static_cast<double>(mean));
    const std::uint32_t cap = universe / 8;
    return std::clamp<std::uint32_t>(dist(rng), 1, std::max<std::uint32_t>(cap, 1));
}

/// Shared count giving the closest achievable resemblance between two
/// equal-size sets of f elements: R = a / (2f − a)  =>  a = 2fR / (1 + R).
inline std::uint32_t planted_shared_count(std::uint32_t f, double target_resemblance) {
    const double ideal = 2.0 * f * target_resemblance / (1.0 + target_resemblance);
    const auto a = static_cast<std::uint32_t>(std::lround(ideal));
    return std::clamp<std::uint32_t>(a, 1, f);
}

}  // namespace detail

inline GeneratedCorpus generate_corpus(const CorpusSpec& spec) {
    if (spec.n_train == 0 || spec.n_query == 0)
        throw ConfigError("generate_corpus: counts must be positive");
    if (spec.mean_nnz == 0) throw ConfigError("generate_corpus: mean nonzeros must be positive");
    if (spec.universe_size < 16 * spec.mean_nnz)
        throw ConfigError("generate_corpus: universe too small for requested sparsity");
    if (spec.planted_resemblance <= 0.0 || spec.planted_resemblance > 1.0)
        throw ConfigError("generate_corpus: planted resemblance must be in (0, 1]");
    if (spec.related_per_query > 0 &&
        (spec.related_resemblance <= 0.0 || spec.related_resemblance > 1.0))
        throw ConfigError("generate_corpus: related resemblance must be in (0, 1]");
    const std::uint64_t planted_total =
        (static_cast<std::uint64_t>(spec.planted_per_query) + spec.related_per_query) *
        spec.n_query;
    if (planted_total > spec.n_train)
        throw ConfigError("generate_corpus: planted neighbors exceed training size");

    GeneratedCorpus out;
    out.queries.reserve(spec.n_query);
    out.train.reserve(spec.n_train);
    out.planted_ids.assign(spec.n_query, {});
    RandomEngine rng(derive_seed(spec.seed, 0));

    for (std::uint32_t qi = 0; qi < spec.n_query; ++qi) {
        const std::uint32_t f = detail::draw_nnz(rng, spec.mean_nnz, spec.universe_size);
        out.queries.emplace_back(spec.universe_size,
                                 sample_distinct(f, spec.universe_size, rng));
    }
    for (std::uint32_t qi = 0; qi < spec.n_query; ++qi) {
        const auto& q = out.queries[qi].indices();
        const auto f = static_cast<std::uint32_t>(q.size());
        const std::unordered_set<std::uint32_t> q_set(q.begin(), q.end());
        const auto make_neighbor = [&](double target) {
            const std::uint32_t a = detail::planted_shared_count(f, target);
            std::vector<std::uint32_t> kept(q.begin(), q.end());
            std::shuffle(kept.begin(), kept.end(), rng);
            kept.resize(a);
            std::unordered_set<std::uint32_t> used(kept.begin(), kept.end());
            while (kept.size() < f) {
                const auto idx =
                    static_cast<std::uint32_t>(uniform_below(rng, spec.universe_size));
                if (q_set.contains(idx) || !used.insert(idx).second) continue;
                kept.push_back(idx);
            }
            out.train.emplace_back(spec.universe_size, std::move(kept));
        };
        for (std::uint32_t p = 0; p < spec.planted_per_query; ++p) {
            out.planted_ids[qi].push_back(static_cast<std::uint32_t>(out.train.size()));
            make_neighbor(spec.planted_resemblance);
        }
        for (std::uint32_t p = 0; p < spec.related_per_query; ++p)
            make_neighbor(spec.related_resemblance);
    }
    while (out.train.size() < spec.n_train) {
        const std::uint32_t f = detail::draw_nnz(rng, spec.mean_nnz, spec.universe_size);
        out.train.emplace_back(spec.universe_size, sample_distinct(f, spec.universe_size, rng));
    }
    return out;
}

}  // namespace doph
