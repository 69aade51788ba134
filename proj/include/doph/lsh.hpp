#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "common.hpp"
#include "random.hpp"
#include "rational.hpp"
#include "sketch.hpp"

namespace doph {

/// (K, L) bucketing parameters: K hash values concatenated per table key,
/// L tables.
struct LshParams {
    std::uint32_t hashes_per_table = 1;  // K
    std::uint32_t table_count = 1;       // L

    LshParams(std::uint32_t K, std::uint32_t L) : hashes_per_table(K), table_count(L) {
        if (K == 0 || L == 0) throw ConfigError("LshParams: K and L must be positive");
    }

    std::uint32_t total_hashes() const { return hashes_per_table * table_count; }
};

/// Hash-family configuration for an index: universe, scheme and seeds. By
/// default all K·L values come from a single family with K·L bins, which is
/// what keeps the per-item hashing cost at O(d + K·L). The ablation flag
/// instead instantiates L independent families of K bins each.
struct LshFamilyConfig {
    std::uint32_t universe_size = 0;  // requested, pre-padding
    Scheme scheme = Scheme::Rotation;
    std::uint64_t perm_seed = 0;
    std::uint64_t bits_seed = 0;
    bool independent_tables = false;
    std::uint32_t max_domain = SeededPermutation::kDefaultMaxDomain;
};

/// Canonical byte encoding of hash values: each value as 8 big-endian bytes,
/// concatenated in slice order. Two keys are equal iff all components are.
inline std::string encode_hash_values(std::span<const std::uint64_t> values) {
    std::string out;
    out.reserve(values.size() * 8);
    for (const auto v : values) {
        for (int b = 7; b >= 0; --b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
    }
    return out;
}

struct MetaHashKey {
    std::uint32_t table_id = 0;
    std::string bytes;

    friend bool operator==(const MetaHashKey& a, const MetaHashKey& b) {
        return a.table_id == b.table_id && a.bytes == b.bytes;
    }
};

/// Key for table `table_id`: values K·j .. K·j+K−1 of the densified sketch.
inline MetaHashKey meta_hash(const DensifiedSketch& d, std::uint32_t table_id,
                             const LshParams& params) {
    if (table_id >= params.table_count)
        throw ConfigError("meta_hash: table id out of range");
    const std::uint64_t begin = static_cast<std::uint64_t>(params.hashes_per_table) * table_id;
    if (begin + params.hashes_per_table > d.bin_count())
        throw ConfigError("meta_hash: sketch has too few values for this table slice");
    return MetaHashKey{table_id,
                       encode_hash_values({d.values().data() + begin, params.hashes_per_table})};
}

/// Result of one query: deduplicated candidate ids, plus the total bucket
/// size scanned before deduplication. recall_at_10 is filled in by
/// evaluate_recall when a gold standard is available.
struct RetrievalResult {
    std::vector<std::uint32_t> candidates;
    std::uint64_t scanned = 0;
    std::optional<double> recall_at_10;
};

class LshIndex {
  public:
    using Bucket = std::vector<std::uint32_t>;
    using Table = std::unordered_map<std::string, Bucket>;

    static LshIndex build(const std::vector<SparseBinarySet>& corpus, const LshParams& params,
                          const LshFamilyConfig& cfg) {
        if (corpus.empty()) throw EmptyInputError("build_index: corpus is empty");
        LshIndex idx(params, cfg);
        idx.tables_.resize(params.table_count);
        std::vector<std::string> keys;
        DensifiedSketch sketch_buf;
        OphSketch oph_buf;
        for (std::uint32_t i = 0; i < corpus.size(); ++i) {
            if (corpus[i].empty()) {
                ++idx.skipped_empty_;
                continue;
            }
            idx.item_keys(corpus[i], keys, sketch_buf, oph_buf);
            for (std::uint32_t j = 0; j < params.table_count; ++j) {
                idx.tables_[j][keys[j]].push_back(i);
            }
            ++idx.indexed_count_;
        }
        if (idx.indexed_count_ == 0)
            throw EmptyInputError("build_index: every corpus item was empty");
        return idx;
    }

    const LshParams& lsh_params() const { return params_; }
    const LshFamilyConfig& family_config() const { return cfg_; }
    const UniverseParams& universe_params() const { return families_.front().params(); }
    std::uint64_t indexed_count() const { return indexed_count_; }
    std::uint64_t skipped_empty_count() const { return skipped_empty_; }
    const Table& table(std::uint32_t j) const { return tables_.at(j); }

    /// Per-table keys for one vector; scratch buffers are caller-provided so
    /// concurrent callers stay independent.
    void item_keys(const SparseBinarySet& s, std::vector<std::string>& keys,
                   DensifiedSketch& sketch_buf, OphSketch& oph_buf) const {
        const std::uint32_t K = params_.hashes_per_table;
        const std::uint32_t L = params_.table_count;
        keys.assign(L, {});
        if (cfg_.independent_tables) {
            for (std::uint32_t j = 0; j < L; ++j) {
                families_[j].sketch_into(s, sketch_buf, oph_buf);
                keys[j] = encode_hash_values({sketch_buf.values().data(), K});
            }
        } else {
            families_[0].sketch_into(s, sketch_buf, oph_buf);
            for (std::uint32_t j = 0; j < L; ++j) {
                keys[j] = encode_hash_values(
                    {sketch_buf.values().data() + static_cast<std::uint64_t>(K) * j, K});
            }
        }
    }

    RetrievalResult query(const SparseBinarySet& q) const {
        if (q.empty()) throw EmptyInputError("query_candidates: query set is empty");
        std::vector<std::string> keys;
        DensifiedSketch sketch_buf;
        OphSketch oph_buf;
        item_keys(q, keys, sketch_buf, oph_buf);
        RetrievalResult res;
        for (std::uint32_t j = 0; j < params_.table_count; ++j) {
            const auto it = tables_[j].find(keys[j]);
            if (it == tables_[j].end()) continue;
            res.scanned += it->second.size();
            res.candidates.insert(res.candidates.end(), it->second.begin(), it->second.end());
        }
        std::sort(res.candidates.begin(), res.candidates.end());
        res.candidates.erase(std::unique(res.candidates.begin(), res.candidates.end()),
                             res.candidates.end());
        return res;
    }

    void save(const std::string& path) const;
    static LshIndex load(const std::string& path);

  private:
    LshIndex(const LshParams& params, const LshFamilyConfig& cfg) : params_(params), cfg_(cfg) {
        if (cfg_.universe_size == 0) throw ConfigError("LshIndex: universe size must be positive");
        if (cfg_.independent_tables) {
            const UniverseParams up(cfg_.universe_size, params_.hashes_per_table);
            families_.reserve(params_.table_count);
            for (std::uint32_t j = 0; j < params_.table_count; ++j) {
                families_.emplace_back(up, cfg_.scheme, derive_seed(cfg_.perm_seed, j),
                                       derive_seed(cfg_.bits_seed, j), cfg_.max_domain);
            }
        } else {
            const UniverseParams up(cfg_.universe_size, params_.total_hashes());
            families_.emplace_back(up, cfg_.scheme, cfg_.perm_seed, cfg_.bits_seed,
                                   cfg_.max_domain);
        }
    }

    LshParams params_;
    LshFamilyConfig cfg_;
    std::vector<HashFamily> families_;
    std::vector<Table> tables_;
    std::uint64_t indexed_count_ = 0;
    std::uint64_t skipped_empty_ = 0;
};

inline LshIndex build_index(const std::vector<SparseBinarySet>& corpus, const LshParams& params,
                            const LshFamilyConfig& cfg) {
    return LshIndex::build(corpus, params, cfg);
}

inline RetrievalResult query_candidates(const SparseBinarySet& q, const LshIndex& idx) {
    return idx.query(q);
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

class ByteReader {
  public:
    ByteReader(const std::string& data, const std::string& what) : data_(data), what_(what) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
    std::uint64_t u64() { return raw(8); }

    std::string bytes(std::uint64_t n) {
        need(n);
        std::string out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool exhausted() const { return pos_ == data_.size(); }

  private:
    std::uint64_t raw(int width) {
        need(static_cast<std::uint64_t>(width));
        std::uint64_t v = 0;
        for (int b = 0; b < width; ++b) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
        }
        pos_ += static_cast<std::uint64_t>(width);
        return v;
    }

    void need(std::uint64_t n) {
        if (pos_ + n > data_.size()) throw IoError(what_ + ": truncated index file");
    }

    const std::string& data_;
    std::string what_;
    std::uint64_t pos_ = 0;
};

constexpr char kIndexMagic[8] = {'D', 'O', 'P', 'H', 'L', 'S', 'H', '1'};
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace detail

/// Serialized layout (all integers little-endian): magic, version, family
/// configuration, then each table as a bucket list sorted by key bytes so
/// identical indexes produce identical files.
inline void LshIndex::save(const std::string& path) const {
    std::string out;
    out.append(detail::kIndexMagic, sizeof(detail::kIndexMagic));
    detail::put_u32(out, detail::kIndexVersion);
    out.push_back(static_cast<char>(cfg_.scheme));
    out.push_back(cfg_.independent_tables ? 1 : 0);
    out.push_back(0);
    out.push_back(0);
    detail::put_u32(out, params_.hashes_per_table);
    detail::put_u32(out, params_.table_count);
    detail::put_u32(out, cfg_.universe_size);
    detail::put_u32(out, cfg_.max_domain);
    detail::put_u64(out, cfg_.perm_seed);
    detail::put_u64(out, cfg_.bits_seed);
    detail::put_u64(out, indexed_count_);
    detail::put_u64(out, skipped_empty_);
    for (const auto& table : tables_) {
        detail::put_u64(out, table.size());
        std::vector<const std::pair<const std::string, Bucket>*> rows;
        rows.reserve(table.size());
        for (const auto& kv : table) rows.push_back(&kv);
        std::sort(rows.begin(), rows.end(),
                  [](const auto* a, const auto* b) { return a->first < b->first; });
        for (const auto* row : rows) {
            detail::put_u32(out, static_cast<std::uint32_t>(row->first.size()));
            out.append(row->first);
            detail::put_u64(out, row->second.size());
            for (const auto id : row->second) detail::put_u32(out, id);
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("save_index: cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("save_index: write failed for " + path);
}

inline LshIndex LshIndex::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_index: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("load_index: read failed for " + path);

    detail::ByteReader r(data, "load_index");
    if (r.bytes(sizeof(detail::kIndexMagic)) !=
        std::string(detail::kIndexMagic, sizeof(detail::kIndexMagic)))
        throw IoError("load_index: " + path + " is not an index file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != detail::kIndexVersion)
        throw IoError("load_index: unsupported index version " + std::to_string(version));
    const std::string flags = r.bytes(4);
    LshFamilyConfig cfg;
    cfg.scheme = flags[0] == 0 ? Scheme::Rotation : Scheme::Bidirectional;
    cfg.independent_tables = flags[1] != 0;
    const std::uint32_t K = r.u32();
    const std::uint32_t L = r.u32();
    cfg.universe_size = r.u32();
    cfg.max_domain = r.u32();
    cfg.perm_seed = r.u64();
    cfg.bits_seed = r.u64();

    LshIndex idx(LshParams(K, L), cfg);
    idx.indexed_count_ = r.u64();
    idx.skipped_empty_ = r.u64();
    idx.tables_.resize(L);
    const std::uint64_t key_size = static_cast<std::uint64_t>(K) * 8;
    for (std::uint32_t j = 0; j < L; ++j) {
        const std::uint64_t buckets = r.u64();
        idx.tables_[j].reserve(buckets);
        for (std::uint64_t b = 0; b < buckets; ++b) {
            const std::uint32_t ks = r.u32();
            if (ks != key_size) throw IoError("load_index: key width mismatch");
            std::string key = r.bytes(ks);
            const std::uint64_t ids = r.u64();
            Bucket bucket;
            bucket.reserve(ids);
            for (std::uint64_t i = 0; i < ids; ++i) bucket.push_back(r.u32());
            idx.tables_[j].emplace(std::move(key), std::move(bucket));
        }
    }
    if (!r.exhausted()) throw IoError("load_index: trailing bytes in " + path);
    return idx;
}

inline void save_index(const LshIndex& idx, const std::string& path) { idx.save(path); }
inline LshIndex load_index(const std::string& path) { return LshIndex::load(path); }

/// Exact top-n corpus ids by resemblance to the query; ties broken by
/// ascending id. Comparisons are exact rational comparisons.
inline std::vector<std::uint32_t> exact_top_n(const std::vector<SparseBinarySet>& corpus,
                                              const SparseBinarySet& q, std::uint32_t n) {
    if (corpus.empty()) throw EmptyInputError("exact_top_n: corpus is empty");
    struct Scored {
        Rational r;
        std::uint32_t id;
    };
    std::vector<Scored> scored;
    scored.reserve(corpus.size());
    for (std::uint32_t i = 0; i < corpus.size(); ++i) {
        scored.push_back({resemblance_exact(q, corpus[i]), i});
    }
    const auto better = [](const Scored& a, const Scored& b) {
        if (a.r != b.r) return b.r < a.r;
        return a.id < b.id;
    };
    const std::size_t keep = std::min<std::size_t>(n, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), better);
    std::vector<std::uint32_t> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(scored[i].id);
    return out;
}

/// Gold standard for a batch of queries.
inline std::vector<std::vector<std::uint32_t>> compute_gold(
    const std::vector<SparseBinarySet>& corpus, const std::vector<SparseBinarySet>& queries,
    std::uint32_t gold_n) {
    std::vector<std::vector<std::uint32_t>> gold;
    gold.reserve(queries.size());
    for (const auto& q : queries) gold.push_back(exact_top_n(corpus, q, gold_n));
    return gold;
}

struct RecallSummary {
    double mean_recall = 0.0;
    double mean_candidates = 0.0;  // deduplicated, the "points retrieved" metric
    double mean_scanned = 0.0;     // bucket sizes summed before deduplication
    std::uint64_t query_count = 0;
    std::uint32_t gold_n = 0;
};

/// Mean recall against the exact top-gold_n plus mean retrieval costs. Pass
/// a precomputed gold standard to avoid the quadratic exact pass.
inline RecallSummary evaluate_recall(const LshIndex& idx,
                                     const std::vector<SparseBinarySet>& corpus,
                                     const std::vector<SparseBinarySet>& queries,
                                     std::uint32_t gold_n = 10,
                                     const std::vector<std::vector<std::uint32_t>>* gold = nullptr) {
    if (queries.empty()) throw EmptyInputError("evaluate_recall: no queries");
    if (gold != nullptr && gold->size() != queries.size())
        throw ConfigError("evaluate_recall: gold standard size does not match query count");
    RecallSummary sum;
    sum.gold_n = gold_n;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        RetrievalResult res = idx.query(queries[qi]);
        const std::vector<std::uint32_t> gold_row =
            (gold != nullptr) ? (*gold)[qi] : exact_top_n(corpus, queries[qi], gold_n);
        std::size_t hits = 0;
        for (const auto id : gold_row) {
            hits += std::binary_search(res.candidates.begin(), res.candidates.end(), id);
        }
        const double recall =
            gold_row.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(gold_row.size());
        sum.mean_recall += recall;
        sum.mean_candidates += static_cast<double>(res.candidates.size());
        sum.mean_scanned += static_cast<double>(res.scanned);
        ++sum.query_count;
    }
    sum.mean_recall /= static_cast<double>(sum.query_count);
    sum.mean_candidates /= static_cast<double>(sum.query_count);
    sum.mean_scanned /= static_cast<double>(sum.query_count);
    return sum;
}

}  // namespace doph
