#pragma once

// Inverted index over training-instance keys with BM25 top-k retrieval.
//
// Scoring follows the Lucene variant: idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)),
// which is strictly positive for 1 <= df <= N, times the usual saturated
// term-frequency part tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)). Query terms
// are deduplicated and summed in sorted order so scores are bit-reproducible.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "reina/error.hpp"
#include "reina/text_analysis.hpp"

namespace reina {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    bool operator==(const Bm25Params&) const = default;
};

struct IndexedDoc {
    std::string doc_id;
    TokenStream key_tokens;
    std::string value_ref;  // opaque payload carried next to the key
};

struct RetrievalHit {
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based, contiguous within a result list
};

class InvertedIndex {
public:
    struct DocEntry {
        std::string doc_id;
        std::uint64_t length = 0;
        std::string value_ref;
    };

    struct Posting {
        std::uint32_t doc = 0;  // ordinal into the doc table
        std::uint32_t tf = 0;
    };

    std::size_t doc_count() const { return docs_.size(); }
    double avgdl() const { return avgdl_; }
    const Bm25Params& params() const { return params_; }
    std::size_t vocab_size() const { return postings_.size(); }

    const std::map<std::string, std::string>& meta() const { return meta_; }
    void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }

    bool has_doc(const std::string& doc_id) const { return id_to_ord_.count(doc_id) != 0; }

    const DocEntry& doc(std::uint32_t ordinal) const { return docs_.at(ordinal); }

    const DocEntry& doc(const std::string& doc_id) const { return docs_[ordinal(doc_id)]; }

    std::uint32_t ordinal(const std::string& doc_id) const {
        const auto it = id_to_ord_.find(doc_id);
        if (it == id_to_ord_.end())
            throw ValidationError("unknown doc_id '" + doc_id + "'");
        return it->second;
    }

    std::size_t df(const std::string& term) const {
        const auto it = postings_.find(term);
        return it == postings_.end() ? 0 : it->second.size();
    }

    const std::vector<Posting>* postings(const std::string& term) const {
        const auto it = postings_.find(term);
        return it == postings_.end() ? nullptr : &it->second;
    }

    const std::vector<DocEntry>& docs() const { return docs_; }
    const std::map<std::string, std::vector<Posting>>& all_postings() const { return postings_; }

    double idf(std::size_t doc_freq) const {
        const double n = static_cast<double>(docs_.size());
        const double dfv = static_cast<double>(doc_freq);
        return std::log(1.0 + (n - dfv + 0.5) / (dfv + 0.5));
    }

    double tf_weight(std::uint32_t tf, std::uint64_t doc_len) const {
        const double tfv = static_cast<double>(tf);
        const double norm = 1.0 - params_.b + params_.b * static_cast<double>(doc_len) / avgdl_;
        return tfv * (params_.k1 + 1.0) / (tfv + params_.k1 * norm);
    }

private:
    InvertedIndex() = default;

    void finish() {
        std::uint64_t total = 0;
        id_to_ord_.clear();
        id_to_ord_.reserve(docs_.size());
        for (std::uint32_t i = 0; i < docs_.size(); ++i) {
            total += docs_[i].length;
            if (!id_to_ord_.emplace(docs_[i].doc_id, i).second)
                throw ValidationError("duplicate doc_id '" + docs_[i].doc_id + "'");
        }
        avgdl_ = static_cast<double>(total) / static_cast<double>(docs_.size());
    }

    std::vector<DocEntry> docs_;
    std::unordered_map<std::string, std::uint32_t> id_to_ord_;
    std::map<std::string, std::vector<Posting>> postings_;  // sorted terms, canonical on disk
    double avgdl_ = 0.0;
    Bm25Params params_;
    std::map<std::string, std::string> meta_;

    friend InvertedIndex build_index(const std::vector<IndexedDoc>&, Bm25Params);
    friend InvertedIndex merge_indices(const std::vector<InvertedIndex>&);
    friend InvertedIndex load_index(const std::filesystem::path&);
};

inline InvertedIndex build_index(const std::vector<IndexedDoc>& docs, Bm25Params params = {}) {
    if (docs.empty())
        throw ValidationError("build_index: document sequence is empty");
    InvertedIndex idx;
    idx.params_ = params;
    idx.docs_.reserve(docs.size());
    for (const auto& d : docs) {
        if (d.key_tokens.empty())
            throw ValidationError("build_index: empty key for doc_id '" + d.doc_id + "'");
        const auto ord = static_cast<std::uint32_t>(idx.docs_.size());
        idx.docs_.push_back({d.doc_id, d.key_tokens.size(), d.value_ref});
        std::map<std::string, std::uint32_t> tf;
        for (const auto& tok : d.key_tokens.tokens) ++tf[tok];
        for (const auto& [term, count] : tf) idx.postings_[term].push_back({ord, count});
    }
    idx.finish();
    return idx;
}

inline double bm25_score(const TokenStream& query, const std::string& doc_id,
                         const InvertedIndex& index) {
    const std::uint32_t ord = index.ordinal(doc_id);  // throws on unknown id
    const auto& entry = index.doc(ord);
    const std::set<std::string> terms(query.tokens.begin(), query.tokens.end());
    double score = 0.0;
    for (const auto& term : terms) {
        const auto* plist = index.postings(term);
        if (plist == nullptr) continue;
        const auto it = std::lower_bound(
            plist->begin(), plist->end(), ord,
            [](const InvertedIndex::Posting& p, std::uint32_t o) { return p.doc < o; });
        if (it == plist->end() || it->doc != ord) continue;
        score += index.idf(plist->size()) * index.tf_weight(it->tf, entry.length);
    }
    return score;
}

/// Top-k by BM25 over the whole index. Only strictly positive scores are
/// returned; ties break by doc_id ascending so results are total-ordered.
inline std::vector<RetrievalHit> retrieve(const TokenStream& query, std::size_t k,
                                          const InvertedIndex& index,
                                          const std::set<std::string>& exclude = {}) {
    if (k == 0)
        throw ValidationError("retrieve: k must be >= 1");
    const std::set<std::string> terms(query.tokens.begin(), query.tokens.end());
    std::unordered_map<std::uint32_t, double> acc;
    for (const auto& term : terms) {
        const auto* plist = index.postings(term);
        if (plist == nullptr) continue;
        const double w = index.idf(plist->size());
        for (const auto& p : *plist) {
            acc[p.doc] += w * index.tf_weight(p.tf, index.doc(p.doc).length);
        }
    }
    std::vector<RetrievalHit> hits;
    hits.reserve(acc.size());
    for (const auto& [ord, score] : acc) {
        if (score <= 0.0) continue;
        const auto& id = index.doc(ord).doc_id;
        if (exclude.count(id)) continue;
        hits.push_back({id, score, 0});
    }
    std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (hits.size() > k) hits.resize(k);
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
    return hits;
}

/// Equivalent to build_index over the concatenation of all source docs:
/// N, avgdl and postings are recomputed globally.
inline InvertedIndex merge_indices(const std::vector<InvertedIndex>& indices) {
    if (indices.empty())
        throw ValidationError("merge_indices: no indices given");
    for (const auto& idx : indices) {
        if (!(idx.params_ == indices.front().params_))
            throw ValidationError("merge_indices: BM25 parameter mismatch");
        if (idx.meta_ != indices.front().meta_)
            throw ValidationError("merge_indices: index metadata mismatch");
    }
    InvertedIndex out;
    out.params_ = indices.front().params_;
    out.meta_ = indices.front().meta_;
    std::uint32_t offset = 0;
    for (const auto& idx : indices) {
        for (const auto& d : idx.docs_) out.docs_.push_back(d);
        for (const auto& [term, plist] : idx.postings_) {
            auto& merged = out.postings_[term];
            for (const auto& p : plist) merged.push_back({p.doc + offset, p.tf});
        }
        offset += static_cast<std::uint32_t>(idx.docs_.size());
    }
    out.finish();  // throws on cross-index doc_id collisions
    return out;
}

namespace detail {

inline constexpr char kIndexMagic[] = "REINA-IDX";
inline constexpr std::uint32_t kIndexVersion = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(buf, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(buf, 8);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t get_u32(std::istream& is) {
    char buf[4];
    is.read(buf, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::string get_str(std::istream& is) {
    const std::uint64_t len = get_u64(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

}  // namespace detail

/// Writes the index as a single self-describing binary file. The layout is
/// canonical (doc table in build order, terms sorted), so identical indexes
/// serialize to identical bytes.
inline void save_index(const InvertedIndex& index, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw IoError("cannot open '" + path.string() + "' for writing");
    os.write(detail::kIndexMagic, sizeof(detail::kIndexMagic) - 1);
    detail::put_u32(os, detail::kIndexVersion);
    detail::put_u64(os, index.meta().size());
    for (const auto& [key, value] : index.meta()) {
        detail::put_str(os, key);
        detail::put_str(os, value);
    }
    detail::put_f64(os, index.params().k1);
    detail::put_f64(os, index.params().b);
    detail::put_u64(os, index.doc_count());
    for (const auto& d : index.docs()) {
        detail::put_str(os, d.doc_id);
        detail::put_u64(os, d.length);
        detail::put_str(os, d.value_ref);
    }
    detail::put_u64(os, index.vocab_size());
    for (const auto& [term, plist] : index.all_postings()) {
        detail::put_str(os, term);
        detail::put_u64(os, plist.size());
        for (const auto& p : plist) {
            detail::put_u32(os, p.doc);
            detail::put_u32(os, p.tf);
        }
    }
    if (!os)
        throw IoError("write failed for '" + path.string() + "'");
}

inline InvertedIndex load_index(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open index '" + path.string() + "'");
    char magic[sizeof(detail::kIndexMagic) - 1];
    is.read(magic, sizeof(magic));
    if (!is || std::string(magic, sizeof(magic)) != detail::kIndexMagic)
        throw IoError("'" + path.string() + "' is not a REINA index (bad magic)");
    const std::uint32_t version = detail::get_u32(is);
    if (version != detail::kIndexVersion)
        throw IoError("'" + path.string() + "': unsupported index version " +
                      std::to_string(version));
    InvertedIndex idx;
    const std::uint64_t n_meta = detail::get_u64(is);
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        auto key = detail::get_str(is);
        idx.meta_[std::move(key)] = detail::get_str(is);
    }
    idx.params_.k1 = detail::get_f64(is);
    idx.params_.b = detail::get_f64(is);
    const std::uint64_t n_docs = detail::get_u64(is);
    idx.docs_.reserve(n_docs);
    for (std::uint64_t i = 0; i < n_docs; ++i) {
        InvertedIndex::DocEntry d;
        d.doc_id = detail::get_str(is);
        d.length = detail::get_u64(is);
        d.value_ref = detail::get_str(is);
        idx.docs_.push_back(std::move(d));
    }
    const std::uint64_t n_terms = detail::get_u64(is);
    for (std::uint64_t i = 0; i < n_terms; ++i) {
        auto term = detail::get_str(is);
        const std::uint64_t n_postings = detail::get_u64(is);
        auto& plist = idx.postings_[std::move(term)];
        plist.reserve(n_postings);
        for (std::uint64_t j = 0; j < n_postings; ++j) {
            InvertedIndex::Posting p;
            p.doc = detail::get_u32(is);
            p.tf = detail::get_u32(is);
            if (p.doc >= n_docs || p.tf == 0)
                throw IoError("'" + path.string() + "': corrupt posting list");
            plist.push_back(p);
        }
    }
    if (!is)
        throw IoError("'" + path.string() + "': truncated index file");
    if (idx.docs_.empty())
        throw IoError("'" + path.string() + "': index contains no documents");
    idx.finish();
    return idx;
}

}  // namespace reina
