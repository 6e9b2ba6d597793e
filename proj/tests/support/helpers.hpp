#pragma once

// Test-only helpers: synthetic token streams, random corpus generation, and
// an index-free BM25 oracle. The oracle recomputes every statistic by direct
// counting so it shares no code path with the library's inverted index.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "reina/text_analysis.hpp"

namespace test_support {

inline reina::TokenStream stream_of(std::vector<std::string> tokens) {
    reina::TokenStream ts;
    ts.tokens = std::move(tokens);
    return ts;
}

struct OracleDoc {
    std::string id;
    std::vector<std::string> tokens;
};

struct OracleHit {
    std::string id;
    double score;
};

// Term-by-term BM25 with direct counting: tf by scanning the document,
// df by scanning the corpus. Distinct query terms are visited in sorted
// order so the floating-point sum matches the contract exactly.
inline double brute_force_bm25(const std::vector<std::string>& query_tokens,
                               const OracleDoc& doc,
                               const std::vector<OracleDoc>& corpus,
                               double k1, double b) {
    double total_len = 0;
    for (const auto& d : corpus) total_len += static_cast<double>(d.tokens.size());
    const double n_docs = static_cast<double>(corpus.size());
    const double avgdl = total_len / n_docs;
    const double dl = static_cast<double>(doc.tokens.size());

    std::set<std::string> terms(query_tokens.begin(), query_tokens.end());
    double score = 0.0;
    for (const auto& term : terms) {
        std::size_t tf = 0;
        for (const auto& t : doc.tokens) {
            if (t == term) ++tf;
        }
        if (tf == 0) continue;
        std::size_t df = 0;
        for (const auto& d : corpus) {
            for (const auto& t : d.tokens) {
                if (t == term) {
                    ++df;
                    break;
                }
            }
        }
        const double idf = std::log(1.0 + (n_docs - static_cast<double>(df) + 0.5) /
                                              (static_cast<double>(df) + 0.5));
        const double tf_d = static_cast<double>(tf);
        const double tf_part = tf_d * (k1 + 1.0) / (tf_d + k1 * (1.0 - b + b * dl / avgdl));
        score += idf * tf_part;
    }
    return score;
}

// Exhaustive top-k: scores every document, keeps positives, sorts by
// (score desc, id asc). Document frequencies are counted once per query by
// scanning the raw corpus; per-document scores still sum term-by-term in
// sorted order, so results are bit-identical to brute_force_bm25.
inline std::vector<OracleHit> brute_force_retrieve(const std::vector<std::string>& query_tokens,
                                                   const std::vector<OracleDoc>& corpus,
                                                   std::size_t k, double k1, double b,
                                                   const std::set<std::string>& exclude = {}) {
    std::uint64_t total_len = 0;
    for (const auto& d : corpus) total_len += d.tokens.size();
    const double n_docs = static_cast<double>(corpus.size());
    const double avgdl = static_cast<double>(total_len) / n_docs;

    const std::set<std::string> terms(query_tokens.begin(), query_tokens.end());
    std::map<std::string, std::size_t> df;
    for (const auto& term : terms) {
        std::size_t n = 0;
        for (const auto& d : corpus) {
            for (const auto& t : d.tokens) {
                if (t == term) {
                    ++n;
                    break;
                }
            }
        }
        df[term] = n;
    }

    std::vector<OracleHit> hits;
    for (const auto& doc : corpus) {
        if (exclude.count(doc.id)) continue;
        std::map<std::string, std::size_t> tf;
        for (const auto& t : doc.tokens) {
            if (terms.count(t)) ++tf[t];
        }
        double score = 0.0;
        for (const auto& term : terms) {
            const auto it = tf.find(term);
            if (it == tf.end()) continue;
            const double idf = std::log(1.0 + (n_docs - static_cast<double>(df[term]) + 0.5) /
                                                  (static_cast<double>(df[term]) + 0.5));
            const double tf_d = static_cast<double>(it->second);
            const double dl = static_cast<double>(doc.tokens.size());
            const double tf_part = tf_d * (k1 + 1.0) / (tf_d + k1 * (1.0 - b + b * dl / avgdl));
            score += idf * tf_part;
        }
        if (score > 0.0) hits.push_back({doc.id, score});
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b2) {
        if (a.score != b2.score) return a.score > b2.score;
        return a.id < b2.id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

// Random corpora over a bounded vocabulary, reproducible via seed.
class CorpusGen {
public:
    explicit CorpusGen(std::uint32_t seed) : rng_(seed) {}

    std::string word(std::size_t vocab) {
        return "w" + std::to_string(rng_() % vocab);
    }

    std::vector<std::string> sentence(std::size_t vocab, std::size_t min_len, std::size_t max_len) {
        const std::size_t len = min_len + rng_() % (max_len - min_len + 1);
        std::vector<std::string> out;
        out.reserve(len);
        for (std::size_t i = 0; i < len; ++i) out.push_back(word(vocab));
        return out;
    }

    std::vector<OracleDoc> corpus(std::size_t n_docs, std::size_t vocab,
                                  std::size_t min_len = 1, std::size_t max_len = 40) {
        std::vector<OracleDoc> docs;
        docs.reserve(n_docs);
        for (std::size_t i = 0; i < n_docs; ++i) {
            docs.push_back({"d" + std::to_string(i), sentence(vocab, min_len, max_len)});
        }
        return docs;
    }

    std::mt19937& rng() { return rng_; }

private:
    std::mt19937 rng_;
};

}  // namespace test_support
