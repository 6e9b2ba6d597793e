#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "reina/error.hpp"

namespace reina {

/// A token is a normalized surface string: lowercased, never empty, and free
/// of whitespace. Words are maximal runs of letter/digit code points; every
/// other visible code point becomes its own single-character token.
using Token = std::string;

struct TokenStream {
    std::vector<Token> tokens;
    std::size_t source_len_chars = 0;  // code points in the text this stream came from

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }

    bool operator==(const TokenStream& other) const { return tokens == other.tokens; }
};

struct NGramSet {
    int n = 1;
    std::set<std::vector<Token>> grams;
};

namespace detail {

struct CpRange {
    char32_t lo;
    char32_t hi;
};

// Word-forming code points: letters and digits of the major scripts plus
// combining diacritics (so decomposed accents stay inside their word).
// Anything outside these ranges and not whitespace tokenizes as a
// single-character punctuation token.
inline constexpr CpRange kWordRanges[] = {
    {0x0030, 0x0039}, {0x0041, 0x005A}, {0x0061, 0x007A}, {0x00AA, 0x00AA},
    {0x00B5, 0x00B5}, {0x00BA, 0x00BA}, {0x00C0, 0x00D6}, {0x00D8, 0x00F6},
    {0x00F8, 0x02C1}, {0x02C6, 0x02D1}, {0x0300, 0x036F}, {0x0370, 0x0373},
    {0x0376, 0x0377}, {0x037A, 0x037D}, {0x037F, 0x037F}, {0x0386, 0x0386},
    {0x0388, 0x038A}, {0x038C, 0x038C}, {0x038E, 0x03A1}, {0x03A3, 0x03F5},
    {0x03F7, 0x0481}, {0x048A, 0x052F}, {0x0531, 0x0556}, {0x0561, 0x0587},
    {0x05D0, 0x05EA}, {0x0620, 0x064A}, {0x0660, 0x0669}, {0x0671, 0x06D3},
    {0x06F0, 0x06F9}, {0x0904, 0x0939}, {0x0958, 0x0961}, {0x0966, 0x096F},
    {0x1100, 0x11FF}, {0x1E00, 0x1FBC}, {0x1FC2, 0x1FCC}, {0x1FD0, 0x1FDB},
    {0x1FE0, 0x1FEC}, {0x1FF2, 0x1FFC}, {0x3041, 0x3096}, {0x30A1, 0x30FA},
    {0x30FC, 0x30FC}, {0x3400, 0x4DBF}, {0x4E00, 0x9FFF}, {0xAC00, 0xD7A3},
    {0xFB00, 0xFB06}, {0xFF10, 0xFF19}, {0xFF21, 0xFF3A}, {0xFF41, 0xFF5A},
};

inline bool is_word_cp(char32_t cp) {
    for (const auto& r : kWordRanges) {
        if (cp < r.lo) return false;
        if (cp <= r.hi) return true;
    }
    return false;
}

inline bool is_space_cp(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Unicode simple case folding over the Latin, Greek and Cyrillic ranges
// (one code point in, one code point out; locale-independent). Code points
// outside the covered ranges fold to themselves.
inline char32_t fold_cp(char32_t cp) {
    // ASCII
    if (cp >= 0x41 && cp <= 0x5A) return cp + 0x20;
    if (cp < 0xC0) return cp;
    // Latin-1 Supplement (0x00D7 is the multiplication sign)
    if (cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp < 0x100) return cp;
    // Latin Extended-A
    if (cp <= 0x137) return (cp % 2 == 0 && cp != 0x130) ? cp + 1 : cp;
    if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x178) return 0xFF;
    if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp == 0x17F) return 0x73;  // long s
    // Latin Extended-B, regular stretches only
    if (cp >= 0x1CD && cp <= 0x1DC) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x1DE && cp <= 0x1EF) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x1F4) return 0x1F5;
    if (cp >= 0x1F8 && cp <= 0x21F) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x222 && cp <= 0x233) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x246 && cp <= 0x24F) return (cp % 2 == 0) ? cp + 1 : cp;
    // Greek
    if (cp == 0x386) return 0x3AC;
    if (cp >= 0x388 && cp <= 0x38A) return cp + 0x25;
    if (cp == 0x38C) return 0x3CC;
    if (cp == 0x38E || cp == 0x38F) return cp + 0x3F;
    if (cp >= 0x391 && cp <= 0x3A1) return cp + 0x20;
    if (cp >= 0x3A3 && cp <= 0x3AB) return cp + 0x20;
    if (cp == 0x3C2) return 0x3C3;  // final sigma
    // Cyrillic
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x460 && cp <= 0x481) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x48A && cp <= 0x4BF) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x4C0) return 0x4CF;
    if (cp >= 0x4C1 && cp <= 0x4CE) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x4D0 && cp <= 0x52F) return (cp % 2 == 0) ? cp + 1 : cp;
    // Latin Extended Additional
    if (cp == 0x1E9E) return 0xDF;  // capital sharp s
    if (cp >= 0x1E00 && cp <= 0x1EFF) return (cp % 2 == 0) ? cp + 1 : cp;
    // Fullwidth Latin
    if (cp >= 0xFF21 && cp <= 0xFF3A) return cp + 0x20;
    return cp;
}

// Decodes one UTF-8 sequence starting at text[i]; advances i. Malformed
// bytes decode to U+FFFD one byte at a time, keeping the function total.
inline char32_t next_cp(std::string_view text, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
    const unsigned char b0 = byte(i);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
        i += 1;
        return b0;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        i += 1;
        return 0xFFFD;
    }
    if (i + len > text.size()) {
        i += 1;
        return 0xFFFD;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const unsigned char bk = byte(i + k);
        if ((bk & 0xC0) != 0x80) {
            i += 1;
            return 0xFFFD;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    // reject overlong encodings and surrogates
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
        i += 1;
        return 0xFFFD;
    }
    i += len;
    return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace detail

/// Splits UTF-8 text into lowercased word tokens and single-character
/// punctuation tokens. Deterministic and total: no locale, no exceptions.
inline TokenStream tokenize(std::string_view text) {
    TokenStream out;
    std::string word;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = detail::fold_cp(detail::next_cp(text, i));
        ++out.source_len_chars;
        if (detail::is_word_cp(cp)) {
            detail::append_utf8(word, cp);
            continue;
        }
        if (!word.empty()) {
            out.tokens.push_back(std::move(word));
            word.clear();
        }
        if (!detail::is_space_cp(cp)) {
            std::string punct;
            detail::append_utf8(punct, cp);
            out.tokens.push_back(std::move(punct));
        }
    }
    if (!word.empty()) out.tokens.push_back(std::move(word));
    return out;
}

/// All contiguous n-token windows of the stream, as a set.
inline NGramSet ngrams(const TokenStream& ts, int n) {
    if (n < 1) throw ValidationError("ngrams: n must be >= 1, got " + std::to_string(n));
    NGramSet out;
    out.n = n;
    const auto& toks = ts.tokens;
    const std::size_t un = static_cast<std::size_t>(n);
    if (toks.size() < un) return out;
    for (std::size_t i = 0; i + un <= toks.size(); ++i) {
        out.grams.emplace(toks.begin() + i, toks.begin() + i + un);
    }
    return out;
}

/// Number of distinct n-grams shared by both streams.
inline std::size_t ngram_overlap_count(const TokenStream& a, const TokenStream& b, int n) {
    const NGramSet ga = ngrams(a, n);
    const NGramSet gb = ngrams(b, n);
    const auto& small = ga.grams.size() <= gb.grams.size() ? ga.grams : gb.grams;
    const auto& large = ga.grams.size() <= gb.grams.size() ? gb.grams : ga.grams;
    std::size_t count = 0;
    for (const auto& g : small) {
        if (large.count(g)) ++count;
    }
    return count;
}

/// First min(budget, size) tokens, order preserved.
inline TokenStream truncate_tokens(const TokenStream& ts, std::size_t budget) {
    TokenStream out;
    out.source_len_chars = ts.source_len_chars;
    const std::size_t keep = std::min(budget, ts.tokens.size());
    out.tokens.assign(ts.tokens.begin(), ts.tokens.begin() + keep);
    return out;
}

/// Tokens joined by single spaces. Re-tokenizing the result yields the same
/// token sequence, which keeps budget arithmetic exact downstream.
inline std::string join_tokens(const TokenStream& ts) {
    std::string out;
    for (std::size_t i = 0; i < ts.tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += ts.tokens[i];
    }
    return out;
}

}  // namespace reina
