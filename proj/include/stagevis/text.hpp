#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "stagevis/error.hpp"

namespace stagevis {

// Decodes one UTF-8 codepoint starting at `pos`. Returns the codepoint and
// advances `pos` past it, or returns -1 without advancing on malformed input.
inline int32_t utf8_decode(std::string_view s, size_t& pos) {
    if (pos >= s.size()) return -1;
    const auto byte = [&](size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char b0 = byte(pos);
    if (b0 < 0x80) {
        pos += 1;
        return b0;
    }
    int len;
    int32_t cp;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return -1;
    }
    if (pos + len > s.size()) return -1;
    for (int i = 1; i < len; ++i) {
        unsigned char bi = byte(pos + i);
        if ((bi & 0xC0) != 0x80) return -1;
        cp = (cp << 6) | (bi & 0x3F);
    }
    // overlong encodings, surrogates, out-of-range
    static constexpr int32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return -1;
    pos += len;
    return cp;
}

inline void utf8_append(std::string& out, int32_t cp) {
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

inline bool is_valid_utf8(std::string_view s) {
    size_t pos = 0;
    while (pos < s.size()) {
        if (utf8_decode(s, pos) < 0) return false;
    }
    return true;
}

// Whitespace set used for canonicalization: ASCII whitespace plus the common
// Unicode space separators.
inline bool is_space_cp(int32_t cp) {
    switch (cp) {
        case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
        case 0x00A0:  // no-break space
        case 0x1680:
        case 0x2028: case 0x2029:
        case 0x202F: case 0x205F:
        case 0x3000:
        case 0xFEFF:  // zero width no-break space / BOM
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200B;  // en quad .. zero width space
    }
}

// Canonical text form used across the library: valid UTF-8 with every run of
// whitespace collapsed to a single ASCII space, leading/trailing runs removed.
inline std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t pos = 0;
    bool pending_space = false;
    while (pos < s.size()) {
        int32_t cp = utf8_decode(s, pos);
        if (cp < 0) throw Error("input is not valid UTF-8");
        if (is_space_cp(cp)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            utf8_append(out, cp);
        }
    }
    return out;
}

// Whitespace-delimited word tokens. The unit of passage chunking.
inline std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    size_t pos = 0;
    while (pos < text.size()) {
        int32_t cp = utf8_decode(text, pos);
        if (cp < 0) throw Error("input is not valid UTF-8");
        if (is_space_cp(cp)) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            utf8_append(cur, cp);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

// Indexing tokenizer: lowercased alphanumeric word segmentation. ASCII letters
// are lowercased; every non-ASCII non-space codepoint counts as a word
// character and passes through unchanged. No stemming, no stopwords.
inline std::vector<std::string> index_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    size_t pos = 0;
    while (pos < text.size()) {
        int32_t cp = utf8_decode(text, pos);
        if (cp < 0) throw Error("input is not valid UTF-8");
        bool word_char;
        if (cp < 0x80) {
            if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
            word_char = (cp >= 'a' && cp <= 'z') || (cp >= '0' && cp <= '9');
        } else {
            word_char = !is_space_cp(cp) && !(cp >= 0x2010 && cp <= 0x2027);  // general punctuation
        }
        if (word_char) {
            utf8_append(cur, cp);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ULL) {
    uint64_t h = seed;
    for (unsigned char c : std::string_view(s)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic 64-bit generator. Used wherever seeded randomness is needed so
// results do not depend on the standard library's distribution internals.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform draw in [0, n) via rejection sampling; exact, no modulo bias.
    uint64_t below(uint64_t n) {
        if (n == 0) throw Error("below(0)");
        uint64_t threshold = -n % n;  // 2^64 mod n
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }
};

}  // namespace stagevis
