#pragma once
// Small text utilities shared by the planner, writer, metrics and mock models.

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lightmem::text {

inline std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::size_t count_tokens(std::string_view s) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : s) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_token) ++n;
        in_token = !space;
    }
    return n;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

/// Strips ASCII punctuation from both ends of a token ("paris." -> "paris").
inline std::string strip_edge_punct(std::string_view tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
    return std::string(tok.substr(b, e - b));
}

/// Lowercased whitespace tokens with edge punctuation removed; punctuation-only
/// tokens are dropped.
inline std::vector<std::string> normalized_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (auto& raw : split_whitespace(s)) {
        auto t = strip_edge_punct(to_lower(raw));
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

/// Collapses whitespace runs to a single space and trims.
inline std::string normalize_space(std::string_view s) { return join(split_whitespace(s)); }

inline std::string first_tokens(std::string_view s, std::size_t n) {
    auto toks = split_whitespace(s);
    if (toks.size() > n) toks.resize(n);
    return join(toks);
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
        v >>= 4;
    }
    return out;
}

inline bool contains_word(const std::vector<std::string>& tokens, std::string_view word) {
    for (const auto& t : tokens)
        if (t == word) return true;
    return false;
}

/// True when `phrase` (already normalized, possibly multi-word) occurs in the
/// token sequence on token boundaries.
inline bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > tokens.size()) return false;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < phrase.size() && ok; ++j) ok = tokens[i + j] == phrase[j];
        if (ok) return true;
    }
    return false;
}

}  // namespace lightmem::text
