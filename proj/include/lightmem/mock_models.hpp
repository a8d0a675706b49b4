#pragma once
// Deterministic rule-table stand-ins for the four model roles.

#include <regex>

#include "lightmem/gateway.hpp"
#include "lightmem/planner.hpp"

namespace lightmem::mock {

inline const std::set<std::string>& stopwords() {
    static const std::set<std::string> kWords = {
        "a",    "an",   "the",   "is",    "are",  "was",   "were", "be",   "of",    "in",   "on",   "at",
        "to",   "for",  "and",   "or",    "what", "which", "who",  "whom", "where", "when", "how",  "why",
        "do",   "does", "did",   "my",    "me",   "i",     "your", "you",  "it",    "this", "that", "with",
        "about", "from", "by",   "as",    "any",  "some",  "tell", "please", "can", "could", "would", "user's",
        "user", "regarding"};
    return kWords;
}

inline std::vector<std::string> content_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (auto& t : text::normalized_tokens(s))
        if (!stopwords().count(t)) out.push_back(std::move(t));
    return out;
}

/// Fraction of the query's content tokens present in `candidate`.
inline double coverage(std::string_view query, std::string_view candidate) {
    auto q = content_tokens(query);
    if (q.empty()) return 0.0;
    auto c = text::normalized_tokens(candidate);
    std::set<std::string> have(c.begin(), c.end());
    std::size_t hit = 0;
    for (const auto& t : q) hit += have.count(t);
    return static_cast<double>(hit) / static_cast<double>(q.size());
}

// planner -------------------------------------------------------------------

inline std::string planner(const json& payload) {
    auto rp = rule_based_drafts(payload.value("query", ""), payload.value("last_input", ""), Lexicon::builtin(),
                                payload.value("now_ms", Timestamp{0}));
    return rule_plan_to_json(rp).dump();
}

// selector ------------------------------------------------------------------

/// Keeps candidates that cover part of some HQ, best coverage first; equal
/// coverage keeps the incoming (coarse) order. At most k ids.
inline std::string selector(const json& payload) {
    std::vector<std::string> hqs;
    for (const auto& h : payload.at("hqs")) hqs.push_back(h.get<std::string>());
    std::size_t k = payload.value("k", std::size_t{5});
    struct Row {
        double cov;
        std::size_t pos;
        std::string id;
    };
    std::vector<Row> rows;
    const auto& cands = payload.at("candidates");
    for (std::size_t i = 0; i < cands.size(); ++i) {
        auto summary = cands[i].value("summary", "");
        double best = 0;
        for (const auto& q : hqs) best = std::max(best, coverage(q, summary));
        if (best > 0) rows.push_back({best, i, cands[i].at("id").get<std::string>()});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.cov > b.cov; });
    json keep = json::array();
    for (std::size_t i = 0; i < rows.size() && i < k; ++i) keep.push_back(rows[i].id);
    return json{{"keep_ids", keep}}.dump();
}

// writer --------------------------------------------------------------------

inline bool is_filler(std::string_view input) {
    static const std::set<std::string> kFiller = {"hi",   "hello", "hey",  "thanks", "thank", "you",  "ok",
                                                  "okay", "bye",   "cool", "great",  "yes",   "no",   "sure",
                                                  "yep",  "nope",  "hmm",  "lol",    "good",  "morning", "night"};
    auto toks = text::normalized_tokens(input);
    for (const auto& t : toks)
        if (!kFiller.count(t)) return false;
    return true;
}

constexpr std::size_t kSummaryTokens = 30;

inline std::string summary_line(std::string_view user_id, std::string_view input, std::string_view response) {
    return "user " + std::string(user_id) + " said: " + text::first_tokens(input, kSummaryTokens) +
           " ; outcome: " + text::first_tokens(response, kSummaryTokens);
}

inline std::string writer(const json& payload) {
    auto input = payload.value("input", "");
    json out = json::array();
    if (!is_filler(input))
        out.push_back(summary_line(payload.value("user_id", ""), input, payload.value("response", "")));
    return json{{"summaries", out}}.dump();
}

// consolidator ---------------------------------------------------------------

inline bool looks_like_timestamp(const std::string& core) {
    static const std::regex kDate(R"(\d{4}-\d{2}-\d{2}([t ]\d{2}:\d{2}(:\d{2})?(\.\d+)?z?)?)");
    static const std::regex kClock(R"(\d{1,2}:\d{2}(:\d{2})?(am|pm)?)");
    static const std::regex kEpoch(R"(\d{9,})");
    return std::regex_match(core, kDate) || std::regex_match(core, kClock) || std::regex_match(core, kEpoch);
}

/// Redaction table: "user <id>" and bare ids -> "a user", first-person
/// pronouns -> "a user", timestamps dropped.
inline std::string redact(std::string_view summary, std::string_view user_id) {
    static const std::set<std::string> kFirstPerson = {"i",  "me",   "my",   "mine", "myself", "we",  "us",
                                                       "our", "ours", "i'm", "i've", "i'd",    "i'll", "ourselves"};
    auto id = text::to_lower(user_id);
    auto raw = text::split_whitespace(summary);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto lower = text::to_lower(raw[i]);
        auto core = text::strip_edge_punct(lower);
        auto tail = lower.substr(lower.find(core) + core.size());
        if (core.empty()) {
            out.push_back(raw[i]);
            continue;
        }
        if (core == "user" && i + 1 < raw.size() && !id.empty() &&
            text::strip_edge_punct(text::to_lower(raw[i + 1])) == id) {
            auto next = text::to_lower(raw[i + 1]);
            out.push_back("a user" + next.substr(next.find(id) + id.size()));
            ++i;
            continue;
        }
        if (!id.empty() && core == id) {
            out.push_back("a user" + tail);
            continue;
        }
        if (!id.empty() && core == id + "'s") {
            out.push_back("a user's" + tail);
            continue;
        }
        if (kFirstPerson.count(core)) {
            out.push_back("a user" + tail);
            continue;
        }
        if (looks_like_timestamp(core)) continue;
        out.push_back(raw[i]);
    }
    return text::join(out);
}

/// True when nothing but the placeholder and framing words survive.
inline bool only_placeholder(std::string_view statement) {
    static const std::set<std::string> kFraming = {"a", "user", "user's", "said", "outcome"};
    for (const auto& t : text::normalized_tokens(statement))
        if (!kFraming.count(t)) return false;
    return true;
}

inline std::string consolidator(const json& payload) {
    auto statement = redact(payload.value("summary", ""), payload.value("user_id", ""));
    json cands = json::array();
    if (!only_placeholder(statement))
        cands.push_back({{"statement", statement}, {"kind", "Concept"}, {"edges", json::array()}});
    return json{{"candidates", cands}}.dump();
}

inline std::string respond(Role role, const json& payload) {
    switch (role) {
        case Role::planner: return planner(payload);
        case Role::selector: return selector(payload);
        case Role::writer: return writer(payload);
        case Role::consolidator: return consolidator(payload);
    }
    return "{}";
}

inline MockResponder default_responder() { return respond; }

}  // namespace lightmem::mock
