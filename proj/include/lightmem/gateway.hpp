#pragma once
// Inference gateway for the four model roles (planner, selector, writer,
// consolidator). Every role speaks JSON; outputs are schema-checked before any
// caller sees them.

#include <array>
#include <atomic>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <variant>

#include "json.hpp"
#include "lightmem/core.hpp"
#include "lightmem/http_client.hpp"
#include "lightmem/vector_index.hpp"

namespace lightmem {

using nlohmann::json;

enum class Role { planner, selector, writer, consolidator };
enum class BackendKind { mock, scripted, http };

inline std::string_view to_string(Role r) {
    switch (r) {
        case Role::planner: return "planner";
        case Role::selector: return "selector";
        case Role::writer: return "writer";
        case Role::consolidator: return "consolidator";
    }
    return "planner";
}

inline Role role_from_string(std::string_view s) {
    if (s == "planner") return Role::planner;
    if (s == "selector") return Role::selector;
    if (s == "writer") return Role::writer;
    if (s == "consolidator") return Role::consolidator;
    throw PreconditionError("unknown role: " + std::string(s));
}

inline std::string_view to_string(BackendKind b) {
    switch (b) {
        case BackendKind::mock: return "mock";
        case BackendKind::scripted: return "scripted";
        case BackendKind::http: return "http";
    }
    return "mock";
}

inline BackendKind backend_from_string(std::string_view s) {
    if (s == "mock") return BackendKind::mock;
    if (s == "scripted") return BackendKind::scripted;
    if (s == "http") return BackendKind::http;
    throw PreconditionError("unknown backend: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Prompt templates

/// The prohibited-behaviour block for each role. Templates must embed it verbatim.
inline std::string role_constraints(Role r) {
    switch (r) {
        case Role::planner:
            return "Constraints:\n- Do not answer the user.\n- Do not write any user-facing natural language.\n"
                   "- Do not search or retrieve memory yourself.";
        case Role::selector:
            return "Constraints:\n- Do not modify or rewrite any memory content.\n"
                   "- Do not write explanations or user-facing text.\n"
                   "- Do not retrieve or add candidates; only select from the given ids.";
        case Role::writer:
            return "Constraints:\n- Do not store full dialogue transcripts.\n- Do not search existing memory.\n"
                   "- Do not abstract across users.\n- Do not write replies addressed to the user.";
        case Role::consolidator:
            return "Constraints:\n- Do not write user-facing text.\n- Do not modify mid-term memory.\n"
                   "- Remove every user identifier and session-specific detail.";
    }
    return {};
}

inline std::string default_prompt_template(Role r) {
    std::string role, input, task, format;
    switch (r) {
        case Role::planner:
            role = "Role: query decomposition and routing controller for a memory system.";
            input = "Input: the current user query and a truncated window of recent dialogue.";
            task =
                "Task: find underspecified references (pronouns, implicit context, vague time cues); rewrite the "
                "request into one or more standalone hypothetical queries (HQs), separating user-specific needs "
                "from general factual needs; route each HQ to MTM (user-specific) or LTM (general knowledge).";
            format =
                "Output Format: JSON only: {\"hqs\":[{\"text\":str,\"route\":\"MTM\"|\"LTM\"}],"
                "\"filters\":{\"time_window\":{\"start\":ms,\"end\":ms}?,\"type_tags\":[str]?}}";
            break;
        case Role::selector:
            role = "Role: semantic consistency filter over retrieved memory candidates.";
            input = "Input: a set of HQs and a fixed-size list of candidate summaries with ids and metadata.";
            task =
                "Task: keep at most k candidates that directly support at least one HQ, judged by meaning rather "
                "than surface word overlap.";
            format = "Output Format: JSON only: {\"keep_ids\":[str]}";
            break;
        case Role::writer:
            role = "Role: mid-term memory writer.";
            input = "Input: the current user utterance, the system response and recent dialogue context.";
            task =
                "Task: extract user-relevant information likely to matter beyond this turn and compress it into "
                "short self-contained summaries. Return an empty list when nothing is worth keeping.";
            format = "Output Format: JSON only: {\"summaries\":[str]}";
            break;
        case Role::consolidator:
            role = "Role: offline long-term memory consolidator.";
            input = "Input: one mid-term memory item selected for consolidation.";
            task =
                "Task: abstract the episode into de-identified, reusable knowledge units typed Entity or Concept, "
                "optionally proposing links (IsA, HasProperty, RelatedTo, Implies) to existing labels.";
            format =
                "Output Format: JSON only: {\"candidates\":[{\"statement\":str,\"kind\":\"Entity\"|\"Concept\","
                "\"edges\":[{\"relation\":str,\"target\":str}]}]}";
            break;
    }
    return role + "\n" + input + "\n" + task + "\n" + role_constraints(r) + "\n" + format;
}

struct RoleConfig {
    Role role = Role::planner;
    BackendKind backend = BackendKind::mock;
    std::string prompt_template;
    std::string endpoint_url;
    std::string api_key_ref = "LIGHTMEM_MODEL_KEY";  // name of the env var holding the key
    std::string model = "local-slm";
    int timeout_ms = 10000;
    int max_retries = 2;
    int backoff_base_ms = 200;

    static RoleConfig defaults(Role r, BackendKind b = BackendKind::mock) {
        RoleConfig c;
        c.role = r;
        c.backend = b;
        c.prompt_template = default_prompt_template(r);
        if (const char* ep = std::getenv("LIGHTMEM_MODEL_ENDPOINT")) c.endpoint_url = ep;
        return c;
    }

    void validate() const {
        if (backend == BackendKind::http && endpoint_url.empty())
            throw PreconditionError(std::string(to_string(role)) + ": http backend requires endpoint_url");
        if (prompt_template.find(role_constraints(role)) == std::string::npos)
            throw PreconditionError(std::string(to_string(role)) + ": prompt template lacks the constraints block");
        if (timeout_ms <= 0) throw PreconditionError("timeout_ms must be positive");
        if (max_retries < 0) throw PreconditionError("max_retries must be non-negative");
    }
};

// ---------------------------------------------------------------------------
// Structured outputs

class ParseError : public Error {
public:
    ParseError(std::string path, const std::string& what)
        : Error("parse", path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct PlannerHq {
    std::string text;
    StoreKind route = StoreKind::MTM;
    bool operator==(const PlannerHq&) const = default;
};

struct PlannerOutput {
    std::vector<PlannerHq> hqs;
    std::optional<TimeWindow> time_window;
    std::set<std::string> type_tags;
    bool operator==(const PlannerOutput&) const = default;
};

struct SelectorOutput {
    std::vector<std::string> keep_ids;
    bool operator==(const SelectorOutput&) const = default;
};

struct WriterOutput {
    std::vector<std::string> summaries;
    bool operator==(const WriterOutput&) const = default;
};

struct CandidateDraft {
    std::string statement;
    NodeKind kind = NodeKind::Concept;
    std::vector<std::pair<Relation, std::string>> edges;
    bool operator==(const CandidateDraft&) const = default;
};

struct ConsolidatorOutput {
    std::vector<CandidateDraft> candidates;
    bool operator==(const ConsolidatorOutput&) const = default;
};

using ParsedRecord = std::variant<PlannerOutput, SelectorOutput, WriterOutput, ConsolidatorOutput>;

namespace detail {

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path.empty() ? key : path + "." + key, "missing required field");
    return *it;
}

inline std::string require_string(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = require(obj, key, path);
    auto p = path.empty() ? key : path + "." + key;
    if (!v.is_string()) throw ParseError(p, "expected string");
    return v.get<std::string>();
}

inline const json& require_array(const json& obj, const std::string& key) {
    const auto& v = require(obj, key, "");
    if (!v.is_array()) throw ParseError(key, "expected array");
    return v;
}

inline std::vector<std::string> string_array(const json& arr, const std::string& path) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_string()) throw ParseError(path + "[" + std::to_string(i) + "]", "expected string");
        out.push_back(arr[i].get<std::string>());
    }
    return out;
}

inline PlannerOutput parse_planner(const json& j) {
    for (const char* forbidden : {"answer", "response", "reply"})
        if (j.contains(forbidden)) throw ParseError(forbidden, "planner output must not answer the user");
    PlannerOutput out;
    const auto& hqs = require_array(j, "hqs");
    for (std::size_t i = 0; i < hqs.size(); ++i) {
        auto path = "hqs[" + std::to_string(i) + "]";
        if (!hqs[i].is_object()) throw ParseError(path, "expected object");
        PlannerHq hq;
        hq.text = require_string(hqs[i], "text", path);
        if (text::normalize_space(hq.text).empty()) throw ParseError(path + ".text", "empty text");
        auto route = text::to_lower(require_string(hqs[i], "route", path));
        if (route == "mtm")
            hq.route = StoreKind::MTM;
        else if (route == "ltm")
            hq.route = StoreKind::LTM;
        else
            throw ParseError(path + ".route", "expected \"MTM\" or \"LTM\"");
        out.hqs.push_back(std::move(hq));
    }
    const auto& filters = require(j, "filters", "");
    if (!filters.is_object()) throw ParseError("filters", "expected object");
    if (auto tw = filters.find("time_window"); tw != filters.end() && !tw->is_null()) {
        if (!tw->is_object()) throw ParseError("filters.time_window", "expected object");
        auto num = [&](const char* k) {
            const auto& v = require(*tw, k, "filters.time_window");
            if (!v.is_number_integer()) throw ParseError(std::string("filters.time_window.") + k, "expected integer");
            return v.get<Timestamp>();
        };
        TimeWindow w{num("start"), num("end")};
        if (w.start > w.end) throw ParseError("filters.time_window", "start > end");
        out.time_window = w;
    }
    if (auto tags = filters.find("type_tags"); tags != filters.end() && !tags->is_null()) {
        if (!tags->is_array()) throw ParseError("filters.type_tags", "expected array");
        for (auto& t : string_array(*tags, "filters.type_tags")) out.type_tags.insert(t);
    }
    return out;
}

inline ConsolidatorOutput parse_consolidator(const json& j) {
    ConsolidatorOutput out;
    const auto& cands = require_array(j, "candidates");
    for (std::size_t i = 0; i < cands.size(); ++i) {
        auto path = "candidates[" + std::to_string(i) + "]";
        if (!cands[i].is_object()) throw ParseError(path, "expected object");
        CandidateDraft d;
        d.statement = require_string(cands[i], "statement", path);
        if (auto k = cands[i].find("kind"); k != cands[i].end()) {
            if (!k->is_string()) throw ParseError(path + ".kind", "expected string");
            auto ks = k->get<std::string>();
            if (ks != "Entity" && ks != "Concept") throw ParseError(path + ".kind", "expected Entity or Concept");
            d.kind = node_kind_from_string(ks);
        }
        if (auto e = cands[i].find("edges"); e != cands[i].end()) {
            if (!e->is_array()) throw ParseError(path + ".edges", "expected array");
            for (std::size_t m = 0; m < e->size(); ++m) {
                auto ep = path + ".edges[" + std::to_string(m) + "]";
                const auto& edge = (*e)[m];
                if (!edge.is_object()) throw ParseError(ep, "expected object");
                auto rel = relation_from_string(require_string(edge, "relation", ep));
                if (!rel) throw ParseError(ep + ".relation", "relation outside schema");
                d.edges.emplace_back(*rel, require_string(edge, "target", ep));
            }
        }
        out.candidates.push_back(std::move(d));
    }
    return out;
}

}  // namespace detail

/// Strict per-role schema validation. Unknown fields are ignored; missing
/// required fields raise a ParseError naming the offending path.
inline ParsedRecord parse_structured(std::string_view raw, Role role) {
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ParseError("", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("", "expected a JSON object");
    switch (role) {
        case Role::planner: return detail::parse_planner(j);
        case Role::selector:
            return SelectorOutput{detail::string_array(detail::require_array(j, "keep_ids"), "keep_ids")};
        case Role::writer:
            return WriterOutput{detail::string_array(detail::require_array(j, "summaries"), "summaries")};
        case Role::consolidator: return detail::parse_consolidator(j);
    }
    throw ParseError("", "unknown role");
}

struct StructuredResponse {
    std::string raw;
    std::optional<ParsedRecord> parsed;
    bool degraded = false;
    std::string error;
};

// ---------------------------------------------------------------------------
// Payload canonicalization for scripted fixtures

inline json canonicalize(const json& j) {
    if (j.is_string()) return text::normalize_space(j.get<std::string>());
    if (j.is_array()) {
        json out = json::array();
        for (const auto& v : j) out.push_back(canonicalize(v));
        return out;
    }
    if (j.is_object()) {
        json out = json::object();  // std::map-backed: keys come out sorted
        for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = canonicalize(it.value());
        return out;
    }
    return j;
}

inline std::string payload_hash(const json& payload) { return text::hex64(text::fnv1a(canonicalize(payload).dump())); }

/// Fixture file: JSONL of {role, payload_hash, response}. A payload_hash of
/// "*" matches any payload for that role. Fixtures for the same key are
/// consumed in file order.
class ScriptedFixtures {
public:
    void add(Role role, std::string hash, std::string response) {
        std::lock_guard lock(mu_);
        queues_[{role, std::move(hash)}].push_back(std::move(response));
    }

    static std::shared_ptr<ScriptedFixtures> from_jsonl(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw PreconditionError("cannot open fixtures " + path);
        auto f = std::make_shared<ScriptedFixtures>();
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (text::normalize_space(line).empty()) continue;
            try {
                auto j = json::parse(line);
                auto resp = j.at("response");
                f->add(role_from_string(j.at("role").get<std::string>()), j.at("payload_hash").get<std::string>(),
                      resp.is_string() ? resp.get<std::string>() : resp.dump());
            } catch (const std::exception& e) {
                throw PreconditionError(path + ":" + std::to_string(n) + ": bad fixture: " + e.what());
            }
        }
        return f;
    }

    std::optional<std::string> next(Role role, const std::string& hash) {
        std::lock_guard lock(mu_);
        for (const auto& key : {std::pair{role, hash}, std::pair{role, std::string("*")}}) {
            auto it = queues_.find(key);
            if (it != queues_.end() && !it->second.empty()) {
                auto out = std::move(it->second.front());
                it->second.pop_front();
                return out;
            }
        }
        return std::nullopt;
    }

private:
    std::mutex mu_;
    std::map<std::pair<Role, std::string>, std::deque<std::string>> queues_;
};

/// Deterministic stand-in for a model: maps (role, payload) to raw output text.
using MockResponder = std::function<std::string(Role, const json&)>;

inline json chat_request(const RoleConfig& cfg, const std::string& system_prompt, const std::string& user_content) {
    return {{"model", cfg.model},
            {"messages",
             json::array({{{"role", "system"}, {"content", system_prompt}}, {{"role", "user"}, {"content", user_content}}})},
            {"temperature", 0}};
}

inline std::string chat_content(const json& res) {
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw GatewayError(200, "chat response lacks choices[0].message.content");
    }
}

inline HttpOptions http_options(const RoleConfig& cfg) {
    HttpOptions o;
    o.timeout_ms = cfg.timeout_ms;
    o.max_retries = cfg.max_retries;
    o.backoff_base_ms = cfg.backoff_base_ms;
    if (!cfg.api_key_ref.empty())
        if (const char* key = std::getenv(cfg.api_key_ref.c_str())) o.bearer_token = key;
    return o;
}

class Gateway {
public:
    Gateway() {
        for (auto r : {Role::planner, Role::selector, Role::writer, Role::consolidator})
            configs_[r] = RoleConfig::defaults(r);
    }

    void configure(RoleConfig cfg) {
        cfg.validate();
        configs_[cfg.role] = std::move(cfg);
    }
    const RoleConfig& config(Role r) const { return configs_.at(r); }
    void set_mock(MockResponder m) { mock_ = std::move(m); }
    void set_fixtures(std::shared_ptr<ScriptedFixtures> f) { fixtures_ = std::move(f); }

    /// Raw model text for (role, payload). Throws GatewayError on failure.
    std::string raw_complete(Role role, const json& payload) const {
        const auto& cfg = configs_.at(role);
        calls_[static_cast<std::size_t>(role)].fetch_add(1, std::memory_order_relaxed);
        switch (cfg.backend) {
            case BackendKind::mock:
                if (!mock_) throw GatewayError(0, "no mock responder installed");
                return mock_(role, payload);
            case BackendKind::scripted: {
                if (!fixtures_) throw GatewayError(0, "no scripted fixtures installed");
                auto hash = payload_hash(payload);
                auto r = fixtures_->next(role, hash);
                if (!r) throw GatewayError(0, "scripted fixtures exhausted for " + std::string(to_string(role)) + "/" + hash);
                return *r;
            }
            case BackendKind::http: {
                auto body = chat_request(cfg, cfg.prompt_template, canonicalize(payload).dump());
                return chat_content(post_json(cfg.endpoint_url, body, http_options(cfg)));
            }
        }
        throw GatewayError(0, "unknown backend");
    }

    /// Never throws for backend or schema failures: they come back as a
    /// degraded response so the caller can fall back.
    StructuredResponse complete(Role role, const json& payload) const {
        StructuredResponse out;
        try {
            out.raw = raw_complete(role, payload);
        } catch (const GatewayError& e) {
            out.degraded = true;
            out.error = e.what();
            return out;
        }
        try {
            out.parsed = parse_structured(out.raw, role);
        } catch (const ParseError& e) {
            out.degraded = true;
            out.error = e.what();
        }
        return out;
    }

    /// Number of backend invocations made for `role`.
    std::uint64_t calls(Role role) const { return calls_[static_cast<std::size_t>(role)].load(); }
    void reset_calls() {
        for (auto& c : calls_) c.store(0);
    }

private:
    std::map<Role, RoleConfig> configs_;
    mutable std::array<std::atomic<std::uint64_t>, 4> calls_{};
    MockResponder mock_;
    std::shared_ptr<ScriptedFixtures> fixtures_;
};

/// Produces y_t from the assembled prompt. The mock echoes the top retrieved
/// summary; the http variant sends the prompt as a chat completion.
class ResponseGenerator {
public:
    ResponseGenerator() = default;
    explicit ResponseGenerator(RoleConfig http_cfg) : http_(std::move(http_cfg)) {}

    static constexpr const char* kNoMemoryAnswer = "no relevant memory";

    std::string generate(const std::string& prompt, const std::vector<std::string>& retrieved) const {
        if (!http_) return retrieved.empty() ? kNoMemoryAnswer : retrieved.front();
        auto body = chat_request(*http_, "You are a helpful assistant. Use the provided memories.", prompt);
        return chat_content(post_json(http_->endpoint_url, body, http_options(*http_)));
    }

private:
    std::optional<RoleConfig> http_;
};

}  // namespace lightmem
