#pragma once
// Shared domain types: dialogue turns, the short-term turn buffer, MTM items
// and LTM graph elements.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lightmem/text.hpp"

namespace lightmem {

/// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;
using Embedding = std::vector<float>;
using Clock = std::function<Timestamp()>;

inline Timestamp system_now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

constexpr Timestamp kMsPerDay = 24LL * 60 * 60 * 1000;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

// ---------------------------------------------------------------------------
// Degradation events: recoverable model misbehaviour, recorded rather than fatal.

struct DegradationEvent {
    std::string component;
    std::string detail;
};

class DegradationLog {
public:
    void record(std::string component, std::string detail) {
        std::lock_guard lock(mu_);
        events_.push_back({std::move(component), std::move(detail)});
    }
    std::vector<DegradationEvent> events() const {
        std::lock_guard lock(mu_);
        return events_;
    }
    std::size_t size() const {
        std::lock_guard lock(mu_);
        return events_.size();
    }
    void clear() {
        std::lock_guard lock(mu_);
        events_.clear();
    }

private:
    mutable std::mutex mu_;
    std::vector<DegradationEvent> events_;
};

// ---------------------------------------------------------------------------
// Turns and the STM buffer

struct DialogueTurn {
    std::string user_id;
    std::uint64_t turn_index = 0;
    std::string input_text;
    std::optional<std::string> response_text;
    Timestamp timestamp = 0;
};

/// Session-local window of recent turns. Deliberately has no serialization
/// surface: STM is neither persisted nor retrieved.
class StmBuffer {
public:
    static constexpr std::size_t kDefaultMaxTurns = 20;
    static constexpr std::size_t kDefaultMaxTokens = 2048;

    explicit StmBuffer(std::string user_id, std::size_t max_turns = kDefaultMaxTurns,
                       std::size_t max_tokens = kDefaultMaxTokens)
        : user_id_(std::move(user_id)), max_turns_(max_turns), max_tokens_(max_tokens) {
        if (max_turns_ == 0 || max_tokens_ == 0) throw PreconditionError("stm limits must be positive");
    }

    /// Appends `turn` as the newest entry, then drops the oldest turns until
    /// both limits hold. A single turn longer than max_tokens is cut down
    /// (response first, then input) so the budget is never exceeded.
    void append(DialogueTurn turn) {
        if (turn.user_id != user_id_) throw PreconditionError("turn belongs to another session");
        if (turn.input_text.empty()) throw PreconditionError("turn input_text must be non-empty");
        if (!turns_.empty() && turn.turn_index <= turns_.back().turn_index)
            throw PreconditionError("turn_index must strictly increase");
        fit_single(turn);
        tokens_ += content_tokens(turn);
        turns_.push_back(std::move(turn));
        while (turns_.size() > max_turns_ || tokens_ > max_tokens_) {
            tokens_ -= content_tokens(turns_.front());
            turns_.pop_front();
        }
    }

    /// One line per turn, oldest first:
    /// "[i] user: <input> / assistant: <response>".
    std::string window() const {
        std::string out;
        for (const auto& t : turns_) {
            if (!out.empty()) out += '\n';
            out += '[' + std::to_string(t.turn_index) + "] user: " + t.input_text;
            if (t.response_text) out += " / assistant: " + *t.response_text;
        }
        return out;
    }

    /// Tokens of the turn texts in the window (template markers excluded).
    std::size_t token_count() const { return tokens_; }
    std::size_t size() const { return turns_.size(); }
    bool empty() const { return turns_.empty(); }
    const std::deque<DialogueTurn>& turns() const { return turns_; }
    const std::string& user_id() const { return user_id_; }
    std::size_t max_turns() const { return max_turns_; }
    std::size_t max_tokens() const { return max_tokens_; }

    static std::size_t content_tokens(const DialogueTurn& t) {
        return text::count_tokens(t.input_text) + (t.response_text ? text::count_tokens(*t.response_text) : 0);
    }

private:
    void fit_single(DialogueTurn& t) const {
        std::size_t in = text::count_tokens(t.input_text);
        if (in >= max_tokens_) {
            t.input_text = text::first_tokens(t.input_text, max_tokens_);
            if (t.response_text) t.response_text = std::string{};
            return;
        }
        if (t.response_text && in + text::count_tokens(*t.response_text) > max_tokens_)
            t.response_text = text::first_tokens(*t.response_text, max_tokens_ - in);
    }

    std::string user_id_;
    std::size_t max_turns_;
    std::size_t max_tokens_;
    std::size_t tokens_ = 0;
    std::deque<DialogueTurn> turns_;
};

inline StmBuffer stm_append(StmBuffer buffer, DialogueTurn turn) {
    buffer.append(std::move(turn));
    return buffer;
}

inline std::string stm_window(const StmBuffer& buffer) { return buffer.window(); }

// ---------------------------------------------------------------------------
// MTM items

enum class ConsolidationFlag { none, newly_written, reactivated, low_utility };

inline std::string_view to_string(ConsolidationFlag f) {
    switch (f) {
        case ConsolidationFlag::none: return "none";
        case ConsolidationFlag::newly_written: return "newly_written";
        case ConsolidationFlag::reactivated: return "reactivated";
        case ConsolidationFlag::low_utility: return "low_utility";
    }
    return "none";
}

inline ConsolidationFlag flag_from_string(std::string_view s) {
    if (s == "none") return ConsolidationFlag::none;
    if (s == "newly_written") return ConsolidationFlag::newly_written;
    if (s == "reactivated") return ConsolidationFlag::reactivated;
    if (s == "low_utility") return ConsolidationFlag::low_utility;
    throw PreconditionError("unknown consolidation_flag: " + std::string(s));
}

struct MemoryItem {
    std::string item_id;
    std::string user_id;
    std::string summary;
    Embedding embedding;
    Timestamp created_at = 0;
    Timestamp last_accessed = 0;
    std::uint64_t access_count = 0;
    std::set<std::string> type_tags;
    double evidence_strength = 1.0;
    ConsolidationFlag consolidation_flag = ConsolidationFlag::none;

    bool operator==(const MemoryItem&) const = default;
};

// ---------------------------------------------------------------------------
// LTM graph elements

enum class NodeKind { Entity, Concept };
enum class Relation { IsA, HasProperty, RelatedTo, Implies };

inline std::string_view to_string(NodeKind k) { return k == NodeKind::Entity ? "Entity" : "Concept"; }

inline NodeKind node_kind_from_string(std::string_view s) {
    if (s == "Entity") return NodeKind::Entity;
    if (s == "Concept") return NodeKind::Concept;
    throw PreconditionError("unknown node kind: " + std::string(s));
}

inline std::string_view to_string(Relation r) {
    switch (r) {
        case Relation::IsA: return "IsA";
        case Relation::HasProperty: return "HasProperty";
        case Relation::RelatedTo: return "RelatedTo";
        case Relation::Implies: return "Implies";
    }
    return "RelatedTo";
}

inline std::optional<Relation> relation_from_string(std::string_view s) {
    if (s == "IsA") return Relation::IsA;
    if (s == "HasProperty") return Relation::HasProperty;
    if (s == "RelatedTo") return Relation::RelatedTo;
    if (s == "Implies") return Relation::Implies;
    return std::nullopt;
}

struct LtmNode {
    std::string node_id;
    NodeKind kind = NodeKind::Concept;
    std::string label;
    Embedding embedding;
    double confidence = 0.5;
    std::uint64_t evidence_count = 1;
    Timestamp created_at = 0;
    Timestamp updated_at = 0;

    bool operator==(const LtmNode&) const = default;
};

struct LtmEdge {
    std::string src;
    std::string dst;
    Relation relation = Relation::RelatedTo;
    double confidence = 0.5;

    bool operator==(const LtmEdge&) const = default;
};

enum class StoreKind { MTM, LTM };

inline std::string_view to_string(StoreKind s) { return s == StoreKind::MTM ? "MTM" : "LTM"; }

}  // namespace lightmem
