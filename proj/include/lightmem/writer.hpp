#pragma once
// Turn summarization into MTM and the online maintenance pass: merge,
// conflict resolution, capacity-bound eviction.

#include <cmath>
#include <unordered_set>

#include "lightmem/gateway.hpp"
#include "lightmem/planner.hpp"
#include "lightmem/vector_index.hpp"

namespace lightmem {

struct MtmConfig {
    std::size_t capacity_b = 10000;
    double merge_threshold = 0.9;
    std::size_t eviction_batch = 64;  // pending low-utility items that force a consolidation

    void validate() const {
        if (capacity_b < 1) throw PreconditionError("capacity_b must be >= 1");
        if (!(merge_threshold > 0.0 && merge_threshold <= 1.0)) throw PreconditionError("merge_threshold outside (0,1]");
        if (eviction_batch < 1) throw PreconditionError("eviction_batch must be >= 1");
    }
};

constexpr double kUtilityAccessWeight = 0.5;
constexpr double kUtilityRecencyWeight = 0.5;
constexpr double kRecencyScaleMs = 7.0 * kMsPerDay;

inline double utility_score(std::uint64_t access_count, Timestamp last_accessed, Timestamp now) {
    double dt = static_cast<double>(std::max<Timestamp>(0, now - last_accessed));
    return kUtilityAccessWeight * std::log1p(static_cast<double>(access_count)) +
           kUtilityRecencyWeight * std::exp(-dt / kRecencyScaleMs);
}

inline double utility_score(const MemoryItem& it, Timestamp now) {
    return utility_score(it.access_count, it.last_accessed, now);
}

// ---------------------------------------------------------------------------
// Negation check for conflicts

inline const std::vector<Phrase>& negation_markers() {
    static const std::vector<Phrase> kMarkers = {
        {"not"},    {"no"},      {"never"},  {"don't"}, {"doesn't"}, {"didn't"}, {"isn't"},
        {"aren't"}, {"wasn't"},  {"won't"},  {"can't"}, {"cannot"},  {"nor"},    {"dislike"},
        {"dislikes"}, {"hate"},  {"hates"},  {"stopped"}, {"quit"},  {"no", "longer"}, {"anymore"}};
    return kMarkers;
}

inline bool has_negation(std::string_view s) { return Lexicon::fires(text::normalized_tokens(s), negation_markers()); }

inline bool negation_diverges(std::string_view a, std::string_view b) { return has_negation(a) != has_negation(b); }

// ---------------------------------------------------------------------------
// Summarization

inline json writer_payload(const DialogueTurn& turn, const StmBuffer& context) {
    return {{"user_id", turn.user_id},
            {"turn_index", turn.turn_index},
            {"input", turn.input_text},
            {"response", turn.response_text.value_or("")},
            {"context", context.window()}};
}

/// Zero or more summaries of a completed turn. A failed or unparsable
/// backend call yields nothing (and a degradation event), never a write.
inline std::vector<std::string> summarize_turn(const DialogueTurn& turn, const StmBuffer& context,
                                               const Gateway& gateway, DegradationLog* log = nullptr) {
    if (!turn.response_text || text::normalize_space(*turn.response_text).empty())
        throw PreconditionError("summarize_turn: turn has no response");
    auto resp = gateway.complete(Role::writer, writer_payload(turn, context));
    if (resp.degraded || !resp.parsed) {
        if (log) log->record("writer", resp.error);
        return {};
    }
    std::vector<std::string> out;
    for (const auto& s : std::get<WriterOutput>(*resp.parsed).summaries) {
        auto n = text::normalize_space(s);
        if (!n.empty()) out.push_back(std::move(n));
    }
    return out;
}

/// Tags attached to freshly written items.
inline std::set<std::string> infer_type_tags(std::string_view summary, const Lexicon& lx = Lexicon::builtin()) {
    static const std::vector<Phrase> kPref = {{"prefer"}, {"prefers"}, {"like"}, {"likes"}, {"love"},
                                              {"loves"},  {"favorite"}, {"favourite"}, {"hate"}, {"dislike"}};
    auto toks = text::normalized_tokens(summary);
    std::set<std::string> tags;
    if (Lexicon::fires(toks, kPref)) tags.insert("preference");
    if (Lexicon::fires(toks, lx.factual)) tags.insert("fact");
    if (tags.empty()) tags.insert("episode");
    return tags;
}

// ---------------------------------------------------------------------------
// Maintenance

/// Folds `incoming` into `existing` (same fact seen again). Commutes with
/// repetition: a fresh item merged any number of times gives the same result.
inline MemoryItem merge_items(const MemoryItem& existing, const MemoryItem& incoming) {
    MemoryItem m = existing;
    m.access_count = existing.access_count + incoming.access_count;
    m.last_accessed = std::max(existing.last_accessed, incoming.last_accessed);
    m.created_at = std::min(existing.created_at, incoming.created_at);
    m.evidence_strength = std::max(existing.evidence_strength, incoming.evidence_strength);
    m.type_tags.insert(incoming.type_tags.begin(), incoming.type_tags.end());
    if (m.consolidation_flag == ConsolidationFlag::none) m.consolidation_flag = ConsolidationFlag::reactivated;
    return m;
}

/// Newer wins unless the older carries at least twice the evidence. The
/// loser's access stats fold into the winner, whose evidence becomes
/// max(inputs) + 1. Equal timestamps count `incoming` as newer.
inline MemoryItem resolve_conflict(const MemoryItem& existing, const MemoryItem& incoming) {
    bool incoming_newer = incoming.created_at >= existing.created_at;
    const MemoryItem& newer = incoming_newer ? incoming : existing;
    const MemoryItem& older = incoming_newer ? existing : incoming;
    bool older_wins = older.evidence_strength >= 2.0 * newer.evidence_strength;
    const MemoryItem& win = older_wins ? older : newer;
    const MemoryItem& lose = older_wins ? newer : older;
    MemoryItem out = win;
    out.access_count = win.access_count + lose.access_count;
    out.last_accessed = std::max(win.last_accessed, lose.last_accessed);
    out.evidence_strength = std::max(existing.evidence_strength, incoming.evidence_strength) + 1.0;
    return out;
}

/// Evicts in ascending utility (ties: oldest created_at, then id) until the
/// partition fits. Items in `protect` are never chosen. Returns evicted items
/// with their flags as they should be handed on: evidence >= 2 become
/// low_utility.
inline std::vector<MemoryItem> evict(MtmPartition& part, const MtmConfig& cfg, Timestamp now,
                                     const std::unordered_set<std::string>& protect = {}) {
    std::vector<MemoryItem> evicted;
    if (part.size() <= cfg.capacity_b) return evicted;
    struct Key {
        double u;
        Timestamp created;
        std::string id;
    };
    std::vector<Key> keys;
    keys.reserve(part.size());
    for (const auto& it : part.items())
        if (!protect.count(it.item_id)) keys.push_back({utility_score(it, now), it.created_at, it.item_id});
    std::size_t excess = part.size() - cfg.capacity_b;
    excess = std::min(excess, keys.size());
    auto cmp = [](const Key& a, const Key& b) {
        if (a.u != b.u) return a.u < b.u;
        if (a.created != b.created) return a.created < b.created;
        return a.id < b.id;
    };
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(excess), keys.end(), cmp);
    for (std::size_t i = 0; i < excess; ++i) {
        auto item = part.erase(keys[i].id);
        if (!item) continue;
        if (item->evidence_strength >= 2.0) item->consolidation_flag = ConsolidationFlag::low_utility;
        evicted.push_back(std::move(*item));
    }
    return evicted;
}

enum class WriteOutcome { inserted, merged, conflict_resolved };

inline std::string_view to_string(WriteOutcome o) {
    return o == WriteOutcome::inserted ? "inserted" : o == WriteOutcome::merged ? "merged" : "conflict_resolved";
}

struct WriteDelta {
    WriteOutcome outcome = WriteOutcome::inserted;
    std::string item_id;  // id of the item that now holds the written content
    std::string replaced_id;  // set when a conflict replaced an existing item
    std::vector<std::string> evicted;
    std::vector<std::string> handed_to_consolidator;
};

/// Appends `item` to its user's partition and runs maintenance
/// (merge -> conflict -> evict). |partition| <= capacity_b afterwards.
inline WriteDelta write_mtm(MtmStore& store, MemoryItem item, const MtmConfig& cfg, Timestamp now) {
    cfg.validate();
    if (item.user_id.empty()) throw PreconditionError("write_mtm: user_id is required");
    if (item.embedding.size() != store.dimension())
        throw PreconditionError("write_mtm: embedding dimension " + std::to_string(item.embedding.size()) +
                                " != store dimension " + std::to_string(store.dimension()));
    if (text::normalize_space(item.summary).empty()) throw PreconditionError("write_mtm: empty summary");
    inverse_norm(item.embedding);
    if (item.item_id.empty())
        item.item_id = store.next_id();
    else
        store.observe_id(item.item_id);
    if (item.created_at == 0) item.created_at = now;
    if (item.last_accessed == 0) item.last_accessed = item.created_at;
    item.consolidation_flag = ConsolidationFlag::newly_written;

    WriteDelta delta;
    std::vector<MemoryItem> to_pending;
    store.with_user(item.user_id, [&](MtmPartition& part) {
        double best_score = 0;
        const MemoryItem* best = part.best_match(item.embedding, &best_score);
        if (best && best_score >= cfg.merge_threshold) {
            const MemoryItem existing = *best;
            if (negation_diverges(existing.summary, item.summary)) {
                auto winner = resolve_conflict(existing, item);
                delta.outcome = WriteOutcome::conflict_resolved;
                if (winner.item_id == item.item_id) {
                    winner.consolidation_flag = ConsolidationFlag::newly_written;
                    delta.replaced_id = existing.item_id;
                } else if (winner.consolidation_flag == ConsolidationFlag::none) {
                    winner.consolidation_flag = ConsolidationFlag::reactivated;
                }
                delta.item_id = winner.item_id;
                part.replace(existing.item_id, std::move(winner));
            } else {
                auto merged = merge_items(existing, item);
                delta.outcome = WriteOutcome::merged;
                delta.item_id = merged.item_id;
                part.replace(existing.item_id, std::move(merged));
            }
        } else {
            delta.item_id = item.item_id;
            part.insert(std::move(item));
        }
        for (auto& ev : evict(part, cfg, now, {delta.item_id})) {
            delta.evicted.push_back(ev.item_id);
            if (ev.consolidation_flag == ConsolidationFlag::low_utility) {
                delta.handed_to_consolidator.push_back(ev.item_id);
                to_pending.push_back(std::move(ev));
            }
        }
    });
    for (auto& p : to_pending) store.push_pending(std::move(p));
    return delta;
}

}  // namespace lightmem
