#pragma once
// Offline consolidation: flagged MTM episodes -> de-identified candidates ->
// LTM graph, with evidence accumulation, confidence decay and forgetting.

#include <unordered_set>

#include "lightmem/gateway.hpp"
#include "lightmem/ltm_graph.hpp"
#include "lightmem/vector_index.hpp"

namespace lightmem {

struct KnowledgeCandidate {
    std::string statement;
    Embedding embedding;
    NodeKind proposed_kind = NodeKind::Concept;
    std::vector<std::pair<Relation, std::string>> proposed_edges;
    std::vector<std::string> source_item_ids;
};

struct ConsolidationConfig {
    std::size_t trigger_interval_turns = 12;
    std::size_t anchor_k = 5;
    double merge_threshold = 0.9;
    double decay_lambda = 0.95;
    double drop_floor = 0.1;
    double link_threshold = 0.5;
    double merge_bump = 0.05;
    double initial_confidence = 0.5;
    bool enabled = true;

    void validate() const {
        if (trigger_interval_turns < 1) throw PreconditionError("trigger_interval_turns must be >= 1");
        if (anchor_k < 1) throw PreconditionError("anchor_k must be >= 1");
        if (!(decay_lambda > 0.0 && decay_lambda < 1.0)) throw PreconditionError("decay_lambda outside (0,1)");
        if (!(drop_floor < 1.0)) throw PreconditionError("drop_floor must be < 1");
        if (!(merge_threshold > 0.0 && merge_threshold <= 1.0)) throw PreconditionError("merge_threshold outside (0,1]");
        if (initial_confidence < 0.0 || initial_confidence > 1.0) throw PreconditionError("initial_confidence outside [0,1]");
    }
};

/// Flagged items of every user plus the evicted low-utility queue. Flags of
/// selected items are cleared.
inline std::vector<MemoryItem> select_batch(MtmStore& store) {
    std::vector<MemoryItem> batch;
    for (const auto& u : store.users()) {
        store.with_user(u, [&](MtmPartition& part) {
            for (auto& it : part.mutable_items()) {
                if (it.consolidation_flag == ConsolidationFlag::none) continue;
                batch.push_back(it);
                it.consolidation_flag = ConsolidationFlag::none;
            }
        });
    }
    for (auto& p : store.take_pending()) batch.push_back(std::move(p));
    return batch;
}

/// Substring match for ids of 3+ characters; shorter ids would hit ordinary
/// words, so they only match whole tokens (or their possessive).
inline bool mentions_any(std::string_view statement, const std::vector<std::string>& user_ids) {
    auto low = text::to_lower(statement);
    auto toks = text::normalized_tokens(statement);
    for (const auto& u : user_ids) {
        if (u.empty()) continue;
        auto id = text::to_lower(u);
        if (id.size() >= 3) {
            if (low.find(id) != std::string::npos) return true;
            continue;
        }
        for (const auto& t : toks)
            if (t == id || t == id + "'s") return true;
    }
    return false;
}

inline json consolidator_payload(const MemoryItem& item) {
    return {{"item_id", item.item_id}, {"user_id", item.user_id}, {"summary", item.summary}};
}

/// Candidates abstracted from one episode. Anything that still names a known
/// user after the backend's redaction is discarded.
inline std::vector<KnowledgeCandidate> abstract_episode(const MemoryItem& item, const Gateway& gateway,
                                                        const Embedder& embedder,
                                                        const std::vector<std::string>& known_users,
                                                        DegradationLog* log = nullptr) {
    if (text::normalize_space(item.summary).empty()) throw PreconditionError("abstract_episode: empty summary");
    auto resp = gateway.complete(Role::consolidator, consolidator_payload(item));
    if (resp.degraded || !resp.parsed) {
        if (log) log->record("consolidator", resp.error);
        return {};
    }
    std::vector<std::string> ids = known_users;
    ids.push_back(item.user_id);
    std::vector<KnowledgeCandidate> out;
    for (const auto& d : std::get<ConsolidatorOutput>(*resp.parsed).candidates) {
        auto statement = text::normalize_space(d.statement);
        if (statement.empty()) continue;
        if (mentions_any(statement, ids)) {
            if (log) log->record("consolidator", "candidate still names a user; discarded");
            continue;
        }
        KnowledgeCandidate c;
        c.embedding = embedder.embed(statement);
        c.statement = std::move(statement);
        c.proposed_kind = d.kind;
        c.proposed_edges = d.edges;
        c.source_item_ids = {item.item_id};
        out.push_back(std::move(c));
    }
    return out;
}

enum class IntegrationKind { inserted, merged, dropped };

inline std::string_view to_string(IntegrationKind k) {
    return k == IntegrationKind::inserted ? "inserted" : k == IntegrationKind::merged ? "merged" : "dropped";
}

struct IntegrationResult {
    IntegrationKind kind = IntegrationKind::dropped;
    std::string node_id;
    std::size_t edges_added = 0;
};

/// Statements merged so far in the current batch.
using BatchMerges = std::unordered_set<std::string>;

inline IntegrationResult integrate_candidate(const KnowledgeCandidate& cand, LtmGraph& graph,
                                             const ConsolidationConfig& cfg, Timestamp now, BatchMerges* merges = nullptr) {
    IntegrationResult r;
    auto key = text::to_lower(text::normalize_space(cand.statement));
    if (key.empty()) return r;
    if (cand.embedding.size() != graph.dimension()) throw PreconditionError("candidate dimension mismatch");

    auto anchors = graph.search(cand.embedding, cfg.anchor_k);
    if (!anchors.empty() && anchors.front().score >= cfg.merge_threshold) {
        if (merges && merges->count(key)) return r;
        auto* node = graph.find(anchors.front().id);
        node->evidence_count += 1;
        node->confidence = std::min(1.0, node->confidence + cfg.merge_bump);
        node->updated_at = std::max(node->updated_at, now);
        if (merges) merges->insert(key);
        r.kind = IntegrationKind::merged;
        r.node_id = node->node_id;
        return r;
    }

    LtmNode n;
    n.node_id = graph.next_node_id();
    n.kind = cand.proposed_kind;
    n.label = text::normalize_space(cand.statement);
    n.embedding = cand.embedding;
    n.confidence = cfg.initial_confidence;
    n.evidence_count = 1;
    n.created_at = now;
    n.updated_at = now;
    graph.add_node(n);
    r.kind = IntegrationKind::inserted;
    r.node_id = n.node_id;
    for (const auto& a : anchors) {
        if (a.score < cfg.link_threshold) continue;
        if (graph.add_edge({n.node_id, a.id, Relation::RelatedTo, std::clamp(a.score, 0.0, 1.0)})) ++r.edges_added;
    }
    for (const auto& [rel, target] : cand.proposed_edges) {
        const auto* t = graph.find_by_label(target);
        if (!t) continue;
        if (graph.add_edge({n.node_id, t->node_id, rel, cfg.initial_confidence})) ++r.edges_added;
    }
    return r;
}

/// One decay step: evidence-1 nodes lose confidence by decay_lambda; nodes
/// under drop_floor go, with their edges.
inline std::vector<std::string> decay_and_forget(LtmGraph& graph, const ConsolidationConfig& cfg) {
    std::unordered_set<std::string> drop;
    std::vector<std::string> removed;
    for (const auto& n : graph.nodes()) {
        auto* m = graph.find(n.node_id);
        if (m->evidence_count == 1) m->confidence *= cfg.decay_lambda;
        if (m->confidence < cfg.drop_floor) {
            drop.insert(m->node_id);
            removed.push_back(m->node_id);
        }
    }
    graph.remove_nodes(drop);
    return removed;
}

struct CycleReport {
    std::size_t batch_size = 0;
    std::size_t candidates = 0;
    std::size_t inserted = 0;
    std::size_t merged = 0;
    std::size_t dropped = 0;
    std::vector<std::string> removed;
    std::chrono::nanoseconds commit_time{};
    double cycle_ms = 0;
    bool published = false;
};

/// Runs cycles against a snapshot of LTM and publishes the result in one
/// swap. At most one cycle is in flight; a concurrent request returns nullopt.
class Consolidator {
public:
    Consolidator(MtmStore& mtm, LtmStore& ltm, const Embedder& embedder, const Gateway& gateway,
                 ConsolidationConfig cfg = {}, DegradationLog* log = nullptr)
        : mtm_(mtm), ltm_(ltm), embedder_(embedder), gateway_(gateway), cfg_(cfg), log_(log) {
        cfg_.validate();
    }

    const ConsolidationConfig& config() const { return cfg_; }

    std::optional<CycleReport> run_cycle(Timestamp now) {
        std::unique_lock lock(cycle_mu_, std::try_to_lock);
        if (!lock.owns_lock()) return std::nullopt;
        return run_locked(now);
    }

    /// Waits for any in-flight cycle, then runs one.
    CycleReport run_cycle_blocking(Timestamp now) {
        std::lock_guard lock(cycle_mu_);
        return run_locked(now);
    }

    std::uint64_t cycles() const { return cycles_.load(); }

private:
    CycleReport run_locked(Timestamp now) {
        auto t0 = std::chrono::steady_clock::now();
        CycleReport rep;
        auto batch = select_batch(mtm_);
        rep.batch_size = batch.size();
        if (batch.empty()) return rep;

        auto known = mtm_.users();
        auto next = std::make_shared<LtmGraph>(*ltm_.snapshot());
        BatchMerges merges;
        for (const auto& item : batch) {
            if (text::normalize_space(item.summary).empty()) continue;
            for (const auto& cand : abstract_episode(item, gateway_, embedder_, known, log_)) {
                ++rep.candidates;
                auto res = integrate_candidate(cand, *next, cfg_, now, &merges);
                if (res.kind == IntegrationKind::inserted) ++rep.inserted;
                else if (res.kind == IntegrationKind::merged) ++rep.merged;
                else ++rep.dropped;
            }
        }
        rep.removed = decay_and_forget(*next, cfg_);
        rep.commit_time = ltm_.publish(std::move(next));
        rep.published = true;
        ++cycles_;
        rep.cycle_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    }

    MtmStore& mtm_;
    LtmStore& ltm_;
    const Embedder& embedder_;
    const Gateway& gateway_;
    ConsolidationConfig cfg_;
    DegradationLog* log_;
    std::mutex cycle_mu_;
    std::atomic<std::uint64_t> cycles_{0};
};

}  // namespace lightmem
