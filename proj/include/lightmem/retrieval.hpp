#pragma once
// Two-stage retrieval: metadata-constrained coarse search into a 2K pool,
// then semantic selection down to Top-K.

#include <chrono>
#include <unordered_set>

#include "lightmem/gateway.hpp"
#include "lightmem/ltm_graph.hpp"
#include "lightmem/planner.hpp"
#include "lightmem/vector_index.hpp"

namespace lightmem {

struct Candidate {
    StoreKind store = StoreKind::MTM;
    std::string id;
    std::size_t source_hq = 0;
    double coarse_score = 0;
    Timestamp created_at = 0;
    std::string summary;
    Embedding embedding;
    std::set<std::string> type_tags;

    std::string ref() const { return std::string(store == StoreKind::MTM ? "mtm:" : "ltm:") + id; }
    bool operator==(const Candidate&) const = default;
};

struct CandidateSet {
    std::vector<Candidate> entries;
    std::size_t budget = 0;  // 2K
};

struct RetrievedEntry {
    StoreKind store = StoreKind::MTM;
    std::string id;
    double final_score = 0;
    std::size_t justification = 0;  // index of the HQ this item answers
    std::string summary;
    Timestamp created_at = 0;

    std::string ref() const { return std::string(store == StoreKind::MTM ? "mtm:" : "ltm:") + id; }
    bool operator==(const RetrievedEntry&) const = default;
};

struct RetrievedSet {
    std::vector<RetrievedEntry> entries;
    std::size_t k = 0;

    std::vector<std::string> summaries() const {
        std::vector<std::string> out;
        for (const auto& e : entries) out.push_back(e.summary);
        return out;
    }
};

enum class Stage2Mode { model, fallback, bypass };

inline std::string_view to_string(Stage2Mode m) {
    return m == Stage2Mode::model ? "model" : m == Stage2Mode::fallback ? "fallback" : "bypass";
}

inline Stage2Mode stage2_from_string(std::string_view s) {
    if (s == "model") return Stage2Mode::model;
    if (s == "fallback") return Stage2Mode::fallback;
    if (s == "bypass") return Stage2Mode::bypass;
    throw PreconditionError("unknown stage2 mode: " + std::string(s));
}

struct Stores {
    MtmStore& mtm;
    std::shared_ptr<const LtmGraph> ltm;
};

inline bool candidate_before(const Candidate& a, const Candidate& b) {
    if (ranks_before(a.coarse_score, a.created_at, a.ref(), b.coarse_score, b.created_at, b.ref())) return true;
    return false;
}

/// Stage 1. Each HQ searches its routed store with its own quota under the
/// plan filter; the union is deduplicated (attribution to the lowest HQ
/// index, score = best seen) and cut to 2K by the global ranking.
inline CandidateSet stage1_coarse(const RetrievalPlan& plan, Stores stores, Timestamp now) {
    CandidateSet c;
    c.budget = 2 * plan.k;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < plan.hqs.size(); ++i) {
        const auto& hq = plan.hqs[i];
        if (!plan.filter.includes(hq.route)) continue;
        std::vector<Candidate> found;
        if (hq.route == StoreKind::MTM) {
            auto hits = stores.mtm.search(hq.embedding, plan.filter, hq.quota, now);
            stores.mtm.with_user(plan.filter.user_id, [&](const MtmPartition& p) {
                for (const auto& h : hits) {
                    const auto* it = p.find(h.id);
                    if (!it) continue;
                    found.push_back({StoreKind::MTM, it->item_id, i, h.score, it->created_at, it->summary,
                                     it->embedding, it->type_tags});
                }
            });
        } else if (stores.ltm) {
            for (const auto& h : stores.ltm->search(hq.embedding, hq.quota)) {
                const auto* n = stores.ltm->find(h.id);
                found.push_back({StoreKind::LTM, n->node_id, i, h.score, n->created_at, n->label, n->embedding, {}});
            }
        }
        for (auto& f : found) {
            auto ref = f.ref();
            auto it = seen.find(ref);
            if (it == seen.end()) {
                seen.emplace(ref, c.entries.size());
                c.entries.push_back(std::move(f));
            } else {
                auto& prev = c.entries[it->second];
                prev.coarse_score = std::max(prev.coarse_score, f.coarse_score);
            }
        }
    }
    std::sort(c.entries.begin(), c.entries.end(), candidate_before);
    if (c.entries.size() > c.budget) c.entries.resize(c.budget);
    return c;
}

/// Max cosine between the candidate and any HQ, plus the index of that HQ.
inline std::pair<double, std::size_t> best_hq_score(const Candidate& cand, const RetrievalPlan& plan) {
    double best = -2.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < plan.hqs.size(); ++i) {
        double s = cosine(cand.embedding, plan.hqs[i].embedding);
        if (s > best) {
            best = s;
            idx = i;
        }
    }
    return {best, idx};
}

inline std::vector<RetrievedEntry> rank_by_fallback(const RetrievalPlan& plan, const std::vector<const Candidate*>& cands) {
    std::vector<RetrievedEntry> out;
    for (const auto* c : cands) {
        auto [s, idx] = best_hq_score(*c, plan);
        out.push_back({c->store, c->id, s, idx, c->summary, c->created_at});
    }
    std::sort(out.begin(), out.end(), [](const RetrievedEntry& a, const RetrievedEntry& b) {
        return ranks_before(a.final_score, a.created_at, a.ref(), b.final_score, b.created_at, b.ref());
    });
    return out;
}

inline json selector_payload(const RetrievalPlan& plan, const CandidateSet& c) {
    json hqs = json::array();
    for (const auto& h : plan.hqs) hqs.push_back(h.text);
    json cands = json::array();
    for (const auto& e : c.entries)
        cands.push_back({{"id", e.ref()},
                         {"summary", e.summary},
                         {"store", std::string(to_string(e.store))},
                         {"created_at", e.created_at},
                         {"type_tags", e.type_tags}});
    return {{"hqs", hqs}, {"k", plan.k}, {"candidates", cands}};
}

/// Stage 2. Selects at most K entries of `c`:
///  - bypass:   the coarse Top-K as-is;
///  - fallback: max cosine to any HQ, Top-K;
///  - model:    the selector role returns kept ids in its own order; ids
///              outside C are dropped, overflow is cut by fallback score; a
///              degraded call falls back. Skipped when |C| <= K.
/// Never rewrites candidate content.
inline RetrievedSet stage2_filter(const RetrievalPlan& plan, const CandidateSet& c, Stage2Mode mode,
                                  const Gateway* gateway = nullptr, DegradationLog* log = nullptr) {
    RetrievedSet r;
    r.k = plan.k;
    std::vector<const Candidate*> all;
    for (const auto& e : c.entries) all.push_back(&e);

    if (mode == Stage2Mode::bypass) {
        std::vector<const Candidate*> sorted = all;
        std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return candidate_before(*a, *b); });
        for (std::size_t i = 0; i < sorted.size() && i < plan.k; ++i)
            r.entries.push_back({sorted[i]->store, sorted[i]->id, sorted[i]->coarse_score, sorted[i]->source_hq,
                                 sorted[i]->summary, sorted[i]->created_at});
        return r;
    }

    if (all.size() <= plan.k || mode == Stage2Mode::fallback || !gateway) {
        r.entries = rank_by_fallback(plan, all);
        if (r.entries.size() > plan.k) r.entries.resize(plan.k);
        return r;
    }

    auto resp = gateway->complete(Role::selector, selector_payload(plan, c));
    if (resp.degraded || !resp.parsed) {
        if (log) log->record("selector", resp.error);
        r.entries = rank_by_fallback(plan, all);
        if (r.entries.size() > plan.k) r.entries.resize(plan.k);
        return r;
    }
    std::unordered_map<std::string, const Candidate*> by_ref;
    for (const auto* e : all) by_ref.emplace(e->ref(), e);
    std::vector<const Candidate*> kept;
    std::unordered_set<std::string> taken;
    std::size_t unknown = 0;
    for (const auto& id : std::get<SelectorOutput>(*resp.parsed).keep_ids) {
        auto it = by_ref.find(id);
        if (it == by_ref.end()) {
            ++unknown;
            continue;
        }
        if (taken.insert(id).second) kept.push_back(it->second);
    }
    if (unknown && log) log->record("selector", std::to_string(unknown) + " kept id(s) outside the candidate set");
    std::vector<RetrievedEntry> selected;
    for (const auto* c : kept) {
        auto [s, idx] = best_hq_score(*c, plan);
        selected.push_back({c->store, c->id, s, idx, c->summary, c->created_at});
    }
    if (selected.size() > plan.k) {
        if (log) log->record("selector", "kept more than k ids; truncated by fallback score");
        auto by_score = rank_by_fallback(plan, kept);
        std::unordered_set<std::string> top;
        for (std::size_t i = 0; i < plan.k; ++i) top.insert(by_score[i].ref());
        std::erase_if(selected, [&](const RetrievedEntry& e) { return !top.count(e.ref()); });
    }
    r.entries = std::move(selected);
    return r;
}

struct RetrievalResult {
    CandidateSet candidates;
    RetrievedSet retrieved;
    double elapsed_ms = 0;
};

inline RetrievalResult retrieve(const RetrievalPlan& plan, Stores stores, Stage2Mode mode, Timestamp now,
                                const Gateway* gateway = nullptr, DegradationLog* log = nullptr) {
    plan.validate(std::max(plan.hqs.size(), kDefaultMaxHqs));
    auto t0 = std::chrono::steady_clock::now();
    RetrievalResult out;
    out.candidates = stage1_coarse(plan, stores, now);
    out.retrieved = stage2_filter(plan, out.candidates, mode, gateway, log);
    out.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace lightmem
