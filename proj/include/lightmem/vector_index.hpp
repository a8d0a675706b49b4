#pragma once
// Metadata-filtered exact top-k similarity search and the per-user MTM store.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>

#include "lightmem/core.hpp"
#include "lightmem/embedding.hpp"

namespace lightmem {

enum class TargetStore { MTM, LTM, both };

inline std::string_view to_string(TargetStore t) {
    switch (t) {
        case TargetStore::MTM: return "MTM";
        case TargetStore::LTM: return "LTM";
        case TargetStore::both: return "both";
    }
    return "both";
}

struct TimeWindow {
    Timestamp start = 0;
    Timestamp end = 0;
    bool operator==(const TimeWindow&) const = default;
};

/// Constraints applied to every search. Time window and type tags restrict
/// MTM items only; LTM nodes are user-agnostic and carry no episodic metadata.
struct MetadataFilter {
    std::string user_id;
    std::optional<TimeWindow> time_window;
    std::set<std::string> type_tags;  // item must carry at least one when non-empty
    TargetStore target_store = TargetStore::both;

    void validate() const {
        if (user_id.empty()) throw PreconditionError("filter.user_id is required");
        if (time_window && time_window->start > time_window->end)
            throw PreconditionError("filter time_window start > end");
    }

    bool includes(StoreKind s) const {
        return target_store == TargetStore::both || (s == StoreKind::MTM) == (target_store == TargetStore::MTM);
    }

    bool matches(const MemoryItem& item) const {
        if (item.user_id != user_id) return false;
        if (time_window && (item.created_at < time_window->start || item.created_at > time_window->end))
            return false;
        if (!type_tags.empty()) {
            bool any = false;
            for (const auto& t : type_tags) any = any || item.type_tags.count(t) > 0;
            if (!any) return false;
        }
        return true;
    }

    bool operator==(const MetadataFilter&) const = default;
};

struct ScoredRef {
    StoreKind store = StoreKind::MTM;
    std::string id;
    double score = 0;
    Timestamp created_at = 0;

    bool operator==(const ScoredRef&) const = default;
};

/// Global ranking order: higher score, then newer created_at, then smaller id.
inline bool ranks_before(double sa, Timestamp ca, std::string_view ia, double sb, Timestamp cb, std::string_view ib) {
    if (sa != sb) return sa > sb;
    if (ca != cb) return ca > cb;
    return ia < ib;
}

inline bool ranks_before(const ScoredRef& a, const ScoredRef& b) {
    return ranks_before(a.score, a.created_at, a.id, b.score, b.created_at, b.id);
}

inline void keep_top(std::vector<ScoredRef>& hits, std::size_t k) {
    auto cmp = [](const ScoredRef& a, const ScoredRef& b) { return ranks_before(a, b); };
    if (hits.size() > k) {
        std::nth_element(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), cmp);
        hits.resize(k);
    }
    std::sort(hits.begin(), hits.end(), cmp);
}

inline double inverse_norm(std::span<const float> v) {
    double n = l2_norm(v);
    if (n == 0.0) throw PreconditionError("zero-norm embedding");
    return 1.0 / n;
}

/// One user's MTM items. Item order is insertion order modulo swap-removal,
/// which keeps snapshots deterministic.
class MtmPartition {
public:
    explicit MtmPartition(std::string user_id) : user_id_(std::move(user_id)) {}

    const std::string& user_id() const { return user_id_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const std::vector<MemoryItem>& items() const { return items_; }

    const MemoryItem* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &items_[it->second];
    }
    MemoryItem* find(const std::string& id) {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &items_[it->second];
    }

    void insert(MemoryItem item) {
        if (item.user_id != user_id_) throw PreconditionError("item belongs to another user partition");
        if (index_.count(item.item_id)) throw PreconditionError("duplicate item_id " + item.item_id);
        inv_norms_.push_back(inverse_norm(item.embedding));
        index_.emplace(item.item_id, items_.size());
        items_.push_back(std::move(item));
    }

    /// Replaces content of an existing item; the embedding may change.
    void replace(const std::string& id, MemoryItem item) {
        auto it = index_.find(id);
        if (it == index_.end()) throw PreconditionError("no item " + id);
        if (item.item_id != id) {
            if (index_.count(item.item_id)) throw PreconditionError("duplicate item_id " + item.item_id);
            auto pos = it->second;
            index_.erase(it);
            index_.emplace(item.item_id, pos);
            it = index_.find(item.item_id);
        }
        inv_norms_[it->second] = inverse_norm(item.embedding);
        items_[it->second] = std::move(item);
    }

    std::optional<MemoryItem> erase(const std::string& id) {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        std::size_t pos = it->second;
        index_.erase(it);
        MemoryItem out = std::move(items_[pos]);
        if (pos + 1 != items_.size()) {
            items_[pos] = std::move(items_.back());
            inv_norms_[pos] = inv_norms_.back();
            index_[items_[pos].item_id] = pos;
        }
        items_.pop_back();
        inv_norms_.pop_back();
        return out;
    }

    /// Exact top-k over items passing `filter`. Does not touch access stats.
    std::vector<ScoredRef> rank(std::span<const float> query, const MetadataFilter& filter, std::size_t k) const {
        std::vector<ScoredRef> hits;
        if (k == 0 || items_.empty()) return hits;
        double qinv = inverse_norm(query);
        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(items_.size());
        for (std::size_t i = 0; i < items_.size(); ++i) {
            const auto& it = items_[i];
            if (!filter.matches(it)) continue;
            if (it.embedding.size() != query.size()) throw PreconditionError("search: dimension mismatch");
            scored.emplace_back(dot(query, it.embedding) * qinv * inv_norms_[i], i);
        }
        auto cmp = [&](const std::pair<double, std::size_t>& a, const std::pair<double, std::size_t>& b) {
            const auto& x = items_[a.second];
            const auto& y = items_[b.second];
            return ranks_before(a.first, x.created_at, x.item_id, b.first, y.created_at, y.item_id);
        };
        std::size_t n = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), cmp);
        hits.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& it = items_[scored[i].second];
            hits.push_back({StoreKind::MTM, it.item_id, scored[i].first, it.created_at});
        }
        return hits;
    }

    /// Most similar item (global tie-break) or nullptr when empty.
    const MemoryItem* best_match(std::span<const float> query, double* score) const {
        if (items_.empty()) return nullptr;
        double qinv = inverse_norm(query);
        std::size_t best = 0;
        double best_s = -2.0;
        for (std::size_t i = 0; i < items_.size(); ++i) {
            if (items_[i].embedding.size() != query.size()) throw PreconditionError("dimension mismatch");
            double sc = dot(query, items_[i].embedding) * qinv * inv_norms_[i];
            const auto& a = items_[i];
            const auto& b = items_[best];
            if (i == 0 || ranks_before(sc, a.created_at, a.item_id, best_s, b.created_at, b.item_id)) {
                best = i;
                best_s = sc;
            }
        }
        if (score) *score = best_s;
        return &items_[best];
    }

    /// Marks a retrieval hit: bumps access stats and flags the item as
    /// reactivated for the next consolidation cycle.
    void touch(const std::string& id, Timestamp now) {
        auto* it = find(id);
        if (!it) return;
        it->access_count += 1;
        it->last_accessed = std::max(it->last_accessed, now);
        if (it->consolidation_flag == ConsolidationFlag::none) it->consolidation_flag = ConsolidationFlag::reactivated;
    }

    std::vector<MemoryItem>& mutable_items() { return items_; }

private:
    std::string user_id_;
    std::vector<MemoryItem> items_;
    std::vector<double> inv_norms_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// All users' MTM partitions. Writes are serialized per partition; searches on
/// different users proceed concurrently.
class MtmStore {
public:
    explicit MtmStore(std::size_t dimension) : dim_(dimension) {}

    std::size_t dimension() const { return dim_; }

    /// Runs `fn(MtmPartition&)` under the user's partition lock, creating the
    /// partition on first use.
    template <class Fn>
    decltype(auto) with_user(const std::string& user_id, Fn&& fn) {
        auto& slot = slot_for(user_id);
        std::lock_guard lock(slot.mu);
        return fn(slot.part);
    }

    template <class Fn>
    decltype(auto) with_user(const std::string& user_id, Fn&& fn) const {
        static const MtmPartition kEmpty{""};
        const Slot* slot = find_slot(user_id);
        if (!slot) return fn(kEmpty);
        std::lock_guard lock(slot->mu);
        return fn(static_cast<const MtmPartition&>(slot->part));
    }

    /// Metadata-filtered search over filter.user_id's partition. Returned items
    /// get access_count+1 and last_accessed = now.
    std::vector<ScoredRef> search(std::span<const float> query, const MetadataFilter& filter, std::size_t k,
                                  Timestamp now) {
        if (query.size() != dim_) throw PreconditionError("search: query dimension mismatch");
        filter.validate();
        Slot* slot = find_slot(filter.user_id);
        if (!slot) return {};
        std::lock_guard lock(slot->mu);
        auto hits = slot->part.rank(query, filter, k);
        for (const auto& h : hits) slot->part.touch(h.id, now);
        return hits;
    }

    std::vector<std::string> users() const {
        std::shared_lock lock(map_mu_);
        std::vector<std::string> out;
        for (const auto& [u, _] : slots_) out.push_back(u);
        return out;
    }

    std::size_t size(const std::string& user_id) const {
        return with_user(user_id, [](const MtmPartition& p) { return p.size(); });
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& u : users()) n += size(u);
        return n;
    }

    std::string next_id() {
        std::lock_guard lock(id_mu_);
        auto n = ++id_counter_;
        std::string digits = std::to_string(n);
        return "m" + std::string(digits.size() < 8 ? 8 - digits.size() : 0, '0') + digits;
    }

    /// Keeps generated ids clear of an externally supplied id ("m<digits>").
    void observe_id(const std::string& id) {
        if (id.size() < 2 || id[0] != 'm') return;
        if (!std::all_of(id.begin() + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; })) return;
        if (id.size() > 19) return;
        std::lock_guard lock(id_mu_);
        id_counter_ = std::max<std::uint64_t>(id_counter_, std::stoull(id.substr(1)));
    }

    std::uint64_t id_counter() const {
        std::lock_guard lock(id_mu_);
        return id_counter_;
    }
    void set_id_counter(std::uint64_t v) {
        std::lock_guard lock(id_mu_);
        id_counter_ = std::max(id_counter_, v);
    }

    // Evicted low-utility items waiting for the consolidator.
    void push_pending(MemoryItem item) {
        std::lock_guard lock(pending_mu_);
        pending_.push_back(std::move(item));
    }
    std::vector<MemoryItem> take_pending() {
        std::lock_guard lock(pending_mu_);
        return std::exchange(pending_, {});
    }
    std::vector<MemoryItem> pending() const {
        std::lock_guard lock(pending_mu_);
        return pending_;
    }
    std::size_t pending_size() const {
        std::lock_guard lock(pending_mu_);
        return pending_.size();
    }

    void clear() {
        std::unique_lock lock(map_mu_);
        slots_.clear();
        std::lock_guard l2(pending_mu_);
        pending_.clear();
        std::lock_guard l3(id_mu_);
        id_counter_ = 0;
    }

private:
    struct Slot {
        explicit Slot(const std::string& u) : part(u) {}
        mutable std::mutex mu;
        MtmPartition part;
    };

    Slot& slot_for(const std::string& user_id) {
        if (user_id.empty()) throw PreconditionError("user_id must be non-empty");
        {
            std::shared_lock lock(map_mu_);
            auto it = slots_.find(user_id);
            if (it != slots_.end()) return *it->second;
        }
        std::unique_lock lock(map_mu_);
        auto& p = slots_[user_id];
        if (!p) p = std::make_unique<Slot>(user_id);
        return *p;
    }

    const Slot* find_slot(const std::string& user_id) const {
        std::shared_lock lock(map_mu_);
        auto it = slots_.find(user_id);
        return it == slots_.end() ? nullptr : it->second.get();
    }
    Slot* find_slot(const std::string& user_id) {
        std::shared_lock lock(map_mu_);
        auto it = slots_.find(user_id);
        return it == slots_.end() ? nullptr : it->second.get();
    }

    std::size_t dim_;
    mutable std::shared_mutex map_mu_;
    std::map<std::string, std::unique_ptr<Slot>> slots_;
    mutable std::mutex pending_mu_;
    std::vector<MemoryItem> pending_;
    mutable std::mutex id_mu_;
    std::uint64_t id_counter_ = 0;
};

}  // namespace lightmem
