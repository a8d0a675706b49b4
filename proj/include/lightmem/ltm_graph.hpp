#pragma once
// Graph-structured, user-agnostic long-term memory.

#include <chrono>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <unordered_set>

#include "lightmem/core.hpp"
#include "lightmem/embedding.hpp"
#include "lightmem/vector_index.hpp"

namespace lightmem {

class LtmGraph {
public:
    explicit LtmGraph(std::size_t dimension = 384) : dim_(dimension) {}

    std::size_t dimension() const { return dim_; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<LtmNode>& nodes() const { return nodes_; }
    const std::vector<LtmEdge>& edges() const { return edges_; }

    const LtmNode* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &nodes_[it->second];
    }
    LtmNode* find(const std::string& id) {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &nodes_[it->second];
    }

    /// Case-insensitive exact label lookup.
    const LtmNode* find_by_label(std::string_view label) const {
        auto key = text::to_lower(text::normalize_space(label));
        for (const auto& n : nodes_)
            if (text::to_lower(text::normalize_space(n.label)) == key) return &n;
        return nullptr;
    }

    std::string next_node_id() {
        std::string digits = std::to_string(++id_counter_);
        return "n" + std::string(digits.size() < 8 ? 8 - digits.size() : 0, '0') + digits;
    }

    std::uint64_t id_counter() const { return id_counter_; }
    void set_id_counter(std::uint64_t v) { id_counter_ = std::max(id_counter_, v); }

    void add_node(LtmNode node) {
        if (node.embedding.size() != dim_) throw PreconditionError("ltm node dimension mismatch");
        if (node.confidence < 0.0 || node.confidence > 1.0) throw PreconditionError("confidence outside [0,1]");
        if (node.evidence_count < 1) throw PreconditionError("evidence_count must be >= 1");
        if (index_.count(node.node_id)) throw PreconditionError("duplicate node_id " + node.node_id);
        observe_id(node.node_id);
        inv_norms_.push_back(inverse_norm(node.embedding));
        index_.emplace(node.node_id, nodes_.size());
        nodes_.push_back(std::move(node));
    }

    /// Adds an edge if both endpoints exist, they differ and the same
    /// (src, dst, relation) is not already present. Returns whether it was added.
    bool add_edge(LtmEdge e) {
        if (e.src == e.dst || !find(e.src) || !find(e.dst)) return false;
        if (e.confidence < 0.0 || e.confidence > 1.0) return false;
        for (const auto& x : edges_)
            if (x.src == e.src && x.dst == e.dst && x.relation == e.relation) return false;
        edges_.push_back(std::move(e));
        return true;
    }

    /// Removes the given nodes and every incident edge.
    void remove_nodes(const std::unordered_set<std::string>& ids) {
        if (ids.empty()) return;
        std::vector<LtmNode> kept;
        std::vector<double> kept_norms;
        kept.reserve(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (ids.count(nodes_[i].node_id)) continue;
            kept.push_back(std::move(nodes_[i]));
            kept_norms.push_back(inv_norms_[i]);
        }
        nodes_ = std::move(kept);
        inv_norms_ = std::move(kept_norms);
        index_.clear();
        for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].node_id, i);
        std::erase_if(edges_, [&](const LtmEdge& e) { return ids.count(e.src) || ids.count(e.dst); });
    }

    /// Exact top-k by cosine under the global tie-break.
    std::vector<ScoredRef> search(std::span<const float> query, std::size_t k) const {
        std::vector<ScoredRef> hits;
        if (k == 0 || nodes_.empty()) return hits;
        if (query.size() != dim_) throw PreconditionError("ltm search: dimension mismatch");
        double qinv = inverse_norm(query);
        hits.reserve(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            double s = dot(query, nodes_[i].embedding) * qinv * inv_norms_[i];
            hits.push_back({StoreKind::LTM, nodes_[i].node_id, s, nodes_[i].created_at});
        }
        keep_top(hits, k);
        return hits;
    }

    /// Structural invariants: no dangling or self edges, confidences in range.
    bool well_formed() const {
        for (const auto& n : nodes_)
            if (n.confidence < 0.0 || n.confidence > 1.0 || n.evidence_count < 1) return false;
        for (const auto& e : edges_)
            if (e.src == e.dst || !find(e.src) || !find(e.dst) || e.confidence < 0.0 || e.confidence > 1.0)
                return false;
        return true;
    }

    bool operator==(const LtmGraph& o) const { return dim_ == o.dim_ && nodes_ == o.nodes_ && edges_ == o.edges_; }

private:
    void observe_id(const std::string& id) {
        if (id.size() < 2 || id.size() > 19 || id[0] != 'n') return;
        if (!std::all_of(id.begin() + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; })) return;
        id_counter_ = std::max<std::uint64_t>(id_counter_, std::stoull(id.substr(1)));
    }

    std::size_t dim_;
    std::vector<LtmNode> nodes_;
    std::vector<double> inv_norms_;
    std::vector<LtmEdge> edges_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t id_counter_ = 0;
};

/// Holds the published LTM graph. Readers take an immutable snapshot pointer;
/// the consolidator builds a new graph off to the side and swaps it in.
class LtmStore {
public:
    explicit LtmStore(std::size_t dimension) : current_(std::make_shared<const LtmGraph>(dimension)) {}

    std::shared_ptr<const LtmGraph> snapshot() const {
        auto t0 = std::chrono::steady_clock::now();
        std::lock_guard lock(mu_);
        auto out = current_;
        note_wait(std::chrono::steady_clock::now() - t0);
        return out;
    }

    /// Publishes `next`; returns the time spent inside the exclusive section.
    std::chrono::nanoseconds publish(std::shared_ptr<const LtmGraph> next) {
        std::shared_ptr<const LtmGraph> old;  // released after the lock is dropped
        auto t0 = std::chrono::steady_clock::now();
        {
            std::lock_guard lock(mu_);
            old = std::exchange(current_, std::move(next));
        }
        auto dt = std::chrono::steady_clock::now() - t0;
        return std::chrono::duration_cast<std::chrono::nanoseconds>(dt);
    }

    /// Longest time any reader waited to acquire a snapshot.
    std::chrono::nanoseconds max_reader_wait() const {
        std::lock_guard lock(wait_mu_);
        return max_wait_;
    }
    void reset_reader_wait() {
        std::lock_guard lock(wait_mu_);
        max_wait_ = {};
    }

private:
    void note_wait(std::chrono::steady_clock::duration d) const {
        std::lock_guard lock(wait_mu_);
        max_wait_ = std::max(max_wait_, std::chrono::duration_cast<std::chrono::nanoseconds>(d));
    }

    mutable std::mutex mu_;
    std::shared_ptr<const LtmGraph> current_;
    mutable std::mutex wait_mu_;
    mutable std::chrono::nanoseconds max_wait_{};
};

}  // namespace lightmem
