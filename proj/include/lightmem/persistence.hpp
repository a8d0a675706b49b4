#pragma once
// JSONL snapshots of MTM and LTM. One directory, four files, each opening
// with a header line {"format_version":1,...}. STM is never written.

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "lightmem/ltm_graph.hpp"
#include "lightmem/vector_index.hpp"

namespace lightmem {

constexpr int kFormatVersion = 1;

inline constexpr const char* kItemsFile = "mtm_items.jsonl";
inline constexpr const char* kPendingFile = "mtm_pending.jsonl";
inline constexpr const char* kNodesFile = "ltm_nodes.jsonl";
inline constexpr const char* kEdgesFile = "ltm_edges.jsonl";

class LoadError : public Error {
public:
    LoadError(std::string file, std::size_t line, const std::string& what)
        : Error("load", file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}
    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class VersionError : public Error {
public:
    VersionError(std::string file, int found)
        : Error("version", file + ": format_version " + std::to_string(found) + " is not supported (expected " +
                               std::to_string(kFormatVersion) + ")"),
          found_(found) {}
    int found() const noexcept { return found_; }

private:
    int found_;
};

using ojson = nlohmann::ordered_json;

inline ojson item_to_json(const MemoryItem& it) {
    ojson j;
    j["item_id"] = it.item_id;
    j["user_id"] = it.user_id;
    j["summary"] = it.summary;
    j["embedding"] = it.embedding;
    j["created_at"] = it.created_at;
    j["last_accessed"] = it.last_accessed;
    j["access_count"] = it.access_count;
    j["type_tags"] = it.type_tags;
    j["evidence_strength"] = it.evidence_strength;
    j["consolidation_flag"] = std::string(to_string(it.consolidation_flag));
    return j;
}

inline MemoryItem item_from_json(const ojson& j) {
    MemoryItem it;
    it.item_id = j.at("item_id").get<std::string>();
    it.user_id = j.at("user_id").get<std::string>();
    it.summary = j.at("summary").get<std::string>();
    it.embedding = j.at("embedding").get<Embedding>();
    it.created_at = j.at("created_at").get<Timestamp>();
    it.last_accessed = j.at("last_accessed").get<Timestamp>();
    it.access_count = j.at("access_count").get<std::uint64_t>();
    it.type_tags = j.at("type_tags").get<std::set<std::string>>();
    it.evidence_strength = j.at("evidence_strength").get<double>();
    it.consolidation_flag = flag_from_string(j.at("consolidation_flag").get<std::string>());
    return it;
}

inline ojson node_to_json(const LtmNode& n) {
    ojson j;
    j["node_id"] = n.node_id;
    j["kind"] = std::string(to_string(n.kind));
    j["label"] = n.label;
    j["embedding"] = n.embedding;
    j["confidence"] = n.confidence;
    j["evidence_count"] = n.evidence_count;
    j["created_at"] = n.created_at;
    j["updated_at"] = n.updated_at;
    return j;
}

inline LtmNode node_from_json(const ojson& j) {
    LtmNode n;
    n.node_id = j.at("node_id").get<std::string>();
    n.kind = node_kind_from_string(j.at("kind").get<std::string>());
    n.label = j.at("label").get<std::string>();
    n.embedding = j.at("embedding").get<Embedding>();
    n.confidence = j.at("confidence").get<double>();
    n.evidence_count = j.at("evidence_count").get<std::uint64_t>();
    n.created_at = j.at("created_at").get<Timestamp>();
    n.updated_at = j.at("updated_at").get<Timestamp>();
    return n;
}

inline ojson edge_to_json(const LtmEdge& e) {
    ojson j;
    j["src"] = e.src;
    j["dst"] = e.dst;
    j["relation"] = std::string(to_string(e.relation));
    j["confidence"] = e.confidence;
    return j;
}

inline LtmEdge edge_from_json(const ojson& j) {
    LtmEdge e;
    e.src = j.at("src").get<std::string>();
    e.dst = j.at("dst").get<std::string>();
    auto rel = relation_from_string(j.at("relation").get<std::string>());
    if (!rel) throw PreconditionError("relation outside schema");
    e.relation = *rel;
    e.confidence = j.at("confidence").get<double>();
    return e;
}

inline ojson header(std::uint64_t id_counter = 0) {
    ojson h;
    h["format_version"] = kFormatVersion;
    h["id_counter"] = id_counter;
    return h;
}

/// In-memory rendering of the four files; the canonical form used for
/// round-trip comparisons.
struct SnapshotText {
    std::string items, pending, nodes, edges;
    bool operator==(const SnapshotText&) const = default;
    std::string digest() const { return text::hex64(text::fnv1a(items + '\x1e' + pending + '\x1e' + nodes + '\x1e' + edges)); }
};

inline SnapshotText render_snapshot(const MtmStore& mtm, const LtmGraph& ltm) {
    SnapshotText s;
    auto line = [](std::string& out, const ojson& j) {
        out += j.dump();
        out += '\n';
    };
    line(s.items, header(mtm.id_counter()));
    for (const auto& u : mtm.users())
        mtm.with_user(u, [&](const MtmPartition& p) {
            for (const auto& it : p.items()) line(s.items, item_to_json(it));
        });
    line(s.pending, header());
    for (const auto& it : mtm.pending()) line(s.pending, item_to_json(it));
    line(s.nodes, header(ltm.id_counter()));
    for (const auto& n : ltm.nodes()) line(s.nodes, node_to_json(n));
    line(s.edges, header());
    for (const auto& e : ltm.edges()) line(s.edges, edge_to_json(e));
    return s;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io", "cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("io", "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline SnapshotText save_snapshot(const std::filesystem::path& dir, const MtmStore& mtm, const LtmGraph& ltm) {
    std::filesystem::create_directories(dir);
    auto s = render_snapshot(mtm, ltm);
    write_file_atomic(dir / kItemsFile, s.items);
    write_file_atomic(dir / kPendingFile, s.pending);
    write_file_atomic(dir / kNodesFile, s.nodes);
    write_file_atomic(dir / kEdgesFile, s.edges);
    return s;
}

namespace detail {

/// Parses a JSONL body: header first, then one record per line. A record
/// that fails to parse or convert raises LoadError with its 1-based line.
template <class Fn>
std::uint64_t read_jsonl(std::istream& in, const std::string& name, Fn&& on_record) {
    std::string raw;
    std::size_t line = 0;
    std::uint64_t counter = 0;
    bool saw_header = false;
    while (std::getline(in, raw)) {
        ++line;
        bool terminated = !in.eof();
        if (raw.empty() && !terminated) break;
        if (!terminated) throw LoadError(name, line, "truncated final line (no newline)");
        ojson j;
        try {
            j = ojson::parse(raw);
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(name, line, std::string("malformed JSON: ") + e.what());
        }
        if (!saw_header) {
            if (!j.is_object() || !j.contains("format_version") || !j["format_version"].is_number_integer())
                throw LoadError(name, line, "missing format_version header");
            int v = j["format_version"].get<int>();
            if (v != kFormatVersion) throw VersionError(name, v);
            counter = j.value("id_counter", std::uint64_t{0});
            saw_header = true;
            continue;
        }
        try {
            on_record(j);
        } catch (const LoadError&) {
            throw;
        } catch (const std::exception& e) {
            throw LoadError(name, line, e.what());
        }
    }
    if (!saw_header) throw LoadError(name, line == 0 ? 1 : line, "empty file (missing format_version header)");
    return counter;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + p.string());
    return in;
}

}  // namespace detail

/// Loads into `mtm` (cleared first) and returns the LTM graph.
inline LtmGraph load_snapshot(const std::filesystem::path& dir, MtmStore& mtm) {
    mtm.clear();
    auto dim = mtm.dimension();
    {
        auto in = detail::open_in(dir / kItemsFile);
        auto counter = detail::read_jsonl(in, kItemsFile, [&](const ojson& j) {
            auto it = item_from_json(j);
            if (it.embedding.size() != dim) throw PreconditionError("embedding dimension mismatch");
            mtm.observe_id(it.item_id);
            mtm.with_user(it.user_id, [&](MtmPartition& p) { p.insert(std::move(it)); });
        });
        mtm.set_id_counter(counter);
    }
    {
        auto in = detail::open_in(dir / kPendingFile);
        detail::read_jsonl(in, kPendingFile, [&](const ojson& j) { mtm.push_pending(item_from_json(j)); });
    }
    LtmGraph g(dim);
    {
        auto in = detail::open_in(dir / kNodesFile);
        auto counter = detail::read_jsonl(in, kNodesFile, [&](const ojson& j) { g.add_node(node_from_json(j)); });
        g.set_id_counter(counter);
    }
    {
        auto in = detail::open_in(dir / kEdgesFile);
        detail::read_jsonl(in, kEdgesFile, [&](const ojson& j) {
            if (!g.add_edge(edge_from_json(j))) throw PreconditionError("dangling, self or duplicate edge");
        });
    }
    return g;
}

}  // namespace lightmem
