#pragma once
// HTTP front end over an Engine.

#include "httplib.h"
#include "lightmem/engine.hpp"
#include "lightmem/metrics.hpp"

namespace lightmem {

inline json retrieved_to_json(const RetrievedSet& r) {
    json arr = json::array();
    for (const auto& e : r.entries)
        arr.push_back({{"ref", e.ref()},
                       {"store", std::string(to_string(e.store))},
                       {"id", e.id},
                       {"score", e.final_score},
                       {"justification_hq", e.justification},
                       {"summary", e.summary}});
    return arr;
}

inline json query_result_to_json(const QueryResult& q) {
    return {{"query_id", q.query_id},
            {"answer", q.answer},
            {"retrieved", retrieved_to_json(q.retrieval.retrieved)},
            {"latency",
             {{"retrieval_ms", q.latency.retrieval_ms},
              {"end_to_end_ms", q.latency.end_to_end_ms},
              {"timestamp", q.latency.timestamp}}}};
}

inline json cycle_to_json(const CycleReport& c) {
    return {{"batch_size", c.batch_size}, {"candidates", c.candidates}, {"inserted", c.inserted},
            {"merged", c.merged},         {"dropped", c.dropped},       {"removed", c.removed.size()},
            {"published", c.published},   {"commit_us", std::chrono::duration<double, std::micro>(c.commit_time).count()},
            {"cycle_ms", c.cycle_ms}};
}

inline json latency_summary(const LatencyLog& log) {
    auto recs = log.records();
    json out = {{"count", recs.size()}};
    if (recs.empty()) return out;
    std::vector<double> r, e;
    for (const auto& x : recs) {
        r.push_back(x.retrieval_ms);
        e.push_back(x.end_to_end_ms);
    }
    auto pr = latency_percentiles(r), pe = latency_percentiles(e);
    out["retrieval_ms"] = {{"p50", pr.p50}, {"p95", pr.p95}};
    out["end_to_end_ms"] = {{"p50", pe.p50}, {"p95", pe.p95}};
    return out;
}

class Service {
public:
    static constexpr std::size_t kDefaultPageSize = 50;
    static constexpr std::size_t kMaxPageSize = 500;

    explicit Service(Engine& engine) : engine_(engine) { routes(); }

    httplib::Server& server() { return server_; }

    /// Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port) {
        if (port == 0) return server_.bind_to_any_port(host);
        if (!server_.bind_to_port(host, port)) throw Error("io", "cannot bind " + host + ":" + std::to_string(port));
        return port;
    }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }

private:
    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <class Fn>
    static void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const GatewayError& e) {
            reply(res, 502, {{"error", "gateway"}, {"detail", e.what()}, {"upstream_status", e.status()}});
        } catch (const PreconditionError& e) {
            reply(res, 400, {{"error", e.code()}, {"detail", e.what()}});
        } catch (const Error& e) {
            reply(res, 500, {{"error", e.code()}, {"detail", e.what()}});
        } catch (const json::exception& e) {
            reply(res, 400, {{"error", "bad_request"}, {"detail", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", "internal"}, {"detail", e.what()}});
        }
    }

    static std::size_t param_size(const httplib::Request& req, const char* name, std::size_t dflt) {
        if (!req.has_param(name)) return dflt;
        auto v = req.get_param_value(name);
        std::size_t pos = 0;
        long long n = -1;
        try {
            n = std::stoll(v, &pos);
        } catch (const std::exception&) {
        }
        if (n < 0 || pos != v.size()) throw PreconditionError(std::string(name) + " must be a non-negative integer");
        return static_cast<std::size_t>(n);
    }

    void routes() {
        server_.Post("/v1/query", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto body = json::parse(req.body);
                auto user = body.at("user_id").get<std::string>();
                auto text = body.at("text").get<std::string>();
                reply(res, 200, query_result_to_json(engine_.handle_query(user, text)));
            });
        });

        server_.Post("/v1/consolidate", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                engine_.flush();
                auto rep = engine_.try_consolidate();
                if (!rep) {
                    reply(res, 409, {{"error", "busy"}, {"detail", "a consolidation cycle is already running"}});
                    return;
                }
                reply(res, 200, cycle_to_json(*rep));
            });
        });

        server_.Get(R"(/v1/memory/([^/]+)/mtm)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto user = req.matches[1].str();
                auto offset = param_size(req, "offset", 0);
                auto limit = std::min(param_size(req, "limit", kDefaultPageSize), kMaxPageSize);
                json items = json::array();
                std::size_t total = 0;
                const MtmStore& store = engine_.mtm();
                store.with_user(user, [&](const MtmPartition& p) {
                    total = p.size();
                    for (std::size_t i = offset; i < p.size() && i < offset + limit; ++i) {
                        const auto& it = p.items()[i];
                        if (it.user_id != user) continue;
                        items.push_back({{"item_id", it.item_id},
                                         {"summary", it.summary},
                                         {"created_at", it.created_at},
                                         {"last_accessed", it.last_accessed},
                                         {"access_count", it.access_count},
                                         {"type_tags", it.type_tags},
                                         {"evidence_strength", it.evidence_strength},
                                         {"consolidation_flag", std::string(to_string(it.consolidation_flag))}});
                    }
                });
                json body = {{"user_id", user}, {"total", total}, {"offset", offset}, {"limit", limit}, {"items", items}};
                if (offset + limit < total) body["next_offset"] = offset + limit;
                reply(res, 200, body);
            });
        });

        server_.Get("/v1/ltm/stats", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                auto g = engine_.ltm().snapshot();
                double sum = 0;
                std::size_t reinforced = 0;
                for (const auto& n : g->nodes()) {
                    sum += n.confidence;
                    reinforced += n.evidence_count >= 2;
                }
                reply(res, 200,
                      {{"nodes", g->node_count()},
                       {"edges", g->edge_count()},
                       {"reinforced_nodes", reinforced},
                       {"mean_confidence", g->node_count() ? sum / double(g->node_count()) : 0.0},
                       {"well_formed", g->well_formed()}});
            });
        });

        server_.Get("/v1/metrics/latency", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, latency_summary(engine_.latency_log())); });
        });
    }

    Engine& engine_;
    httplib::Server server_;
};

}  // namespace lightmem
