#pragma once
// Desk-scale experiment runners: MTM growth, error injection, update gap,
// retrieval latency. All seed-deterministic with the mock backends.

#include <thread>

#include "lightmem/engine.hpp"
#include "lightmem/metrics.hpp"
#include "lightmem/synthetic.hpp"

namespace lightmem::bench {

constexpr int kSchemaVersion = 1;
constexpr Timestamp kEpoch = 1'700'000'000'000;
constexpr Timestamp kTurnGapMs = 60'000;
inline constexpr const char* kUser = "user_0001";
inline constexpr const char* kProvider = "kb_provider";
inline constexpr const char* kAck = "noted";

/// Manually advanced clock shared by an engine and its driver.
struct SimClock {
    Timestamp now = kEpoch;
    Clock fn() {
        return [this] { return now; };
    }
    Timestamp tick(Timestamp dt = kTurnGapMs) { return now += dt; }
};

inline EngineConfig bench_config(std::size_t k = 5, std::size_t dimension = 384) {
    EngineConfig c;
    c.planner.k = k;
    c.embedding.dimension = dimension;
    c.write_behind = false;
    c.consolidation.enabled = false;
    return c;
}

inline std::string top1(const RetrievedSet& r) {
    return r.entries.empty() ? std::string(ResponseGenerator::kNoMemoryAnswer) : r.entries.front().summary;
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

inline json metrics_json(const MetricSet& m) {
    return {{"f1", m.f1}, {"bleu1", m.bleu1}, {"rouge_l", m.rouge_l}, {"embed_sim", m.embed_sim}};
}

struct MetricAccumulator {
    MetricSet sum;
    std::size_t n = 0;
    std::vector<double> f1s;
    void add(const MetricSet& m) {
        sum.f1 += m.f1;
        sum.bleu1 += m.bleu1;
        sum.rouge_l += m.rouge_l;
        sum.embed_sim += m.embed_sim;
        f1s.push_back(m.f1);
        ++n;
    }
    MetricSet mean() const {
        if (!n) return {};
        double d = double(n);
        return {sum.f1 / d, sum.bleu1 / d, sum.rouge_l / d, sum.embed_sim / d};
    }
};

// ---------------------------------------------------------------------------
// MTM growth

struct GrowthConfig {
    std::vector<std::size_t> checkpoints = {100, 1000, 5000, 10000};
    std::uint64_t seed = 0;
    std::size_t probe_every = 10;
    std::size_t k = 5;
    std::size_t dimension = 384;
    std::size_t trajectory_length = 0;  // 0: enough to reach the largest checkpoint
};

struct GrowthPoint {
    std::size_t checkpoint = 0;
    bool reached = false;
    std::size_t turns = 0;
    std::size_t probes = 0;
    double vector_only_f1 = 0;
    double full_f1 = 0;
    double delta = 0;
};

struct GrowthReport {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::size_t turns = 0;
    std::size_t merges = 0;
    std::vector<GrowthPoint> points;
};

/// One replay of a planted-fact trajectory. Each probe asks for a random
/// earlier fact; Stage 1 runs once and both arms (model selector, bypass)
/// select from the same candidate set. Cumulative F1 is emitted the first
/// time |MTM| reaches each checkpoint.
inline GrowthReport run_growth_stress(const GrowthConfig& cfg) {
    if (cfg.checkpoints.empty()) throw PreconditionError("growth: no checkpoints");
    if (cfg.probe_every == 0) throw PreconditionError("growth: probe_every must be positive");
    auto cps = cfg.checkpoints;
    std::sort(cps.begin(), cps.end());
    std::size_t largest = cps.back();
    std::size_t length = cfg.trajectory_length ? cfg.trajectory_length : largest + largest / 50 + 16;
    synth::PersonalSpace space;
    length = std::min(length, space.relations * space.names * space.attributes);
    auto facts = synth::personal_facts(length, cfg.seed * 7919 + 1);

    SimClock clock;
    auto ecfg = bench_config(cfg.k, cfg.dimension);
    ecfg.mtm.capacity_b = std::max<std::size_t>(ecfg.mtm.capacity_b, largest);
    Engine engine(ecfg, clock.fn());
    std::mt19937_64 rng(cfg.seed * 104729 + 17);

    GrowthReport rep;
    rep.seed = cfg.seed;
    rep.k = cfg.k;
    double sum_full = 0, sum_vec = 0;
    std::size_t probes = 0, next_cp = 0;
    for (std::size_t i = 0; i < facts.size() && next_cp < cps.size(); ++i) {
        clock.tick();
        auto w = engine.observe_turn(kUser, facts[i].statement, kAck);
        for (const auto& d : w.deltas) rep.merges += d.outcome != WriteOutcome::inserted;
        ++rep.turns;
        if ((i + 1) % cfg.probe_every == 0) {
            const auto& f = facts[rng() % (i + 1)];
            auto ctx = engine.session_copy(kUser);
            auto plan = build_plan(f.query, ctx, ecfg.planner, engine.embedder(), clock.now, &engine.gateway());
            auto c = stage1_coarse(plan, Stores{engine.mtm(), engine.ltm().snapshot()}, clock.now);
            auto full = stage2_filter(plan, c, Stage2Mode::model, &engine.gateway(), &engine.degradations());
            auto vec = stage2_filter(plan, c, Stage2Mode::bypass);
            sum_full += token_f1(top1(full), f.statement);
            sum_vec += token_f1(top1(vec), f.statement);
            ++probes;
        }
        std::size_t size = engine.mtm().size(kUser);
        while (next_cp < cps.size() && size >= cps[next_cp]) {
            GrowthPoint p;
            p.checkpoint = cps[next_cp];
            p.reached = true;
            p.turns = rep.turns;
            p.probes = probes;
            p.full_f1 = probes ? sum_full / double(probes) : 0.0;
            p.vector_only_f1 = probes ? sum_vec / double(probes) : 0.0;
            p.delta = p.full_f1 - p.vector_only_f1;
            rep.points.push_back(p);
            ++next_cp;
        }
    }
    for (; next_cp < cps.size(); ++next_cp) rep.points.push_back({cps[next_cp], false, rep.turns, probes, 0, 0, 0});
    return rep;
}

inline json to_json(const GrowthReport& r) {
    json pts = json::array();
    for (const auto& p : r.points) {
        json j = {{"checkpoint", p.checkpoint}, {"reached", p.reached}};
        if (p.reached) {
            j["turns"] = p.turns;
            j["probes"] = p.probes;
            j["vector_only_f1"] = p.vector_only_f1;
            j["full_f1"] = p.full_f1;
            j["delta"] = p.delta;
        }
        pts.push_back(j);
    }
    return {{"schema_version", kSchemaVersion}, {"bench", "growth"}, {"seed", r.seed},   {"k", r.k},
            {"turns", r.turns},                 {"merges", r.merges}, {"checkpoints", pts}};
}

// ---------------------------------------------------------------------------
// Error injection

enum class Group { A_full, B_hq_noise, C_no_stage2, D_write_noise, E_cascade };

inline const std::vector<Group>& all_groups() {
    static const std::vector<Group> k = {Group::A_full, Group::B_hq_noise, Group::C_no_stage2, Group::D_write_noise,
                                         Group::E_cascade};
    return k;
}

inline std::string_view to_string(Group g) {
    switch (g) {
        case Group::A_full: return "A_full";
        case Group::B_hq_noise: return "B_hq_noise";
        case Group::C_no_stage2: return "C_no_stage2";
        case Group::D_write_noise: return "D_write_noise";
        case Group::E_cascade: return "E_cascade";
    }
    return "A_full";
}

struct StressConfig {
    Group group = Group::A_full;
    double noise_rate = 0.5;
    std::uint64_t seed = 0;

    bool hq_noise() const { return group == Group::B_hq_noise || group == Group::E_cascade; }
    bool bypass() const { return group == Group::C_no_stage2 || group == Group::E_cascade; }
    bool write_noise() const { return group == Group::D_write_noise || group == Group::E_cascade; }
};

struct Transcript {
    std::vector<synth::Fact> writes;
    std::vector<std::size_t> probes;  // indices into writes
};

/// A dense transcript: few subjects, many attributes each, so every query
/// has lexically close competitors.
inline Transcript make_transcript(std::uint64_t seed, std::size_t facts = 400, std::size_t probes = 200) {
    synth::PersonalSpace sp;
    sp.relations = 4;
    sp.names = 8;
    Transcript t;
    t.writes = synth::personal_facts(facts, seed * 31337 + 5, sp);
    std::mt19937_64 rng(seed * 2654435761ULL + 3);
    for (std::size_t i = 0; i < probes; ++i) t.probes.push_back(rng() % t.writes.size());
    return t;
}

struct GroupResult {
    Group group = Group::A_full;
    MetricSet metrics;
    std::vector<double> f1s;
    std::size_t noisy_writes = 0;
    std::size_t noisy_hqs = 0;
};

inline GroupResult run_error_injection(const Transcript& t, const StressConfig& sc, std::size_t k = 5,
                                       std::size_t dimension = 384) {
    if (sc.noise_rate < 0.0 || sc.noise_rate > 1.0) throw PreconditionError("noise_rate outside [0,1]");
    SimClock clock;
    auto cfg = bench_config(k, dimension);
    Engine engine(cfg, clock.fn());
    GroupResult gr;
    gr.group = sc.group;

    // separate streams so E sees exactly the perturbations of B, C and D
    std::mt19937_64 write_rng(sc.seed * 6364136223846793005ULL + 11);
    synth::WordMaker noise_words(sc.seed * 40503 + 7);
    std::bernoulli_distribution coin(sc.noise_rate);
    if (sc.write_noise()) {
        auto base = mock::default_responder();
        engine.gateway().set_mock([&, base](Role role, const json& payload) -> std::string {
            if (role == Role::writer && coin(write_rng)) {
                ++gr.noisy_writes;
                return json{{"summaries", json::array({synth::noise_string(noise_words)})}}.dump();
            }
            return base(role, payload);
        });
    }
    for (const auto& f : t.writes) {
        clock.tick();
        engine.observe_turn(kUser, f.statement, kAck);
    }

    std::mt19937_64 hq_rng(sc.seed * 1442695040888963407ULL + 13);
    synth::PersonalSpace sp;
    QueryOptions opts;
    opts.write_back = false;
    opts.stage2 = sc.bypass() ? Stage2Mode::bypass : Stage2Mode::model;
    if (sc.hq_noise()) {
        opts.plan_hook = [&](RetrievalPlan& plan) {
            for (auto& h : plan.hqs) {
                if (!coin(hq_rng)) continue;
                const auto& rel = synth::relations()[hq_rng() % sp.relations];
                const auto& name = synth::names()[hq_rng() % sp.names];
                const auto& attr = synth::personal_attributes()[hq_rng() % sp.attributes];
                h.text = synth::personal_fact(rel, name, attr, "").query;
                h.embedding = engine.embedder().embed(h.text);
                ++gr.noisy_hqs;
            }
        };
    }
    MetricAccumulator acc;
    for (auto idx : t.probes) {
        clock.tick();
        const auto& f = t.writes[idx];
        auto q = engine.handle_query(kUser, f.query, opts);
        acc.add(score_answer(q.answer, f.statement, &engine.embedder()));
    }
    gr.metrics = acc.mean();
    gr.f1s = acc.f1s;
    return gr;
}

struct ErrorInjectionReport {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    double noise_rate = 0.5;
    std::vector<GroupResult> groups;
    std::vector<std::pair<Group, BootstrapResult>> vs_full;  // paired bootstrap of each group against A
};

inline ErrorInjectionReport run_error_injection_suite(std::uint64_t seed, std::size_t k = 5, double noise_rate = 0.5,
                                                      std::size_t dimension = 384) {
    ErrorInjectionReport rep;
    rep.seed = seed;
    rep.k = k;
    rep.noise_rate = noise_rate;
    auto t = make_transcript(seed);
    for (auto g : all_groups()) rep.groups.push_back(run_error_injection(t, {g, noise_rate, seed}, k, dimension));
    for (std::size_t i = 1; i < rep.groups.size(); ++i)
        rep.vs_full.emplace_back(rep.groups[i].group,
                                 paired_bootstrap(rep.groups[0].f1s, rep.groups[i].f1s, 1000, seed));
    return rep;
}

inline json to_json(const BootstrapResult& b) {
    return {{"delta", b.delta}, {"ci95", {b.ci_low, b.ci_high}}, {"p_value", b.p_value}, {"resamples", b.resamples}};
}

inline json to_json(const ErrorInjectionReport& r) {
    json rows = json::array();
    for (const auto& g : r.groups) {
        json row = {{"group", std::string(to_string(g.group))},
                    {"metrics", metrics_json(g.metrics)},
                    {"probes", g.f1s.size()},
                    {"noisy_writes", g.noisy_writes},
                    {"noisy_hqs", g.noisy_hqs}};
        for (const auto& [grp, b] : r.vs_full)
            if (grp == g.group) row["vs_full"] = to_json(b);
        rows.push_back(row);
    }
    return {{"schema_version", kSchemaVersion}, {"bench", "error-injection"}, {"seed", r.seed},
            {"k", r.k},                         {"noise_rate", r.noise_rate},  {"groups", rows}};
}

// ---------------------------------------------------------------------------
// Update gap

enum class GapMode { full, ltm_only, mtm_only, mtm_noise };

inline const std::vector<GapMode>& all_gap_modes() {
    static const std::vector<GapMode> k = {GapMode::full, GapMode::ltm_only, GapMode::mtm_only, GapMode::mtm_noise};
    return k;
}

inline std::string_view to_string(GapMode m) {
    switch (m) {
        case GapMode::full: return "full";
        case GapMode::ltm_only: return "ltm_only";
        case GapMode::mtm_only: return "mtm_only";
        case GapMode::mtm_noise: return "mtm_noise";
    }
    return "full";
}

inline GapMode gap_mode_from_string(std::string_view s) {
    for (auto m : all_gap_modes())
        if (to_string(m) == s) return m;
    throw PreconditionError("unknown update-gap mode: " + std::string(s));
}

struct GapCorpus {
    std::vector<synth::Fact> general;   // provider facts, consolidated into LTM
    std::vector<synth::Fact> personal;  // written after the last consolidation
    std::vector<std::string> noise;     // flood for mtm_noise
    std::vector<std::size_t> personal_probes;
    std::vector<std::size_t> general_probes;
    bool all_consolidated = false;  // consolidate after the personal facts too
};

/// Noise = value-free echoes of the user's own facts ("i forgot what ... is")
/// plus unrelated planted facts. The echoes compete with the real item at
/// both retrieval stages.
inline GapCorpus make_gap_corpus(std::uint64_t seed, std::size_t places = 20, std::size_t personal = 120,
                                 std::size_t flood = 400, std::size_t probes_each = 60, double echo_rate = 0.5) {
    GapCorpus c;
    c.general = synth::general_facts(places, seed * 97 + 1);
    auto pool = synth::personal_facts(personal + flood, seed * 89 + 2);
    c.personal.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(personal));
    std::mt19937_64 rng(seed * 83 + 3);
    std::bernoulli_distribution echo(echo_rate);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (i >= personal) c.noise.push_back(pool[i].statement);
        else if (echo(rng)) c.noise.push_back("i forgot what " + pool[i].subject + "'s " + pool[i].attribute + " is");
    }
    std::shuffle(c.noise.begin(), c.noise.end(), rng);
    for (std::size_t i = 0; i < probes_each; ++i) {
        c.personal_probes.push_back(rng() % c.personal.size());
        c.general_probes.push_back(rng() % c.general.size());
    }
    return c;
}

struct GapResult {
    GapMode mode = GapMode::full;
    MetricSet metrics;
    double personal_f1 = 0;
    double general_f1 = 0;
    std::vector<double> f1s;
    std::size_t ltm_nodes = 0;
    std::size_t mtm_items = 0;
};

inline GapResult run_update_gap(const GapCorpus& corpus, GapMode mode, std::size_t k = 5, std::size_t dimension = 384) {
    SimClock clock;
    Engine engine(bench_config(k, dimension), clock.fn());
    for (const auto& f : corpus.general) {
        clock.tick();
        engine.observe_turn(kProvider, f.statement, kAck);
    }
    engine.consolidate();
    for (const auto& f : corpus.personal) {
        clock.tick();
        engine.observe_turn(kUser, f.statement, kAck);
    }
    if (corpus.all_consolidated) engine.consolidate();
    if (mode == GapMode::mtm_noise)
        for (const auto& n : corpus.noise) {
            clock.tick();
            engine.observe_turn(kUser, n, kAck);
        }

    QueryOptions opts;
    opts.write_back = false;
    if (mode == GapMode::ltm_only) opts.force_route = StoreKind::LTM;
    if (mode == GapMode::mtm_only) opts.force_route = StoreKind::MTM;

    GapResult r;
    r.mode = mode;
    MetricAccumulator all, pers, gen;
    auto probe = [&](const synth::Fact& f, MetricAccumulator& part) {
        clock.tick();
        auto q = engine.handle_query(kUser, f.query, opts);
        auto m = score_answer(q.answer, f.statement, &engine.embedder());
        all.add(m);
        part.add(m);
    };
    for (std::size_t i = 0; i < corpus.personal_probes.size(); ++i) {
        probe(corpus.personal[corpus.personal_probes[i]], pers);
        probe(corpus.general[corpus.general_probes[i]], gen);
    }
    r.metrics = all.mean();
    r.personal_f1 = pers.mean().f1;
    r.general_f1 = gen.mean().f1;
    r.f1s = all.f1s;
    r.ltm_nodes = engine.ltm().snapshot()->node_count();
    r.mtm_items = engine.mtm().size(kUser);
    return r;
}

inline json to_json(const GapResult& r, std::uint64_t seed) {
    return {{"schema_version", kSchemaVersion},
            {"bench", "update-gap"},
            {"seed", seed},
            {"mode", std::string(to_string(r.mode))},
            {"metrics", metrics_json(r.metrics)},
            {"personal_f1", r.personal_f1},
            {"general_f1", r.general_f1},
            {"probes", r.f1s.size()},
            {"ltm_nodes", r.ltm_nodes},
            {"mtm_items", r.mtm_items}};
}

// ---------------------------------------------------------------------------
// Retrieval latency

struct LatencyConfig {
    std::size_t n_queries = 200;
    std::size_t mtm_items = 10000;
    std::size_t ltm_places = 30;
    std::uint64_t seed = 0;
    std::size_t dimension = 384;
    bool concurrent_consolidation = true;
};

struct LatencyReport {
    std::size_t n_queries = 0;
    std::size_t mtm_items = 0;
    Percentiles retrieval;
    Percentiles end_to_end;
    Percentiles retrieval_during_cycle;  // queries issued while a cycle ran
    std::size_t queries_during_cycle = 0;
    double commit_ms = 0;
    double max_reader_wait_ms = 0;
    double cycle_ms = 0;
    bool retrieval_within_end_to_end = true;
};

/// Fills MTM directly (no per-write merge scan) to the requested size, then
/// times retrieval for random probes. Optionally repeats the probes while a
/// consolidation cycle runs on another thread.
inline LatencyReport run_latency(const LatencyConfig& lc) {
    SimClock clock;
    auto cfg = bench_config(5, lc.dimension);
    cfg.mtm.capacity_b = std::max(cfg.mtm.capacity_b, lc.mtm_items);
    Engine engine(cfg, clock.fn());
    auto general = synth::general_facts(lc.ltm_places, lc.seed + 5);
    for (const auto& f : general) {
        clock.tick();
        engine.observe_turn(kProvider, f.statement, kAck);
    }
    engine.consolidate();

    auto facts = synth::personal_facts(lc.mtm_items, lc.seed * 13 + 1);
    engine.mtm().with_user(kUser, [&](MtmPartition& p) {
        for (const auto& f : facts) {
            clock.tick(1000);
            MemoryItem it;
            it.item_id = engine.mtm().next_id();
            it.user_id = kUser;
            it.summary = mock::summary_line(kUser, f.statement, kAck);
            it.embedding = engine.embedder().embed(it.summary);
            it.created_at = it.last_accessed = clock.now;
            it.type_tags = infer_type_tags(it.summary);
            p.insert(std::move(it));
        }
    });
    // re-flag a slice so the concurrent cycle has real work
    for (std::size_t i = 0; i < 40 && i < general.size(); ++i) {
        clock.tick();
        engine.observe_turn(kProvider, general[i].statement + " indeed", kAck);
    }

    std::mt19937_64 rng(lc.seed * 7 + 1);
    QueryOptions opts;
    opts.write_back = false;
    LatencyReport rep;
    rep.mtm_items = engine.mtm().size(kUser);
    std::vector<double> retr, e2e;
    for (std::size_t i = 0; i < lc.n_queries; ++i) {
        const auto& f = facts[rng() % facts.size()];
        auto q = engine.handle_query(kUser, f.query, opts);
        retr.push_back(q.latency.retrieval_ms);
        e2e.push_back(q.latency.end_to_end_ms);
        rep.retrieval_within_end_to_end &= q.latency.retrieval_ms <= q.latency.end_to_end_ms;
    }
    rep.n_queries = retr.size();
    rep.retrieval = latency_percentiles(retr);
    rep.end_to_end = latency_percentiles(e2e);

    if (lc.concurrent_consolidation) {
        engine.ltm().reset_reader_wait();
        std::atomic<bool> done{false};
        CycleReport cycle;
        std::thread t([&] {
            cycle = engine.consolidate();
            done = true;
        });
        std::vector<double> during;
        while (!done.load() || during.empty()) {
            const auto& f = facts[rng() % facts.size()];
            auto q = engine.handle_query(kUser, f.query, opts);
            during.push_back(q.latency.retrieval_ms);
            rep.retrieval_within_end_to_end &= q.latency.retrieval_ms <= q.latency.end_to_end_ms;
            if (during.size() > 100000) break;
        }
        t.join();
        rep.queries_during_cycle = during.size();
        rep.retrieval_during_cycle = latency_percentiles(during);
        rep.commit_ms = std::chrono::duration<double, std::milli>(cycle.commit_time).count();
        rep.cycle_ms = cycle.cycle_ms;
        rep.max_reader_wait_ms = std::chrono::duration<double, std::milli>(engine.ltm().max_reader_wait()).count();
    }
    return rep;
}

inline json to_json(const LatencyReport& r) {
    return {{"schema_version", kSchemaVersion},
            {"bench", "latency"},
            {"n_queries", r.n_queries},
            {"mtm_items", r.mtm_items},
            {"retrieval_ms", {{"p50", r.retrieval.p50}, {"p95", r.retrieval.p95}}},
            {"end_to_end_ms", {{"p50", r.end_to_end.p50}, {"p95", r.end_to_end.p95}}},
            {"during_consolidation",
             {{"queries", r.queries_during_cycle},
              {"retrieval_ms", {{"p50", r.retrieval_during_cycle.p50}, {"p95", r.retrieval_during_cycle.p95}}},
              {"commit_ms", r.commit_ms},
              {"max_reader_wait_ms", r.max_reader_wait_ms},
              {"cycle_ms", r.cycle_ms}}},
            {"retrieval_within_end_to_end", r.retrieval_within_end_to_end}};
}

}  // namespace lightmem::bench
