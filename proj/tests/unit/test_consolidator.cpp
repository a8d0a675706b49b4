#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace lightmem;

namespace {

struct MockGateway : Gateway {
    MockGateway() { set_mock(mock::default_responder()); }
};

KnowledgeCandidate cand(const MockEmbedder& e, const std::string& s,
                        std::vector<std::pair<Relation, std::string>> edges = {}) {
    KnowledgeCandidate c;
    c.statement = s;
    c.embedding = e.embed(s);
    c.proposed_edges = std::move(edges);
    return c;
}

void expect_well_formed(const LtmGraph& g, const std::vector<std::string>& users) {
    std::set<std::string> ids;
    for (const auto& n : g.nodes()) {
        ids.insert(n.node_id);
        EXPECT_GE(n.confidence, 0.0);
        EXPECT_LE(n.confidence, 1.0);
        for (const auto& u : users) EXPECT_EQ(text::to_lower(n.label).find(u), std::string::npos) << n.label;
    }
    for (const auto& e : g.edges()) {
        EXPECT_TRUE(ids.count(e.src));
        EXPECT_TRUE(ids.count(e.dst));
        EXPECT_GE(e.confidence, 0.0);
        EXPECT_LE(e.confidence, 1.0);
    }
    EXPECT_TRUE(g.well_formed());
}

}  // namespace

TEST(SelectBatch, FlaggedItemsPlusPendingThenCleared) {
    MtmStore s(4);
    s.with_user("u", [](MtmPartition& p) {
        auto a = make_item("a", "u", "x", {1, 0, 0, 0});
        a.consolidation_flag = ConsolidationFlag::newly_written;
        auto b = make_item("b", "u", "y", {0, 1, 0, 0});
        auto c = make_item("c", "u", "z", {0, 0, 1, 0});
        c.consolidation_flag = ConsolidationFlag::reactivated;
        p.insert(a);
        p.insert(b);
        p.insert(c);
    });
    auto ev = make_item("e", "u", "gone", {0, 0, 0, 1});
    ev.consolidation_flag = ConsolidationFlag::low_utility;
    s.push_pending(ev);
    auto batch = select_batch(s);
    std::set<std::string> ids;
    for (const auto& it : batch) ids.insert(it.item_id);
    EXPECT_EQ(ids, (std::set<std::string>{"a", "c", "e"}));
    EXPECT_TRUE(select_batch(s).empty());
    s.with_user("u", [](MtmPartition& p) {
        for (const auto& it : p.items()) EXPECT_EQ(it.consolidation_flag, ConsolidationFlag::none);
    });
}

TEST(SelectBatch, EmptyStore) {
    MtmStore s(4);
    EXPECT_TRUE(select_batch(s).empty());
}

TEST(SelectBatch, TraceReplayMatchesFlagSimulator) {
    // writes flag items, a batch clears them; simulate the flag set alongside
    std::mt19937_64 rng(3);
    MtmStore s(16);
    std::set<std::string> flagged;
    MtmConfig cfg;
    cfg.capacity_b = 1000;
    for (int step = 0; step < 300; ++step) {
        if (rng() % 7 == 0) {
            auto batch = select_batch(s);
            std::set<std::string> got;
            for (const auto& it : batch) got.insert(it.item_id);
            ASSERT_EQ(got, flagged);
            flagged.clear();
        } else {
            auto d = write_mtm(s, make_item("", "u" + std::to_string(rng() % 3), "s", oracle::random_unit(rng, 16), 0),
                               cfg, 1000 + step);
            flagged.insert(d.item_id);
        }
    }
}

TEST(Redact, UserIdBecomesPlaceholder) {
    EXPECT_EQ(mock::redact("user42 prefers vegetarian food", "user42"), "a user prefers vegetarian food");
    EXPECT_EQ(mock::redact("user u7 said: I like jazz", "u7"), "a user said: a user like jazz");
}

TEST(Redact, IdOnlySummaryYieldsNoCandidates) {
    MockGateway gw;
    MockEmbedder e;
    auto it = make_item("m1", "user42", "user42", e.embed("user42"));
    EXPECT_TRUE(abstract_episode(it, gw, e, {"user42"}).empty());
}

TEST(Redact, TenSummaryOracle) {
    // every output must be free of the id and of first-person words, and keep the other words in order
    std::vector<std::string> in = {
        "user bob1 said: i love sushi ; outcome: noted",
        "bob1 visited rome on 2024-03-01",
        "my brother lives in oslo",
        "we went hiking at 10:30am",
        "bob1's cat is grey",
        "ask bob1 about the trip 1700000000000",
        "the museum opens at nine",
        "i'm allergic to peanuts",
        "our team won the match",
        "Bob1 likes tea"};
    std::set<std::string> banned = {"bob1", "i", "my", "we", "our", "i'm", "bob1's"};
    for (const auto& s : in) {
        auto r = mock::redact(s, "bob1");
        std::istringstream is(text::to_lower(r));
        std::string w;
        while (is >> w) {
            while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back())) && w.back() != '\'') w.pop_back();
            EXPECT_FALSE(banned.count(w)) << s << " -> " << r;
            EXPECT_FALSE(std::all_of(w.begin(), w.end(), ::isdigit) && w.size() >= 9) << r;
        }
        EXPECT_FALSE(mentions_any(r, {"bob1"})) << r;
    }
    EXPECT_EQ(mock::redact("the museum opens at nine", "bob1"), "the museum opens at nine");
}

TEST(Abstract, LeakyBackendOutputDiscarded) {
    Gateway gw;
    gw.set_mock([](Role, const json&) {
        return std::string(R"({"candidates":[{"statement":"alice likes tea","kind":"Concept"},)"
                           R"({"statement":"tea is a drink","kind":"Concept"}]})");
    });
    MockEmbedder e;
    DegradationLog log;
    auto out = abstract_episode(make_item("m1", "alice", "alice likes tea", e.embed("x")), gw, e, {"bob"}, &log);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].statement, "tea is a drink");
    EXPECT_EQ(out[0].source_item_ids, std::vector<std::string>{"m1"});
    EXPECT_EQ(log.size(), 1u);
}

TEST(Integrate, EmptyGraphInsertsOneNode) {
    MockEmbedder e;
    LtmGraph g(384);
    ConsolidationConfig cfg;
    auto r = integrate_candidate(cand(e, "Paris is a capital city"), g, cfg, 50);
    EXPECT_EQ(r.kind, IntegrationKind::inserted);
    EXPECT_EQ(g.node_count(), 1u);
    EXPECT_EQ(g.edge_count(), 0u);
    EXPECT_DOUBLE_EQ(g.nodes()[0].confidence, 0.5);
    EXPECT_EQ(g.nodes()[0].evidence_count, 1u);
}

TEST(Integrate, IdenticalStatementMerges) {
    MockEmbedder e;
    LtmGraph g(384);
    ConsolidationConfig cfg;
    integrate_candidate(cand(e, "Paris is a capital city"), g, cfg, 50);
    auto r = integrate_candidate(cand(e, "Paris is a capital city"), g, cfg, 60);
    EXPECT_EQ(r.kind, IntegrationKind::merged);
    EXPECT_EQ(g.node_count(), 1u);
    EXPECT_EQ(g.nodes()[0].evidence_count, 2u);
    EXPECT_DOUBLE_EQ(g.nodes()[0].confidence, 0.55);
    EXPECT_EQ(g.nodes()[0].updated_at, 60);
}

TEST(Integrate, SameStatementMergesOncePerBatch) {
    MockEmbedder e;
    LtmGraph g(384);
    ConsolidationConfig cfg;
    integrate_candidate(cand(e, "tea is a drink"), g, cfg, 1);
    BatchMerges m;
    EXPECT_EQ(integrate_candidate(cand(e, "tea is a drink"), g, cfg, 2, &m).kind, IntegrationKind::merged);
    EXPECT_EQ(integrate_candidate(cand(e, "Tea is a  drink"), g, cfg, 2, &m).kind, IntegrationKind::dropped);
    EXPECT_EQ(g.nodes()[0].evidence_count, 2u);
}

TEST(Integrate, ProposedIsAEdgeResolvedByLabel) {
    MockEmbedder e;
    LtmGraph g(384);
    ConsolidationConfig cfg;
    integrate_candidate(cand(e, "Capital City"), g, cfg, 1);
    auto r = integrate_candidate(cand(e, "Paris", {{Relation::IsA, "Capital City"}, {Relation::IsA, "Nowhere"}}), g,
                                 cfg, 2);
    ASSERT_EQ(r.kind, IntegrationKind::inserted);
    bool found = false;
    for (const auto& ed : g.edges())
        found = found || (ed.src == r.node_id && ed.relation == Relation::IsA && g.find(ed.dst)->label == "Capital City");
    EXPECT_TRUE(found);
    expect_well_formed(g, {});
}

TEST(Integrate, RelatedAnchorsLinked) {
    MockEmbedder e;
    LtmGraph g(384);
    ConsolidationConfig cfg;
    integrate_candidate(cand(e, "the capital of kenya is nairobi"), g, cfg, 1);
    auto c = cand(e, "the capital of kenya is a big city");
    double s = cosine(c.embedding, g.nodes()[0].embedding);
    ASSERT_GE(s, 0.5);
    ASSERT_LT(s, 0.9);
    auto r = integrate_candidate(c, g, cfg, 2);
    EXPECT_EQ(r.kind, IntegrationKind::inserted);
    EXPECT_EQ(r.edges_added, 1u);
    EXPECT_EQ(g.edges()[0].relation, Relation::RelatedTo);
    EXPECT_NEAR(g.edges()[0].confidence, s, 1e-9);
}

TEST(Decay, SingleEvidenceNodeDecays) {
    LtmGraph g(4);
    ConsolidationConfig cfg;
    LtmNode n{g.next_node_id(), NodeKind::Concept, "a", {1, 0, 0, 0}, 0.8, 1, 0, 0};
    LtmNode strong{g.next_node_id(), NodeKind::Concept, "b", {0, 1, 0, 0}, 0.8, 3, 0, 0};
    g.add_node(n);
    g.add_node(strong);
    EXPECT_TRUE(decay_and_forget(g, cfg).empty());
    EXPECT_DOUBLE_EQ(g.find(n.node_id)->confidence, 0.76);
    EXPECT_DOUBLE_EQ(g.find(strong.node_id)->confidence, 0.8);
}

TEST(Decay, BelowFloorRemovedWithEdges) {
    LtmGraph g(4);
    ConsolidationConfig cfg;
    LtmNode weak{g.next_node_id(), NodeKind::Concept, "a", {1, 0, 0, 0}, 0.09, 1, 0, 0};
    LtmNode other{g.next_node_id(), NodeKind::Concept, "b", {0, 1, 0, 0}, 0.9, 2, 0, 0};
    g.add_node(weak);
    g.add_node(other);
    g.add_edge({other.node_id, weak.node_id, Relation::RelatedTo, 0.5});
    auto removed = decay_and_forget(g, cfg);
    EXPECT_EQ(removed, std::vector<std::string>{weak.node_id});
    EXPECT_EQ(g.node_count(), 1u);
    EXPECT_EQ(g.edge_count(), 0u);
}

TEST(Decay, FiftyNodesTwentyCyclesSimulator) {
    std::mt19937_64 rng(21);
    LtmGraph g(4);
    ConsolidationConfig cfg;
    std::map<std::string, std::pair<double, std::uint64_t>> sim;
    for (int i = 0; i < 50; ++i) {
        double c = double(rng() % 1000) / 1000.0;
        std::uint64_t ev = 1 + rng() % 3;
        LtmNode n{g.next_node_id(), NodeKind::Concept, "n" + std::to_string(i), {1, float(i), 0, 0}, c, ev, 0, 0};
        g.add_node(n);
        sim[n.node_id] = {c, ev};
    }
    for (int cyc = 0; cyc < 20; ++cyc) {
        decay_and_forget(g, cfg);
        for (auto it = sim.begin(); it != sim.end();) {
            if (it->second.second == 1) it->second.first *= 0.95;
            if (it->second.first < 0.1)
                it = sim.erase(it);
            else
                ++it;
        }
        ASSERT_EQ(g.node_count(), sim.size());
        for (const auto& [id, st] : sim) ASSERT_NEAR(g.find(id)->confidence, st.first, 1e-12);
    }
}

TEST(ConsolidatorCycle, EmptyBatchIsNoOp) {
    MtmStore mtm(384);
    LtmStore ltm(384);
    MockEmbedder e;
    MockGateway gw;
    Consolidator c(mtm, ltm, e, gw);
    auto before = ltm.snapshot();
    auto rep = c.run_cycle(10);
    ASSERT_TRUE(rep);
    EXPECT_FALSE(rep->published);
    EXPECT_EQ(ltm.snapshot(), before);
}

TEST(ConsolidatorCycle, PublishesDeidentifiedKnowledge) {
    MtmStore mtm(384);
    LtmStore ltm(384);
    MockEmbedder e;
    MockGateway gw;
    MtmConfig mc;
    for (auto [u, s] : {std::pair{"user42", "user user42 said: user42 prefers vegetarian food ; outcome: noted"},
                        std::pair{"alice", "user alice said: the capital of peru is lima ; outcome: noted"}})
        write_mtm(mtm, make_item("", u, s, e.embed(s), 0), mc, 100);
    Consolidator c(mtm, ltm, e, gw);
    auto old = ltm.snapshot();
    auto rep = c.run_cycle_blocking(200);
    EXPECT_TRUE(rep.published);
    EXPECT_EQ(rep.batch_size, 2u);
    EXPECT_EQ(old->node_count(), 0u);  // earlier snapshot untouched
    auto g = ltm.snapshot();
    EXPECT_EQ(g->node_count(), 2u);
    expect_well_formed(*g, {"user42", "alice"});
}

TEST(ConsolidatorCycle, ConcurrentRequestReportsBusy) {
    MtmStore mtm(384);
    LtmStore ltm(384);
    MockEmbedder e;
    std::atomic<bool> entered{false}, release{false};
    Gateway gw;
    gw.set_mock([&](Role r, const json& p) {
        entered = true;
        while (!release) std::this_thread::yield();
        return mock::respond(r, p);
    });
    auto s = "user u said: the sky is blue ; outcome: ok";
    write_mtm(mtm, make_item("", "u", s, e.embed(s), 0), MtmConfig{}, 1);
    Consolidator c(mtm, ltm, e, gw);
    std::thread t([&] { c.run_cycle_blocking(5); });
    while (!entered) std::this_thread::yield();
    EXPECT_FALSE(c.run_cycle(6).has_value());
    release = true;
    t.join();
    EXPECT_EQ(c.cycles(), 1u);
}

TEST(ConsolidatorProperty, HundredCyclesKeepInvariants) {
    MtmStore mtm(384);
    LtmStore ltm(384);
    MockEmbedder e;
    MockGateway gw;
    Consolidator c(mtm, ltm, e, gw);
    auto facts = synth::personal_facts(300, 4);
    auto gen = synth::general_facts(10, 4);
    std::mt19937_64 rng(8);
    std::vector<std::string> users = {"u_alpha", "u_beta", "u_gamma"};
    MtmConfig mc;
    mc.capacity_b = 40;
    for (int cyc = 0; cyc < 100; ++cyc) {
        for (int w = 0; w < 6; ++w) {
            const auto& u = users[rng() % users.size()];
            const auto& f = rng() % 2 ? facts[rng() % facts.size()] : gen[rng() % gen.size()];
            auto s = mock::summary_line(u, f.statement + " says " + u, "ok");
            write_mtm(mtm, make_item("", u, s, e.embed(s), 0), mc, 1000 + cyc);
        }
        auto rep = c.run_cycle(2000 + cyc);
        ASSERT_TRUE(rep);
        expect_well_formed(*ltm.snapshot(), users);
        auto before = ltm.snapshot();
        auto idle = c.run_cycle(2000 + cyc);
        ASSERT_FALSE(idle->published);
        ASSERT_EQ(ltm.snapshot(), before);
    }
    EXPECT_GT(ltm.snapshot()->node_count(), 0u);
}

TEST(ConsolidatorProperty, RepetitiveTrafficReinforcesInsteadOfGrowing) {
    MtmStore mtm(384);
    LtmStore ltm(384);
    MockEmbedder e;
    MockGateway gw;
    Consolidator c(mtm, ltm, e, gw);
    auto s = mock::summary_line("u", "the capital of peru is lima", "noted");
    for (int cyc = 0; cyc < 10; ++cyc) {
        mtm.with_user("u", [&](MtmPartition& p) {
            if (p.size() == 0) p.insert(make_item("m1", "u", s, e.embed(s), 1));
            p.mutable_items()[0].consolidation_flag = ConsolidationFlag::reactivated;
        });
        c.run_cycle_blocking(10 + cyc);
    }
    auto g = ltm.snapshot();
    ASSERT_EQ(g->node_count(), 1u);
    EXPECT_EQ(g->nodes()[0].evidence_count, 10u);
    EXPECT_GT(g->nodes()[0].confidence, 0.5);
}
