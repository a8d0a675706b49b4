#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace lightmem;

namespace {

struct OracleHit {
    std::string id;
    double score;
    Timestamp created;
};

// full linear scan, full sort, documented tie-break
std::vector<OracleHit> brute_force(const std::vector<MemoryItem>& items, const std::vector<float>& q,
                                   const MetadataFilter& f, std::size_t k) {
    std::vector<OracleHit> all;
    for (const auto& it : items) {
        if (it.user_id != f.user_id) continue;
        if (f.time_window && (it.created_at < f.time_window->start || it.created_at > f.time_window->end)) continue;
        if (!f.type_tags.empty()) {
            bool any = false;
            for (const auto& t : it.type_tags) any = any || f.type_tags.count(t);
            if (!any) continue;
        }
        all.push_back({it.item_id, oracle::cosine(q, it.embedding), it.created_at});
    }
    std::sort(all.begin(), all.end(), [](const OracleHit& a, const OracleHit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.created != b.created) return a.created > b.created;
        return a.id < b.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

}  // namespace

TEST(Embed, MockIsDeterministic) {
    MockEmbedder e;
    EXPECT_EQ(e.embed("the quick brown fox"), e.embed("the quick brown fox"));
    MockEmbedder e2;
    EXPECT_EQ(e.embed("the quick brown fox"), e2.embed("the quick brown fox"));
}

TEST(Embed, DefaultDimensionIs384) {
    EXPECT_EQ(EmbeddingConfig{}.dimension, 384u);
    auto e = make_embedder(EmbeddingConfig{});
    EXPECT_EQ(e->embed("anything at all").size(), 384u);
}

TEST(Embed, UnitNormByIndependentComputation) {
    MockEmbedder e;
    for (const char* s : {"a", "hello world", "Paris is the capital of France.", "!!!", "x y z x y z"}) {
        auto v = e.embed(s);
        EXPECT_NEAR(static_cast<double>(oracle::norm(v)), 1.0, 1e-6) << s;
    }
}

TEST(Embed, RejectsEmptyText) {
    MockEmbedder e;
    EXPECT_THROW(e.embed(""), PreconditionError);
}

TEST(Embed, SimilarTextsScoreHigher) {
    MockEmbedder e;
    auto a = e.embed("my sister likes green tea");
    auto b = e.embed("my sister likes green tea a lot");
    auto c = e.embed("quarterly revenue projections");
    EXPECT_GT(cosine(a, b), cosine(a, c));
}

TEST(Cosine, BasicCases) {
    std::vector<float> v = {0.3f, -1.2f, 4.0f};
    EXPECT_NEAR(cosine(v, v), 1.0, 1e-12);
    EXPECT_EQ(cosine(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0);
    EXPECT_THROW(cosine(std::vector<float>{0, 0}, std::vector<float>{0, 1}), PreconditionError);
    EXPECT_THROW(cosine(std::vector<float>{1}, std::vector<float>{0, 1}), PreconditionError);
}

TEST(Cosine, MatchesOracleOnRandomPairs) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        auto a = oracle::random_unit(rng, 384), b = oracle::random_unit(rng, 384);
        EXPECT_NEAR(cosine(a, b), oracle::cosine(a, b), 1e-9);
    }
}

TEST(Search, FiltersByUser) {
    MtmStore store(2);
    for (auto [id, u] : {std::pair{"a1", "A"}, {"b1", "B"}, {"a2", "A"}})
        store.with_user(u, [&](MtmPartition& p) { p.insert(make_item(id, u, "s", {1.f, 0.5f})); });
    MetadataFilter f;
    f.user_id = "A";
    auto hits = store.search(std::vector<float>{1.f, 0.f}, f, 10, 5000);
    ASSERT_EQ(hits.size(), 2u);
    for (const auto& h : hits) EXPECT_EQ(h.id[0], 'a');
}

TEST(Search, PlantedExactMatchRanksFirst) {
    std::mt19937_64 rng(8);
    MtmStore store(64);
    auto q = oracle::random_unit(rng, 64);
    store.with_user("u", [&](MtmPartition& p) {
        for (int i = 0; i < 30; ++i) p.insert(make_item("m" + std::to_string(i), "u", "s", oracle::random_unit(rng, 64)));
        p.insert(make_item("planted", "u", "s", q));
    });
    MetadataFilter f;
    f.user_id = "u";
    auto hits = store.search(q, f, 5, 10);
    ASSERT_FALSE(hits.empty());
    EXPECT_EQ(hits[0].id, "planted");
    EXPECT_NEAR(hits[0].score, 1.0, 1e-12);
}

TEST(Search, MatchesLinearScanOracle) {
    std::mt19937_64 rng(21);
    MtmStore store(32);
    std::vector<MemoryItem> items;
    for (int i = 0; i < 200; ++i) {
        auto it = make_item("m" + std::to_string(1000 + i), i % 2 ? "u" : "v", "s", oracle::random_unit(rng, 32),
                            1000 + static_cast<Timestamp>(rng() % 50));
        items.push_back(it);
        store.with_user(it.user_id, [&](MtmPartition& p) { p.insert(it); });
    }
    for (int t = 0; t < 20; ++t) {
        auto q = oracle::random_unit(rng, 32);
        MetadataFilter f;
        f.user_id = "u";
        auto got = store.search(q, f, 10, 99999);
        auto want = brute_force(items, q, f, 10);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].id, want[i].id);
            EXPECT_NEAR(got[i].score, want[i].score, 1e-9);
        }
    }
}

TEST(Search, TieBreakNewerThenId) {
    MtmStore store(2);
    store.with_user("u", [&](MtmPartition& p) {
        p.insert(make_item("b", "u", "s", {1, 0}, 100));
        p.insert(make_item("a", "u", "s", {1, 0}, 100));
        p.insert(make_item("c", "u", "s", {1, 0}, 200));
    });
    MetadataFilter f;
    f.user_id = "u";
    auto hits = store.search(std::vector<float>{1, 0}, f, 3, 300);
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0].id, "c");
    EXPECT_EQ(hits[1].id, "a");
    EXPECT_EQ(hits[2].id, "b");
}

TEST(Search, UpdatesAccessStatsOfReturnedItemsOnly) {
    MtmStore store(2);
    store.with_user("u", [&](MtmPartition& p) {
        p.insert(make_item("near", "u", "s", {1, 0}, 100));
        p.insert(make_item("far", "u", "s", {-1, 0.01f}, 100));
    });
    MetadataFilter f;
    f.user_id = "u";
    store.search(std::vector<float>{1, 0}, f, 1, 777);
    store.with_user("u", [&](const MtmPartition& p) {
        EXPECT_EQ(p.find("near")->access_count, 1u);
        EXPECT_EQ(p.find("near")->last_accessed, 777);
        EXPECT_EQ(p.find("near")->consolidation_flag, ConsolidationFlag::reactivated);
        EXPECT_EQ(p.find("far")->access_count, 0u);
    });
}

TEST(Search, RespectsTimeWindowAndTags) {
    MtmStore store(2);
    store.with_user("u", [&](MtmPartition& p) {
        auto a = make_item("old", "u", "s", {1, 0}, 10);
        a.type_tags = {"fact"};
        auto b = make_item("new", "u", "s", {1, 0}, 500);
        b.type_tags = {"preference"};
        p.insert(a);
        p.insert(b);
    });
    MetadataFilter f;
    f.user_id = "u";
    f.time_window = TimeWindow{100, 1000};
    auto hits = store.search(std::vector<float>{1, 0}, f, 5, 1000);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, "new");
    f.time_window.reset();
    f.type_tags = {"fact"};
    hits = store.search(std::vector<float>{1, 0}, f, 5, 1000);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, "old");
    f.time_window = TimeWindow{5, 1};
    EXPECT_THROW(store.search(std::vector<float>{1, 0}, f, 5, 1000), PreconditionError);
}

TEST(Search, RejectsDimensionMismatch) {
    MtmStore store(3);
    MetadataFilter f;
    f.user_id = "u";
    EXPECT_THROW(store.search(std::vector<float>{1, 0}, f, 5, 0), PreconditionError);
}

TEST(SearchProperty, NeverReturnsFilterViolations) {
    std::mt19937_64 rng(77);
    const std::vector<std::string> users = {"u1", "u2", "u3"};
    const std::vector<std::string> tags = {"fact", "preference", "episode"};
    for (int trial = 0; trial < 50; ++trial) {
        MtmStore store(8);
        std::vector<MemoryItem> items;
        for (int i = 0; i < 60; ++i) {
            auto it = make_item("m" + std::to_string(i), users[rng() % 3], "s", oracle::random_unit(rng, 8),
                                static_cast<Timestamp>(rng() % 1000));
            it.type_tags = {tags[rng() % 3]};
            items.push_back(it);
            store.with_user(it.user_id, [&](MtmPartition& p) { p.insert(it); });
        }
        MetadataFilter f;
        f.user_id = users[rng() % 3];
        if (rng() % 2) {
            Timestamp a = rng() % 1000, b = rng() % 1000;
            f.time_window = TimeWindow{std::min(a, b), std::max(a, b)};
        }
        if (rng() % 2) f.type_tags = {tags[rng() % 3]};
        std::size_t k = 1 + rng() % 20;
        auto q = oracle::random_unit(rng, 8);
        auto got = store.search(q, f, k, 5000);
        auto want = brute_force(items, q, f, k);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            ASSERT_EQ(got[i].id, want[i].id);
            const auto& it = *std::find_if(items.begin(), items.end(), [&](auto& x) { return x.item_id == got[i].id; });
            ASSERT_TRUE(f.matches(it));
        }
    }
}

TEST(LtmSearch, HasNoAccessCounters) {
    LtmGraph g(2);
    LtmNode n;
    n.node_id = g.next_node_id();
    n.label = "a concept";
    n.embedding = {1, 0};
    g.add_node(n);
    auto before = g.nodes();
    auto hits = g.search(std::vector<float>{1, 0}, 3);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].store, StoreKind::LTM);
    EXPECT_EQ(g.nodes(), before);
}

TEST(Partition, EraseAndReplaceKeepIndexConsistent) {
    MtmPartition p("u");
    for (int i = 0; i < 5; ++i) p.insert(make_item("m" + std::to_string(i), "u", "s" + std::to_string(i), {1, float(i)}));
    ASSERT_TRUE(p.erase("m1"));
    EXPECT_EQ(p.size(), 4u);
    EXPECT_EQ(p.find("m1"), nullptr);
    ASSERT_NE(p.find("m4"), nullptr);
    EXPECT_EQ(p.find("m4")->summary, "s4");
    p.replace("m4", make_item("m9", "u", "nine", {0, 1}));
    EXPECT_EQ(p.find("m4"), nullptr);
    EXPECT_EQ(p.find("m9")->summary, "nine");
    EXPECT_THROW(p.insert(make_item("m9", "u", "dup", {1, 1})), PreconditionError);
    EXPECT_THROW(p.insert(make_item("x", "other", "s", {1, 1})), PreconditionError);
}
