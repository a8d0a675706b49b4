#include <gtest/gtest.h>

#include "lightmem/bench.hpp"
#include "test_support.hpp"

using namespace lightmem;

namespace {

// nearest-rank percentile from first principles: smallest x with at least p% of the sample <= x
double percentile_oracle(std::vector<double> v, unsigned p) {
    std::sort(v.begin(), v.end());
    for (double x : v) {
        std::size_t le = std::count_if(v.begin(), v.end(), [&](double y) { return y <= x; });
        if (100 * le >= p * v.size()) return x;
    }
    return v.back();
}

}  // namespace

TEST(Metrics, ExactMatchScoresOne) {
    auto m = score_answer("paris", "paris");
    EXPECT_DOUBLE_EQ(m.f1, 1.0);
    EXPECT_DOUBLE_EQ(m.bleu1, 1.0);
    EXPECT_DOUBLE_EQ(m.rouge_l, 1.0);
}

TEST(Metrics, PartialOverlap) {
    EXPECT_DOUBLE_EQ(token_f1("the paris trip", "paris"), 0.5);
    EXPECT_DOUBLE_EQ(rouge_l("a b c", "a c"), 0.8);
    EXPECT_DOUBLE_EQ(bleu1("the paris trip", "paris"), 1.0 / 3.0);
    // short candidate pays the brevity penalty
    EXPECT_NEAR(bleu1("paris", "the paris trip"), std::exp(1.0 - 3.0), 1e-12);
    EXPECT_DOUBLE_EQ(token_f1("", "paris"), 0.0);
    EXPECT_DOUBLE_EQ(token_f1("london", "paris"), 0.0);
}

TEST(Metrics, CaseAndPunctuationIgnored) {
    EXPECT_DOUBLE_EQ(token_f1("Paris!", "paris"), 1.0);
}

TEST(Metrics, EmbeddingSimilarity) {
    MockEmbedder e;
    EXPECT_NEAR(score_answer("paris", "paris", &e).embed_sim, 1.0, 1e-6);
}

TEST(Percentiles, TenValues) {
    std::vector<double> v = {100, 90, 80, 70, 60, 50, 40, 30, 20, 10};
    auto p = latency_percentiles(v);
    EXPECT_EQ(p.p50, 50);
    EXPECT_EQ(p.p95, 100);
}

TEST(Percentiles, SingleValue) {
    auto p = latency_percentiles({7});
    EXPECT_EQ(p.p50, 7);
    EXPECT_EQ(p.p95, 7);
    EXPECT_THROW(latency_percentiles({}), PreconditionError);
}

TEST(Percentiles, ThousandSampleOracle) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> v(1 + rng() % 1000);
        for (auto& x : v) x = double(rng() % 500);
        for (unsigned p : {1u, 50u, 95u, 99u, 100u}) ASSERT_EQ(nearest_rank(v, p), percentile_oracle(v, p));
    }
}

TEST(Bootstrap, IdenticalInputsHaveZeroEffect) {
    std::vector<double> a = {0.1, 0.5, 0.9, 0.3, 0.7};
    auto r = paired_bootstrap(a, a, 1000, 1);
    EXPECT_EQ(r.delta, 0);
    EXPECT_EQ(r.ci_low, 0);
    EXPECT_EQ(r.ci_high, 0);
    EXPECT_EQ(r.p_value, 1.0);
}

TEST(Bootstrap, ConstantShift) {
    std::vector<double> a = {0.1, 0.5, 0.9, 0.3, 0.7}, b;
    for (double x : a) b.push_back(x + 1);
    auto r = paired_bootstrap(a, b, 1000, 1);
    EXPECT_NEAR(r.delta, 1.0, 1e-12);
    EXPECT_NEAR(r.ci_low, 1.0, 1e-12);
    EXPECT_NEAR(r.ci_high, 1.0, 1e-12);
    EXPECT_NEAR(r.p_value, 2.0 / 1001.0, 1e-12);
}

TEST(Bootstrap, RejectsBadInput) {
    EXPECT_THROW(paired_bootstrap({1, 2}, {1}), PreconditionError);
    EXPECT_THROW(paired_bootstrap({1}, {1}), PreconditionError);
    EXPECT_THROW(paired_bootstrap({1, 2}, {1, 2}, 0), PreconditionError);
}

TEST(Bootstrap, DetectsHalfUnitShift) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0, 1);
    int hits = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> a(200), b(200);
        for (std::size_t i = 0; i < 200; ++i) {
            a[i] = g(rng);
            b[i] = g(rng) + 0.5;
        }
        auto r = paired_bootstrap(a, b, 1000, std::uint64_t(t));
        hits += r.p_value < 0.05;
        ASSERT_LE(r.ci_low, r.delta);
        ASSERT_GE(r.ci_high, r.delta);
    }
    EXPECT_GE(hits, 95);
}

TEST(Bootstrap, SeedDeterministic) {
    std::vector<double> a = {0.1, 0.4, 0.2, 0.8}, b = {0.3, 0.3, 0.9, 0.1};
    auto x = paired_bootstrap(a, b, 500, 9), y = paired_bootstrap(a, b, 500, 9);
    EXPECT_EQ(x.ci_low, y.ci_low);
    EXPECT_EQ(x.p_value, y.p_value);
}

TEST(Growth, UnreachableCheckpointsMarked) {
    bench::GrowthConfig cfg;
    cfg.checkpoints = {20, 100000};
    cfg.trajectory_length = 60;
    cfg.dimension = 64;
    auto r = bench::run_growth_stress(cfg);
    ASSERT_EQ(r.points.size(), 2u);
    EXPECT_TRUE(r.points[0].reached);
    EXPECT_FALSE(r.points[1].reached);
    auto j = bench::to_json(r);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_FALSE(j["checkpoints"][1].contains("full_f1"));
}

TEST(Growth, SmallRunIsDeterministicAndFullNotWorse) {
    bench::GrowthConfig cfg;
    cfg.checkpoints = {100, 300};
    cfg.seed = 3;
    auto a = bench::to_json(bench::run_growth_stress(cfg)).dump();
    auto b = bench::to_json(bench::run_growth_stress(cfg)).dump();
    EXPECT_EQ(a, b);
    for (const auto& p : json::parse(a)["checkpoints"])
        EXPECT_GE(p["full_f1"].get<double>(), p["vector_only_f1"].get<double>());
    EXPECT_THROW(bench::run_growth_stress(bench::GrowthConfig{{}, 0}), PreconditionError);
}

TEST(ErrorInjection, BypassNotBetterThanFull) {
    auto t = bench::make_transcript(1, 150, 60);
    auto a = bench::run_error_injection(t, {bench::Group::A_full, 0.5, 1});
    auto c = bench::run_error_injection(t, {bench::Group::C_no_stage2, 0.5, 1});
    EXPECT_EQ(a.f1s.size(), 60u);
    EXPECT_LE(c.metrics.f1, a.metrics.f1);
    EXPECT_EQ(a.noisy_writes, 0u);
    auto d = bench::run_error_injection(t, {bench::Group::D_write_noise, 0.5, 1});
    EXPECT_GT(d.noisy_writes, 0u);
    EXPECT_EQ(d.noisy_hqs, 0u);
    EXPECT_THROW(bench::run_error_injection(t, {bench::Group::A_full, 1.5, 1}), PreconditionError);
}

TEST(ErrorInjection, ReportShape) {
    auto r = bench::run_error_injection_suite(2);
    auto j = bench::to_json(r);
    EXPECT_EQ(j["schema_version"], 1);
    ASSERT_EQ(j["groups"].size(), 5u);
    EXPECT_FALSE(j["groups"][0].contains("vs_full"));
    EXPECT_TRUE(j["groups"][4].contains("vs_full"));
    EXPECT_EQ(j.dump(), bench::to_json(bench::run_error_injection_suite(2)).dump());
}

TEST(UpdateGap, ModesParseAndReport) {
    for (auto m : bench::all_gap_modes()) EXPECT_EQ(bench::gap_mode_from_string(bench::to_string(m)), m);
    EXPECT_THROW(bench::gap_mode_from_string("both"), PreconditionError);
    auto corpus = bench::make_gap_corpus(4, 6, 30, 60, 20);
    auto full = bench::run_update_gap(corpus, bench::GapMode::full);
    auto ltm = bench::run_update_gap(corpus, bench::GapMode::ltm_only);
    EXPECT_GE(full.metrics.f1, ltm.metrics.f1);
    EXPECT_GT(full.ltm_nodes, 0u);
    EXPECT_EQ(bench::to_json(full, 4)["schema_version"], 1);
}

TEST(Latency, SmallRunReportsOrderedPercentiles) {
    bench::LatencyConfig lc;
    lc.n_queries = 20;
    lc.mtm_items = 500;
    lc.ltm_places = 5;
    auto r = bench::run_latency(lc);
    EXPECT_LE(r.retrieval.p50, r.retrieval.p95);
    EXPECT_LE(r.end_to_end.p50, r.end_to_end.p95);
    EXPECT_TRUE(r.retrieval_within_end_to_end);
    EXPECT_EQ(r.mtm_items, 500u);
    EXPECT_EQ(bench::to_json(r)["schema_version"], 1);
}
