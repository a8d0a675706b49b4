#include <gtest/gtest.h>

#include "../common/golden.hpp"

TEST(GoldenSession, AnswersMatchFixture) {
    auto fx = golden::load_fixture(LIGHTMEM_FIXTURE_DIR);
    auto transcript = lightmem::json::parse(golden::run(fx));
    ASSERT_EQ(transcript.size(), fx["turns"].size());
    for (std::size_t i = 0; i < transcript.size(); ++i)
        EXPECT_EQ(transcript[i]["answer"], fx["turns"][i]["expected_answer"]) << i;
}

TEST(GoldenSession, ByteIdenticalAcrossRuns) {
    auto fx = golden::load_fixture(LIGHTMEM_FIXTURE_DIR);
    EXPECT_EQ(golden::run(fx), golden::run(fx));
}

TEST(GoldenSession, PromptCarriesWindowAndMemories) {
    auto fx = golden::load_fixture(LIGHTMEM_FIXTURE_DIR);
    auto transcript = lightmem::json::parse(golden::run(fx));
    auto p = transcript[1]["prompt"].get<std::string>();
    EXPECT_NE(p.find("[1] user: I am vegetarian and I live in Lisbon / assistant: no relevant memory"), std::string::npos);
    EXPECT_NE(p.find("- user golden_user said: I am vegetarian"), std::string::npos);
    EXPECT_EQ(p.substr(p.size() - 22), "User: Where do I live?");
}
