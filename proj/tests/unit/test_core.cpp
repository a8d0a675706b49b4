#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace lightmem;

namespace {

// reference renderer written against the documented line template
std::string render_ref(const std::vector<DialogueTurn>& turns) {
    std::ostringstream out;
    bool first = true;
    for (const auto& t : turns) {
        if (!first) out << "\n";
        first = false;
        out << "[" << t.turn_index << "] user: " << t.input_text;
        if (t.response_text) out << " / assistant: " << *t.response_text;
    }
    return out.str();
}

std::vector<std::uint64_t> indices(const StmBuffer& b) {
    std::vector<std::uint64_t> out;
    for (const auto& t : b.turns()) out.push_back(t.turn_index);
    return out;
}

}  // namespace

TEST(StmBuffer, DropsOldestWhenTurnLimitExceeded) {
    StmBuffer b("u", 2);
    b = stm_append(b, make_turn("u", 1, "one", "a"));
    b = stm_append(b, make_turn("u", 2, "two", "b"));
    b = stm_append(b, make_turn("u", 3, "three", "c"));
    EXPECT_EQ(indices(b), (std::vector<std::uint64_t>{2, 3}));
}

TEST(StmBuffer, AppendToEmpty) {
    StmBuffer b("u");
    b = stm_append(b, make_turn("u", 1, "hello there"));
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b.turns().front().input_text, "hello there");
}

TEST(StmBuffer, TokenLimitDropsOldestTurns) {
    // three turns of 3 tokens each = 9 tokens; limit 5
    StmBuffer b("u", 20, 5);
    b.append(make_turn("u", 1, "a b", "c"));
    b.append(make_turn("u", 2, "d e", "f"));
    b.append(make_turn("u", 3, "g h", "i"));
    std::size_t counted = 0;
    for (const auto& t : b.turns())
        counted += oracle::ws_tokens(t.input_text) + oracle::ws_tokens(t.response_text.value_or(""));
    EXPECT_LE(counted, 5u);
    EXPECT_EQ(counted, b.token_count());
    EXPECT_EQ(indices(b), (std::vector<std::uint64_t>{3}));
}

TEST(StmBuffer, RejectsNonMonotonicIndex) {
    StmBuffer b("u");
    b.append(make_turn("u", 4, "x"));
    EXPECT_THROW(b.append(make_turn("u", 4, "y")), PreconditionError);
    EXPECT_THROW(b.append(make_turn("u", 3, "y")), PreconditionError);
}

TEST(StmBuffer, RejectsForeignUserAndEmptyInput) {
    StmBuffer b("u");
    EXPECT_THROW(b.append(make_turn("v", 1, "x")), PreconditionError);
    EXPECT_THROW(b.append(make_turn("u", 1, "")), PreconditionError);
    EXPECT_THROW(StmBuffer("u", 0), PreconditionError);
}

TEST(StmBuffer, OversizedTurnIsCutToBudget) {
    StmBuffer b("u", 4, 4);
    b.append(make_turn("u", 1, "one two three", "four five six"));
    EXPECT_LE(b.token_count(), 4u);
    EXPECT_EQ(b.turns().back().input_text, "one two three");
    EXPECT_EQ(*b.turns().back().response_text, "four");
}

TEST(StmWindow, EmptyBufferRendersEmpty) { EXPECT_EQ(stm_window(StmBuffer("u")), ""); }

TEST(StmWindow, OneTurnContainsBothTextsInOrder) {
    StmBuffer b("u");
    b.append(make_turn("u", 1, "hi", "hello"));
    auto w = stm_window(b);
    EXPECT_EQ(w.find('\n'), std::string::npos);
    auto a = w.find("hi"), c = w.find("hello");
    ASSERT_NE(a, std::string::npos);
    ASSERT_NE(c, std::string::npos);
    EXPECT_LT(a, c);
}

TEST(StmWindow, MatchesReferenceRenderer) {
    StmBuffer b("u");
    std::vector<DialogueTurn> ts = {make_turn("u", 1, "where is my bag", "in the car"),
                                    make_turn("u", 2, "thanks", "you are welcome")};
    for (auto& t : ts) b.append(t);
    EXPECT_EQ(stm_window(b), render_ref(ts));
    EXPECT_EQ(stm_window(b), "[1] user: where is my bag / assistant: in the car\n"
                             "[2] user: thanks / assistant: you are welcome");
}

TEST(StmProperty, LimitsHoldForRandomSequences) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t mt = 1 + rng() % 6, mk = 1 + rng() % 30;
        StmBuffer b("u", mt, mk);
        std::vector<DialogueTurn> appended;
        for (std::uint64_t i = 1; i <= 25; ++i) {
            auto words = [&](std::size_t n) {
                std::string s;
                for (std::size_t w = 0; w < n; ++w) s += (w ? " w" : "w") + std::to_string(rng() % 100);
                return s;
            };
            auto t = make_turn("u", i * 2, words(1 + rng() % 8));
            if (rng() % 3) t.response_text = words(rng() % 8);
            b.append(t);
            ASSERT_LE(b.size(), mt);
            std::size_t tok = 0;
            for (const auto& x : b.turns())
                tok += oracle::ws_tokens(x.input_text) + oracle::ws_tokens(x.response_text.value_or(""));
            ASSERT_LE(tok, mk);
            ASSERT_EQ(b.turns().back().turn_index, i * 2);
            for (std::size_t j = 1; j < b.size(); ++j)
                ASSERT_LT(b.turns()[j - 1].turn_index, b.turns()[j].turn_index);
        }
    }
}

TEST(Text, NormalizedTokens) {
    EXPECT_EQ(text::normalized_tokens("  Paris, is  GREAT! ..."), (std::vector<std::string>{"paris", "is", "great"}));
    EXPECT_EQ(text::count_tokens(" a  b\tc\n"), 3u);
    EXPECT_EQ(text::first_tokens("a b c d", 2), "a b");
}

TEST(Flags, RoundTripNames) {
    for (auto f : {ConsolidationFlag::none, ConsolidationFlag::newly_written, ConsolidationFlag::reactivated,
                   ConsolidationFlag::low_utility})
        EXPECT_EQ(flag_from_string(to_string(f)), f);
    EXPECT_THROW(flag_from_string("bogus"), PreconditionError);
    for (auto r : {Relation::IsA, Relation::HasProperty, Relation::RelatedTo, Relation::Implies})
        EXPECT_EQ(relation_from_string(to_string(r)), r);
    EXPECT_FALSE(relation_from_string("PartOf").has_value());
}
