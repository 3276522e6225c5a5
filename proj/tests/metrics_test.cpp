#include <gtest/gtest.h>

#include "support.hpp"
#include "tabdsr/metrics.hpp"

using namespace tabdsr;

TEST(Rouge, WorkedExample) { EXPECT_DOUBLE_EQ(rouge_l("the cat sat", "the cat"), 0.8); }

TEST(Rouge, TokenizerLowercasesAndSplits) {
  EXPECT_EQ(rouge_tokens("Net-Income, 2019!"), (std::vector<std::string>{"net", "income", "2019"}));
  EXPECT_TRUE(rouge_tokens(" ,;").empty());
}

TEST(Rouge, EmptySides) {
  EXPECT_EQ(rouge_l("", "x"), 0.0);
  EXPECT_EQ(rouge_l("x", ""), 0.0);
}

TEST(Rouge, MatchesBruteForce) {
  SplitMix64 rng(3);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> x, y;
    for (auto n = rng.below(11); n > 0; --n) x.push_back(vocab[rng.below(4)]);
    for (auto n = rng.below(11); n > 0; --n) y.push_back(vocab[rng.below(4)]);
    EXPECT_EQ(lcs_length(x, y), support::brute_force_lcs(x, y));
    EXPECT_NEAR(rouge_l_tokens(x, y), support::brute_force_rouge_l(x, y), 1e-9);
  }
}

TEST(Accuracy, NumbersWithinTolerance) {
  EXPECT_TRUE(answers_match("1234.5", "$1,234.50"));
  EXPECT_TRUE(answers_match("24.5", "24.5%"));
  EXPECT_TRUE(answers_match("100.001", "100"));
  EXPECT_FALSE(answers_match("100.02", "100"));
  EXPECT_TRUE(answers_match("0.0000005", "0"));
}

TEST(Accuracy, TextAndLists) {
  EXPECT_TRUE(answers_match("  Harbor   street ", "harbor street"));
  EXPECT_TRUE(answers_match("Li, Ana", "Ana, Li"));
  EXPECT_FALSE(answers_match("Ana", "Ana, Li"));
  EXPECT_FALSE(answers_match("Ana, Ana", "Ana, Li"));
}
