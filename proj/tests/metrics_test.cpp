#include <gtest/gtest.h>

#include <random>

#include "tagagg/metrics.hpp"
#include "test_support.hpp"

namespace tagagg {
namespace {

using Spans = std::vector<EntitySpan>;

TEST(EntityF1, HandExample) {
  std::vector<Spans> pred = {{{0, 2, "PER"}, {3, 4, "LOC"}}};
  std::vector<Spans> gold = {{{0, 2, "PER"}, {3, 5, "LOC"}}};
  auto s = metrics::entity_f1(pred, gold);
  EXPECT_EQ(s.tp, 1u);
  EXPECT_EQ(s.fp, 1u);
  EXPECT_EQ(s.fn, 1u);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f1, 0.5);
}

TEST(EntityF1, TypeMustMatch) {
  std::vector<Spans> pred = {{{0, 2, "ORG"}}};
  std::vector<Spans> gold = {{{0, 2, "PER"}}};
  EXPECT_DOUBLE_EQ(metrics::entity_f1(pred, gold).f1, 0.0);
}

TEST(EntityF1, EmptyEverywhereScoresZero) {
  std::vector<Spans> none(3);
  auto s = metrics::entity_f1(none, none);
  EXPECT_EQ(s.tp + s.fp + s.fn, 0u);
  EXPECT_DOUBLE_EQ(s.f1, 0.0);
}

TEST(EntityF1, SentenceCountMismatch) {
  std::vector<Spans> a(2), b(3);
  EXPECT_THROW(metrics::entity_f1(a, b), DataError);
}

// Counts computed with a nested loop instead of sorted set intersection.
TEST(EntityF1, MatchesPairwiseCounting) {
  const LabelSet labels({"LOC", "ORG", "PER"});
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Spans> pred, gold;
    std::size_t tp = 0, np = 0, ng = 0;
    for (int s = 0; s < 4; ++s) {
      pred.push_back(decode_spans(repair_bio(testing::random_tags(rng, labels, 8))));
      gold.push_back(decode_spans(repair_bio(testing::random_tags(rng, labels, 8))));
      np += pred.back().size();
      ng += gold.back().size();
      for (const auto& p : pred.back())
        for (const auto& g : gold.back()) tp += (p.start == g.start && p.end == g.end && p.etype == g.etype);
    }
    auto score = metrics::entity_f1(pred, gold);
    ASSERT_EQ(score.tp, tp);
    ASSERT_EQ(score.fp, np - tp);
    ASSERT_EQ(score.fn, ng - tp);
    const double expect = np + ng == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(np + ng);
    ASSERT_NEAR(score.f1, expect, 1e-12);
  }
}

TEST(EntityF1, CorpusLayerAgainstGold) {
  auto c = testing::five_source_corpus();
  c.sentences[0].gold = TagSequence{"O", "B-PER", "I-PER", "I-PER"};
  EXPECT_DOUBLE_EQ(metrics::entity_f1(c, "M4").f1, 1.0);
  EXPECT_DOUBLE_EQ(metrics::entity_f1(c, "M1").f1, 0.0);
  c.sentences[0].gold.reset();
  EXPECT_THROW(metrics::entity_f1(c, "M4"), DataError);
}

TEST(TokenAccuracy, Examples) {
  EXPECT_DOUBLE_EQ(metrics::token_accuracy(std::vector<int>{1, 2, 3, 4}, std::vector<int>{1, 2, 0, 4}), 0.75);
  EXPECT_DOUBLE_EQ(metrics::token_accuracy(std::vector<int>{}, std::vector<int>{}), 0.0);
  EXPECT_THROW(metrics::token_accuracy(std::vector<int>{1}, std::vector<int>{}), DataError);
}

}  // namespace
}  // namespace tagagg
