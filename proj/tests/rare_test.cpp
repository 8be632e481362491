#include <gtest/gtest.h>

#include <cmath>

#include "tagagg/rare.hpp"
#include "tagagg/synth.hpp"
#include "test_support.hpp"

namespace tagagg {
namespace {

TEST(TruncateNormalize, KeepsTopK) {
  const std::vector<double> s = {0.2, 0.8, 0.5, 0.5};
  auto w = rare::truncate_normalize(s, 2);
  EXPECT_EQ(w.k, 2u);
  EXPECT_DOUBLE_EQ(w.omega[0], 0.0);
  EXPECT_NEAR(w.omega[1], 0.8 / 1.3, 1e-15);
  EXPECT_NEAR(w.omega[2], 0.5 / 1.3, 1e-15);
  EXPECT_DOUBLE_EQ(w.omega[3], 0.0);  // tie at the cut goes to the lower index
}

TEST(TruncateNormalize, LargeKKeepsEverything) {
  const std::vector<double> s = {1.0, 3.0};
  auto w = rare::truncate_normalize(s, 10);
  EXPECT_EQ(w.k, 2u);
  EXPECT_DOUBLE_EQ(w.omega[0], 0.25);
  EXPECT_DOUBLE_EQ(w.omega[1], 0.75);
}

TEST(TruncateNormalize, Errors) {
  EXPECT_THROW(rare::truncate_normalize(std::vector<double>{0.0, 0.0}, 1), DataError);
  EXPECT_THROW(rare::truncate_normalize(std::vector<double>{1.0}, 0), DataError);
  EXPECT_THROW(rare::truncate_normalize(std::vector<double>{}, 1), DataError);
  EXPECT_THROW(rare::truncate_normalize(std::vector<double>{-0.1, 1.0}, 1), DataError);
}

TEST(Schedule, FrequenciesFollowWeights) {
  const std::vector<double> s = {0.1, 0.6, 0.3, 0.0};
  auto w = rare::truncate_normalize(s, 4);
  const std::size_t n = 10000;
  auto sched = rare::make_schedule(w, n, 77);
  std::vector<double> hits(4, 0.0);
  for (auto a : sched.assignments) hits[a] += 1.0;
  for (std::size_t j = 0; j < 4; ++j) {
    const double sd = std::sqrt(n * w.omega[j] * (1 - w.omega[j]));
    EXPECT_NEAR(hits[j], n * w.omega[j], 3 * sd + 1e-9) << j;
  }
  EXPECT_EQ(rare::make_schedule(w, n, 77).assignments, sched.assignments);
}

Corpus two_word_corpus(const std::string& silver_tag, std::size_t copies) {
  Corpus c;
  c.labels = LabelSet({"A", "B"});
  c.source_ids = {"s"};
  for (std::size_t n = 0; n < copies; ++n) {
    Sentence s;
    s.tokens = {"x"};
    s.layers["s"] = {silver_tag};
    s.gold = TagSequence{"B-B"};
    c.sentences.push_back(s);
  }
  return c;
}

// Silver labels x -> B-A four times, then gold x -> B-B once for five
// epochs: the memo tagger sees 4 vs 5 and must say B-B. With six silver
// copies it sees 6 vs 5 and keeps B-A.
TEST(MemoTagger, FineTuningOutweighsSilverOnlyWhenCountsDo) {
  for (auto [copies, expect] : {std::pair<std::size_t, const char*>{4, "B-B"}, {6, "B-A"}}) {
    auto silver = two_word_corpus("B-A", copies);
    rare::MemoTagger tagger;
    rare::Schedule sched;
    sched.assignments.assign(rare::batches_per_epoch(copies, 100), 0);
    rare::distill(silver, sched, tagger);
    EXPECT_DOUBLE_EQ(tagger.count("x", "B-A"), static_cast<double>(copies));
    rare::finetune(tagger, two_word_corpus("B-A", 1));
    EXPECT_DOUBLE_EQ(tagger.count("x", "B-B"), 5.0);
    EXPECT_EQ(tagger.predict(std::vector<std::string>{"x"}), (TagSequence{expect})) << copies;
  }
}

TEST(MemoTagger, UnknownWordsAndTies) {
  rare::MemoTagger t;
  std::vector<std::string> toks = {"a", "b"};
  std::vector<std::string> tags1 = {"B-PER", "I-PER"}, tags2 = {"B-LOC", "O"};
  std::vector<rare::LabeledSentence> batch = {{toks, tags1}, {toks, tags2}};
  t.train(batch);
  // a: B-LOC and B-PER tie -> B-LOC; b: I-PER and O tie -> I-PER, which
  // after B-LOC is repaired to B-PER.
  EXPECT_EQ(t.predict(toks), (TagSequence{"B-LOC", "B-PER"}));
  EXPECT_EQ(t.predict(std::vector<std::string>{"zzz"}), (TagSequence{"O"}));
}

TEST(Distill, BatchesFollowScheduleAndSeed) {
  synth::TaggingSimConfig cfg;
  cfg.sentences = 250;
  cfg.sources = {synth::Reliable{0.9}, synth::Reliable{0.5}, synth::Spammer{}};
  auto c = synth::simulate_tagging_corpus(cfg);
  auto w = rare::truncate_normalize(std::vector<double>{0.5, 0.3, 0.2}, 3);
  auto sched = rare::make_schedule(w, 3 * 2, 5);  // 3 batches per epoch, 2 epochs
  rare::MemoTagger a, b;
  auto ta = rare::distill(c, sched, a);
  auto tb = rare::distill(c, sched, b);
  ASSERT_EQ(ta.epochs.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) {
    std::vector<std::size_t> seen;
    for (const auto& rec : ta.epochs[e]) {
      EXPECT_EQ(rec.source, sched.assignments[rec.batch]);
      seen.insert(seen.end(), rec.sentences.begin(), rec.sentences.end());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> all(250);
    std::iota(all.begin(), all.end(), std::size_t{0});
    EXPECT_EQ(seen, all);
    EXPECT_EQ(rare::silver_conll(c, ta, e), rare::silver_conll(c, tb, e));
  }
  EXPECT_NE(ta.epochs[0][0].sentences, ta.epochs[1][0].sentences);
  sched.assignments.pop_back();
  EXPECT_THROW(rare::distill(c, sched, a), DataError);
}

TEST(RunRare, RankingUsesEntityF1) {
  auto c = testing::five_source_corpus();
  c.sentences[0].gold = TagSequence{"O", "B-PER", "I-PER", "I-PER"};
  auto s = rare::rank_sources(c);
  EXPECT_EQ(s, (std::vector<double>{0.0, 0.0, 0.0, 1.0, 1.0}));
  rare::MemoTagger t;
  rare::RareConfig cfg;
  cfg.top_k = 1;
  auto r = rare::run_rare(c, c, t, cfg);
  EXPECT_EQ(r.weights.omega, (std::vector<double>{0.0, 0.0, 0.0, 1.0, 0.0}));
  for (auto a : r.schedule.assignments) EXPECT_EQ(a, 3u);
  EXPECT_EQ(t.predict(c.sentences[0].tokens), *c.sentences[0].gold);
}

}  // namespace
}  // namespace tagagg
