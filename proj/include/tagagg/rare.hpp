#pragma once

// Rank-and-retrain: score sources on a small gold set, keep the top k with
// weights proportional to their scores, distil a tagger from a per-batch
// mixture of source labels, then fine-tune it on the gold set.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tagagg/corpus_io.hpp"
#include "tagagg/error.hpp"
#include "tagagg/metrics.hpp"

namespace tagagg::rare {

inline constexpr int kDefaultFinetuneEpochs = 5;

struct SourceWeights {
  std::vector<double> s;      // per-source score
  std::size_t k = 0;          // truncation rank actually applied
  std::vector<double> omega;  // mixture weights, zero outside the top k
};

struct Schedule {
  std::vector<std::size_t> assignments;  // batch -> source index
  std::uint64_t seed = 0;
  std::size_t batch_size = 100;
};

/// Entity F1 of every source against gold, in corpus.source_ids order.
inline std::vector<double> rank_sources(const Corpus& corpus_with_gold) {
  std::vector<double> s;
  s.reserve(corpus_with_gold.source_ids.size());
  for (const auto& id : corpus_with_gold.source_ids)
    s.push_back(metrics::entity_f1(corpus_with_gold, id).f1);
  return s;
}

/// Zeroes every score outside the top k (ties at the cut go to the lower
/// source index) and normalises the rest. k larger than the number of
/// sources keeps all of them.
inline SourceWeights truncate_normalize(std::span<const double> s, std::size_t k) {
  if (k == 0) throw DataError("k must be >= 1");
  if (s.empty()) throw DataError("no usable sources: empty score vector");
  for (double x : s)
    if (!(x >= 0.0)) throw DataError("scores must be non-negative");
  SourceWeights w;
  w.s.assign(s.begin(), s.end());
  w.k = std::min(k, s.size());
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  double total = 0.0;
  for (std::size_t r = 0; r < w.k; ++r) total += s[order[r]];
  if (!(total > 0.0)) throw DataError("no usable sources: all top-k scores are zero");
  w.omega.assign(s.size(), 0.0);
  for (std::size_t r = 0; r < w.k; ++r) w.omega[order[r]] = s[order[r]] / total;
  return w;
}

/// i.i.d. categorical draw from omega for every batch.
inline Schedule make_schedule(const SourceWeights& w, std::size_t n_batches, std::uint64_t seed,
                              std::size_t batch_size = 100) {
  if (n_batches == 0) throw DataError("n_batches must be >= 1");
  if (batch_size == 0) throw DataError("batch_size must be >= 1");
  Schedule out;
  out.seed = seed;
  out.batch_size = batch_size;
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(w.omega.begin(), w.omega.end());
  out.assignments.reserve(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) out.assignments.push_back(pick(rng));
  return out;
}

inline std::size_t batches_per_epoch(std::size_t n_sentences, std::size_t batch_size) {
  return (n_sentences + batch_size - 1) / batch_size;
}

// ---------------------------------------------------------------------------
// Tagger port.

struct LabeledSentence {
  std::span<const std::string> tokens;
  std::span<const std::string> tags;
};

/// Target model trained by distillation. Implementations are single-writer:
/// train and fine_tune must not run concurrently.
class Tagger {
 public:
  virtual ~Tagger() = default;
  // One mini-batch update.
  virtual void train(std::span<const LabeledSentence> batch) = 0;
  virtual void fine_tune(std::span<const LabeledSentence> data, int epochs) = 0;
  // Output has one tag per token and is valid BIO.
  virtual TagSequence predict(std::span<const std::string> tokens) const = 0;
  virtual std::unique_ptr<Tagger> clone() const = 0;
};

/// Counts (token, tag) pairs and predicts each token's most frequent tag
/// (ties: smallest tag string); unseen tokens are O.
class MemoTagger final : public Tagger {
 public:
  void train(std::span<const LabeledSentence> batch) override {
    for (const auto& ex : batch) {
      if (ex.tokens.size() != ex.tags.size()) throw DataError("token/tag length mismatch");
      for (std::size_t i = 0; i < ex.tokens.size(); ++i) counts_[ex.tokens[i]][ex.tags[i]] += 1.0;
    }
  }

  void fine_tune(std::span<const LabeledSentence> data, int epochs) override {
    for (int e = 0; e < epochs; ++e) train(data);
  }

  TagSequence predict(std::span<const std::string> tokens) const override {
    TagSequence out;
    out.reserve(tokens.size());
    for (const auto& tok : tokens) {
      auto it = counts_.find(tok);
      if (it == counts_.end()) {
        out.emplace_back(kOutsideTag);
        continue;
      }
      const std::string* best = nullptr;
      double best_n = -1.0;
      for (const auto& [tag, n] : it->second)
        if (n > best_n) {
          best = &tag;
          best_n = n;
        }
      out.push_back(*best);
    }
    return repair_bio(out);
  }

  std::unique_ptr<Tagger> clone() const override { return std::make_unique<MemoTagger>(*this); }

  using Table = std::map<std::string, std::map<std::string, double>, std::less<>>;

  const Table& table() const noexcept { return counts_; }
  void add(const std::string& token, const std::string& tag, double n) { counts_[token][tag] += n; }

  double count(const std::string& token, const std::string& tag) const {
    auto it = counts_.find(token);
    if (it == counts_.end()) return 0.0;
    auto jt = it->second.find(tag);
    return jt == it->second.end() ? 0.0 : jt->second;
  }

 private:
  Table counts_;
};

inline std::unique_ptr<Tagger> memo_tagger() { return std::make_unique<MemoTagger>(); }

// ---------------------------------------------------------------------------
// Distillation and fine-tuning.

struct BatchRecord {
  std::size_t batch = 0;
  std::size_t source = 0;  // index into corpus.source_ids
  std::vector<std::size_t> sentences;
};

struct DistillTrace {
  std::vector<std::vector<BatchRecord>> epochs;
};

inline std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0xd157u};
  return std::mt19937_64(seq);
}

/// Trains `tagger` for as many epochs as the schedule covers. Each epoch
/// shuffles the sentences (seeded), cuts them into batches, and supervises
/// batch b with the tags of source schedule.assignments[b]. The schedule
/// length must be a whole number of epochs.
inline DistillTrace distill(const Corpus& corpus, const Schedule& schedule, Tagger& tagger) {
  DistillTrace trace;
  const std::size_t per_epoch = batches_per_epoch(corpus.sentences.size(), schedule.batch_size);
  if (per_epoch == 0) return trace;
  if (schedule.assignments.size() % per_epoch != 0)
    throw DataError("schedule length " + std::to_string(schedule.assignments.size()) +
                    " is not a multiple of " + std::to_string(per_epoch) + " batches per epoch");
  for (auto src : schedule.assignments)
    if (src >= corpus.source_ids.size()) throw DataError("schedule names an unknown source");

  const std::size_t epochs = schedule.assignments.size() / per_epoch;
  std::vector<std::size_t> order(corpus.sentences.size());
  std::vector<LabeledSentence> batch;
  std::size_t global = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = epoch_rng(schedule.seed, e);
    std::shuffle(order.begin(), order.end(), rng);
    auto& records = trace.epochs.emplace_back();
    for (std::size_t b = 0; b < per_epoch; ++b, ++global) {
      const std::size_t source = schedule.assignments[global];
      const auto& id = corpus.source_ids[source];
      BatchRecord rec{global, source, {}};
      batch.clear();
      const std::size_t end = std::min(order.size(), (b + 1) * schedule.batch_size);
      for (std::size_t n = b * schedule.batch_size; n < end; ++n) {
        const auto& sentence = corpus.sentences[order[n]];
        const TagSequence* tags = sentence.layer(id);
        if (!tags)
          throw DataError("source '" + id + "' has no prediction for sentence " +
                          std::to_string(order[n]));
        batch.push_back({sentence.tokens, *tags});
        rec.sentences.push_back(order[n]);
      }
      tagger.train(batch);
      records.push_back(std::move(rec));
    }
  }
  return trace;
}

/// Fixed number of epochs over the gold set; no early stopping.
inline void finetune(Tagger& tagger, const Corpus& gold_small,
                     int epochs = kDefaultFinetuneEpochs) {
  std::vector<LabeledSentence> data;
  for (std::size_t s = 0; s < gold_small.sentences.size(); ++s) {
    const auto& sentence = gold_small.sentences[s];
    if (!sentence.gold) throw DataError("gold layer missing for sentence " + std::to_string(s));
    data.push_back({sentence.tokens, *sentence.gold});
  }
  if (data.empty()) return;
  tagger.fine_tune(data, epochs);
}

/// Tags every sentence of `corpus` into its aggregate layer.
inline Corpus tag_corpus(const Corpus& corpus, const Tagger& tagger) {
  Corpus out = corpus;
  for (auto& s : out.sentences) s.aggregate = tagger.predict(s.tokens);
  return out;
}

/// Silver supervision of one epoch in training order, as CoNLL.
inline std::string silver_conll(const Corpus& corpus, const DistillTrace& trace, std::size_t epoch) {
  std::string out;
  for (const auto& rec : trace.epochs.at(epoch)) {
    const auto& id = corpus.source_ids[rec.source];
    for (auto s : rec.sentences) {
      const auto& sentence = corpus.sentences[s];
      const auto& tags = *sentence.layer(id);
      for (std::size_t i = 0; i < sentence.size(); ++i) {
        out += sentence.tokens[i];
        out += ' ';
        out += tags[i];
        out += '\n';
      }
      out += '\n';
    }
  }
  return out;
}

struct RareConfig {
  std::size_t top_k = 10;
  std::size_t distill_epochs = 5;
  int finetune_epochs = kDefaultFinetuneEpochs;
  std::size_t batch_size = 100;
  std::uint64_t seed = 0;
  // Unsupervised variant: uniform weights over all sources, no fine-tuning.
  bool uniform = false;
};

struct RareResult {
  SourceWeights weights;
  Schedule schedule;
  DistillTrace trace;
};

/// Full pipeline: rank on `gold_small`, truncate, distil on `unlabeled`,
/// fine-tune on `gold_small`. `gold_small` must carry the same sources.
inline RareResult run_rare(const Corpus& unlabeled, const Corpus& gold_small, Tagger& tagger,
                           const RareConfig& cfg) {
  RareResult r;
  if (cfg.uniform) {
    r.weights = truncate_normalize(std::vector<double>(unlabeled.source_ids.size(), 1.0),
                                   unlabeled.source_ids.size());
  } else {
    if (gold_small.source_ids != unlabeled.source_ids)
      throw DataError("gold set and unlabeled corpus have different sources");
    r.weights = truncate_normalize(rank_sources(gold_small), cfg.top_k);
  }
  const std::size_t per_epoch = batches_per_epoch(unlabeled.sentences.size(), cfg.batch_size);
  if (per_epoch > 0 && cfg.distill_epochs > 0) {
    r.schedule = make_schedule(r.weights, per_epoch * cfg.distill_epochs, cfg.seed, cfg.batch_size);
    r.trace = distill(unlabeled, r.schedule, tagger);
  }
  if (!cfg.uniform) finetune(tagger, gold_small, cfg.finetune_epochs);
  return r;
}

}  // namespace tagagg::rare
