#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tagagg/corpus_io.hpp"
#include "tagagg/error.hpp"
#include "tagagg/metrics.hpp"
#include "tagagg/spans.hpp"

namespace tagagg::vote {

template <class Label>
struct VoteResult {
  Label winner{};
  std::map<Label, std::size_t> counts;
  bool tied = false;
};

enum class TieBreak {
  random,      // uniform draw among the tied labels
  first_vote   // the tied label that appears first in the vote list
};

/// Generator for sentence `index` of a pass seeded with `seed`; lets
/// sentences be processed in any order with identical results.
inline std::mt19937_64 sentence_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  return std::mt19937_64(seq);
}

/// Modal label. The generator is consumed only when there is a tie, and the
/// draw depends only on the (sorted) tied set.
template <class Label, std::uniform_random_bit_generator Rng>
VoteResult<Label> mv_token(std::span<const Label> votes, Rng& rng,
                           TieBreak tie = TieBreak::random) {
  if (votes.empty()) throw DataError("majority vote over an empty vote list");
  VoteResult<Label> r;
  for (const auto& v : votes) ++r.counts[v];
  std::size_t best = 0;
  for (const auto& [label, n] : r.counts) best = std::max(best, n);
  std::vector<Label> top;
  for (const auto& [label, n] : r.counts)
    if (n == best) top.push_back(label);
  r.tied = top.size() > 1;
  if (!r.tied) {
    r.winner = top.front();
  } else if (tie == TieBreak::first_vote) {
    for (const auto& v : votes)
      if (r.counts[v] == best) {
        r.winner = v;
        break;
      }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, top.size() - 1);
    r.winner = top[pick(rng)];
  }
  return r;
}

template <class Label>
VoteResult<Label> mv_token(std::span<const Label> votes, std::uint64_t seed,
                           TieBreak tie = TieBreak::random) {
  std::mt19937_64 rng(seed);
  return mv_token(votes, rng, tie);
}

/// Per-token majority vote over the sources that predicted this sentence.
/// The output may violate BIO; that is the point of comparing with the
/// entity view.
template <std::uniform_random_bit_generator Rng>
TagSequence mv_token_sentence(const Sentence& sentence, Rng& rng,
                              TieBreak tie = TieBreak::random) {
  TagSequence out(sentence.size(), std::string(kOutsideTag));
  if (sentence.layers.empty()) return out;
  std::vector<std::string> votes;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    votes.clear();
    for (const auto& [id, tags] : sentence.layers) votes.push_back(tags[i]);
    out[i] = mv_token(std::span<const std::string>(votes), rng, tie).winner;
  }
  return out;
}

/// Entity-view majority vote: each candidate range takes the modal label
/// over sources (O included); non-O winners are scored by vote fraction
/// and overlaps resolved greedily. A tie between O and entity types goes
/// to the entity types.
template <std::uniform_random_bit_generator Rng>
std::vector<EntitySpan> mv_entity(const Sentence& sentence, Rng& rng,
                                  TieBreak tie = TieBreak::random) {
  const RangeView view = build_range_view(sentence);
  std::vector<ScoredSpan> candidates;
  std::vector<std::string> votes;
  for (std::size_t r = 0; r < view.ranges.size(); ++r) {
    votes.clear();
    for (const auto& [id, labels] : view.labels) votes.push_back(labels[r]);
    const std::size_t total = votes.size();
    std::map<std::string, std::size_t> counts;
    for (const auto& v : votes) ++counts[v];
    std::size_t best = 0;
    for (const auto& [label, n] : counts) best = std::max(best, n);
    const auto outside = counts.find(std::string(kOutsideTag));
    if (outside != counts.end() && outside->second == best && counts.size() > 1) {
      bool entity_tied = false;
      for (const auto& [label, n] : counts) entity_tied |= (label != kOutsideTag && n == best);
      if (entity_tied) std::erase(votes, kOutsideTag);
    }
    auto result = mv_token(std::span<const std::string>(votes), rng, tie);
    if (result.winner == kOutsideTag) continue;
    const double fraction =
        static_cast<double>(result.counts[result.winner]) / static_cast<double>(total);
    candidates.push_back({{view.ranges[r].first, view.ranges[r].second, result.winner}, fraction});
  }
  return resolve_conflicts(candidates);
}

template <std::uniform_random_bit_generator Rng>
std::vector<EntitySpan> mv_entity(const Sentence& sentence, Rng&& rng,
                                  TieBreak tie = TieBreak::random) {
  return mv_entity(sentence, rng, tie);
}

struct OracleChoice {
  std::string source;
  double f1 = 0.0;
};

/// Best single source by entity F1 against gold; ties go to the
/// lexicographically smallest source id.
inline OracleChoice oracle_select(const Corpus& corpus) {
  if (corpus.source_ids.empty()) throw DataError("oracle_select needs at least one source");
  std::optional<OracleChoice> best;
  for (const auto& id : corpus.source_ids) {
    const double f1 = metrics::entity_f1(corpus, id).f1;
    if (!best || f1 > best->f1 || (f1 == best->f1 && id < best->source)) best = {id, f1};
  }
  return *best;
}

}  // namespace tagagg::vote
