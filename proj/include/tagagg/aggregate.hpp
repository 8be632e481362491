#pragma once

// Corpus-level aggregation: turns a multi-source corpus into annotation
// matrices at token or entity granularity, runs a method, and writes the
// consensus back as a BIO layer.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tagagg/bea.hpp"
#include "tagagg/corpus_io.hpp"
#include "tagagg/error.hpp"
#include "tagagg/spans.hpp"
#include "tagagg/vote.hpp"

namespace tagagg::bea {

enum class Method { mv, bea, bea2, bea_sup };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::mv: return "mv";
    case Method::bea: return "bea";
    case Method::bea2: return "bea2";
    case Method::bea_sup: return "bea-sup";
  }
  return "?";
}

inline std::string_view to_string(Granularity g) {
  return g == Granularity::token ? "token" : "entity";
}

struct AggregateOptions {
  Method method = Method::bea;
  BeaConfig config;
  std::size_t top_k = 10;  // sources kept by bea2
  std::uint64_t seed = 0;  // majority-vote tie breaking
  vote::TieBreak tie = vote::TieBreak::random;
  // Token granularity can produce invalid BIO; repair it unless disabled.
  bool repair_token_output = true;
};

struct AggregateResult {
  Corpus corpus;                            // input plus the aggregate layer
  std::vector<std::string> sources;         // posterior columns
  std::optional<Posterior> posterior;       // absent for mv
  std::optional<Posterior> first_pass;      // bea2 only
  std::vector<std::string> ranking;         // bea2 only, best first
};

/// One instance per token; classes are the token label space (O = 0).
inline AnnotationMatrix build_token_matrix(const Corpus& corpus,
                                           std::span<const std::string> source_ids) {
  AnnotationMatrix m;
  m.num_classes = corpus.labels.token_space_size();
  m.outside_class = 0;
  const std::size_t N = corpus.num_tokens();
  m.y = LabelMatrix::Constant(static_cast<Eigen::Index>(N),
                              static_cast<Eigen::Index>(source_ids.size()), kMissing);
  m.instances.reserve(N);
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sentence = corpus.sentences[s];
    for (std::size_t j = 0; j < source_ids.size(); ++j) {
      const TagSequence* tags = sentence.layer(source_ids[j]);
      if (!tags) continue;
      for (std::size_t i = 0; i < sentence.size(); ++i)
        m.y(row + static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            static_cast<int>(corpus.labels.require_tag((*tags)[i]));
    }
    for (std::size_t i = 0; i < sentence.size(); ++i) m.instances.push_back({s, i, i + 1});
    row += static_cast<Eigen::Index>(sentence.size());
  }
  return m;
}

/// One instance per candidate range (see build_range_view); classes are
/// O = 0 plus one per entity type. With include_gold, gold spans become
/// candidate ranges too.
inline AnnotationMatrix build_entity_matrix(const Corpus& corpus,
                                            std::span<const std::string> source_ids,
                                            bool include_gold = false) {
  AnnotationMatrix m;
  m.num_classes = corpus.labels.entity_space_size();
  m.outside_class = 0;
  std::vector<std::vector<int>> rows;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sentence = corpus.sentences[s];
    std::vector<EntitySpan> gold;
    if (include_gold && sentence.gold) gold = decode_spans(*sentence.gold);
    const RangeView view = build_range_view(sentence, gold);
    for (std::size_t r = 0; r < view.ranges.size(); ++r) {
      std::vector<int> row(source_ids.size(), kMissing);
      for (std::size_t j = 0; j < source_ids.size(); ++j) {
        auto it = view.labels.find(source_ids[j]);
        if (it == view.labels.end()) continue;
        auto idx = corpus.labels.entity_index(it->second[r]);
        if (!idx) throw LabelError("unknown entity type '" + it->second[r] + "'");
        row[j] = static_cast<int>(*idx);
      }
      rows.push_back(std::move(row));
      m.instances.push_back({s, view.ranges[r].first, view.ranges[r].second});
    }
  }
  m.y = LabelMatrix::Constant(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(source_ids.size()), kMissing);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < source_ids.size(); ++j)
      m.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline AnnotationMatrix build_matrix(const Corpus& corpus, std::span<const std::string> source_ids,
                                     Granularity g, bool include_gold = false) {
  return g == Granularity::token ? build_token_matrix(corpus, source_ids)
                                 : build_entity_matrix(corpus, source_ids, include_gold);
}

/// Gold class of every instance of a matrix built from `corpus`.
inline std::vector<int> gold_classes(const Corpus& corpus, const AnnotationMatrix& m,
                                     Granularity g) {
  std::vector<int> out;
  out.reserve(m.N());
  std::size_t cached = static_cast<std::size_t>(-1);
  std::vector<EntitySpan> spans;
  for (const auto& inst : m.instances) {
    const auto& sentence = corpus.sentences.at(inst.sentence);
    if (!sentence.gold) throw DataError("gold layer missing for sentence " +
                                        std::to_string(inst.sentence));
    if (g == Granularity::token) {
      out.push_back(static_cast<int>(corpus.labels.require_tag((*sentence.gold)[inst.start])));
      continue;
    }
    if (cached != inst.sentence) {
      spans = decode_spans(*sentence.gold);
      cached = inst.sentence;
    }
    const auto label = range_label(spans, {inst.start, inst.end});
    out.push_back(static_cast<int>(*corpus.labels.entity_index(label)));
  }
  return out;
}

/// Writes MAP decisions of `posterior` (rows of `m`) into the aggregate
/// layer of `corpus`.
inline void decode_posterior(Corpus& corpus, const AnnotationMatrix& m, const Posterior& posterior,
                             Granularity g, bool repair_token_output) {
  for (auto& s : corpus.sentences) s.aggregate = TagSequence(s.size(), std::string(kOutsideTag));
  if (g == Granularity::token) {
    for (std::size_t i = 0; i < m.N(); ++i) {
      const auto& inst = m.instances[i];
      (*corpus.sentences[inst.sentence].aggregate)[inst.start] =
          corpus.labels.tag_name(static_cast<std::size_t>(posterior.map_labels[i]));
    }
    if (repair_token_output)
      for (auto& s : corpus.sentences) s.aggregate = repair_bio(*s.aggregate);
    return;
  }
  std::vector<std::vector<ScoredSpan>> candidates(corpus.sentences.size());
  for (std::size_t i = 0; i < m.N(); ++i) {
    const int k = posterior.map_labels[i];
    if (k == 0) continue;
    const auto& inst = m.instances[i];
    candidates[inst.sentence].push_back(
        {{inst.start, inst.end, corpus.labels.entity_name(static_cast<std::size_t>(k))},
         posterior.state.qz(static_cast<Eigen::Index>(i), k)});
  }
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto kept = resolve_conflicts(candidates[s]);
    corpus.sentences[s].aggregate = encode_spans(kept, corpus.sentences[s].size());
  }
}

/// Runs one aggregation method over the whole corpus. bea-sup estimates
/// its parameters from `gold_small`, which must carry gold tags and the
/// same source layers.
inline AggregateResult aggregate(const Corpus& corpus, const AggregateOptions& opt,
                                 const Corpus* gold_small = nullptr) {
  opt.config.validate();
  const Granularity g = opt.config.granularity;
  AggregateResult result;
  result.corpus = corpus;
  result.sources = corpus.source_ids;

  if (opt.method == Method::mv) {
    for (std::size_t s = 0; s < result.corpus.sentences.size(); ++s) {
      auto& sentence = result.corpus.sentences[s];
      auto rng = vote::sentence_rng(opt.seed, s);
      if (g == Granularity::token) {
        auto tags = vote::mv_token_sentence(sentence, rng, opt.tie);
        sentence.aggregate = opt.repair_token_output ? repair_bio(tags) : std::move(tags);
      } else {
        sentence.aggregate = encode_spans(vote::mv_entity(sentence, rng, opt.tie), sentence.size());
      }
    }
    return result;
  }

  const AnnotationMatrix m = build_matrix(corpus, corpus.source_ids, g);
  switch (opt.method) {
    case Method::bea:
      result.posterior = run_bea(m, opt.config);
      break;
    case Method::bea2: {
      result.first_pass = run_bea(m, opt.config);
      const std::size_t k = std::min(opt.top_k, m.H());
      if (k == 0) {
        result.posterior = result.first_pass;
        break;
      }
      auto filtered = spammer_filter(*result.first_pass, m, k, opt.config);
      for (auto j : filtered.ranking) result.ranking.push_back(corpus.source_ids[j]);
      result.sources.clear();
      for (auto j : filtered.kept) result.sources.push_back(corpus.source_ids[j]);
      result.posterior = std::move(filtered.posterior);
      break;
    }
    case Method::bea_sup: {
      if (!gold_small) throw DataError("bea-sup requires a gold-labelled set");
      const AnnotationMatrix gm = build_matrix(*gold_small, corpus.source_ids, g, true);
      const auto gold = gold_classes(*gold_small, gm, g);
      const FrozenParams params = supervised_estimate(sufficient_stats(gm, gold), opt.config);
      result.posterior = infer_with(params, m, opt.config);
      break;
    }
    case Method::mv:
      break;
  }
  decode_posterior(result.corpus, m, *result.posterior, g, opt.repair_token_output);
  return result;
}

}  // namespace tagagg::bea
