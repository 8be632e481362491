#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <iterator>
#include <span>
#include <string_view>
#include <vector>

#include "tagagg/bea.hpp"
#include "tagagg/corpus_io.hpp"
#include "tagagg/error.hpp"
#include "tagagg/spans.hpp"

namespace tagagg::metrics {

/// Precision, recall and F1 from exact-match counts.
struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  static Score from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    Score s{0.0, 0.0, 0.0, tp, fp, fn};
    if (tp + fp > 0) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (s.precision + s.recall > 0.0)
      s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
  }
};

/// Phrase-level micro F1 (CoNLL convention): a predicted span counts only if
/// start, end and type all match a gold span.
inline Score entity_f1(std::span<const std::vector<EntitySpan>> pred,
                       std::span<const std::vector<EntitySpan>> gold) {
  if (pred.size() != gold.size())
    throw DataError("prediction and gold cover different numbers of sentences");
  std::size_t tp = 0, fp = 0, fn = 0;
  std::vector<EntitySpan> common;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    std::vector<EntitySpan> p = pred[s], g = gold[s];
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    common.clear();
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
    tp += common.size();
    fp += p.size() - common.size();
    fn += g.size() - common.size();
  }
  return Score::from_counts(tp, fp, fn);
}

/// Spans of one layer for every sentence. Sentences where the layer is
/// missing contribute no spans.
inline std::vector<std::vector<EntitySpan>> layer_spans(const Corpus& corpus,
                                                        std::string_view which) {
  std::vector<std::vector<EntitySpan>> out;
  out.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) {
    const TagSequence* tags = s.layer(which);
    out.push_back(tags ? decode_spans(*tags, BioPolicy::repair) : std::vector<EntitySpan>{});
  }
  return out;
}

/// Entity F1 of a layer against the gold layer; every sentence needs gold.
inline Score entity_f1(const Corpus& corpus, std::string_view which) {
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s)
    if (!corpus.sentences[s].gold)
      throw DataError("gold layer missing for sentence " + std::to_string(s));
  const auto pred = layer_spans(corpus, which);
  const auto gold = layer_spans(corpus, kGoldLayer);
  return entity_f1(pred, gold);
}

/// Fraction of positions where the two sequences agree. Empty input scores 0.
template <class A, class B>
double token_accuracy(const A& pred, const B& gold) {
  if (std::size(pred) != std::size(gold))
    throw DataError("token_accuracy: length mismatch (" + std::to_string(std::size(pred)) +
                    " vs " + std::to_string(std::size(gold)) + ")");
  if (std::size(pred) == 0) return 0.0;
  std::size_t same = 0;
  auto g = std::begin(gold);
  for (auto p = std::begin(pred); p != std::end(pred); ++p, ++g) same += (*p == *g);
  return static_cast<double>(same) / static_cast<double>(std::size(pred));
}

struct ConfusionReport {
  std::vector<Eigen::MatrixXd> confusion;  // per source, rows sum to 1
  Eigen::VectorXd mean_recall;
};

inline ConfusionReport confusion_report(const bea::Posterior& posterior) {
  ConfusionReport r;
  r.confusion.reserve(posterior.state.elog_v.size());
  for (const auto& ev : posterior.state.elog_v) r.confusion.push_back(bea::normalized_confusion(ev));
  r.mean_recall = posterior.mean_recall;
  return r;
}

}  // namespace tagagg::metrics
