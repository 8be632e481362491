#pragma once

// JSON documents emitted by the CLI. Objects use nlohmann::json's sorted
// keys, so output is stable; ordered data goes into arrays.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "tagagg/aggregate.hpp"
#include "tagagg/bea.hpp"
#include "tagagg/labels.hpp"
#include "tagagg/metrics.hpp"
#include "tagagg/rare.hpp"

namespace tagagg::report {

inline constexpr int kSchemaVersion = 1;

using nlohmann::json;

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const metrics::Score& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
          {"tp", s.tp},               {"fp", s.fp},         {"fn", s.fn}};
}

inline std::vector<std::string> class_names(const LabelSet& labels, bea::Granularity g) {
  std::vector<std::string> out;
  if (g == bea::Granularity::token) {
    for (std::size_t k = 0; k < labels.token_space_size(); ++k) out.push_back(labels.tag_name(k));
  } else {
    for (std::size_t k = 0; k < labels.entity_space_size(); ++k) out.push_back(labels.entity_name(k));
  }
  return out;
}

/// Confusion matrices (rows: true class, columns: reported class), mean
/// recall, and convergence details of one posterior.
inline json posterior_json(const bea::Posterior& p, std::span<const std::string> sources) {
  const auto conf = metrics::confusion_report(p);
  json confusion = json::object();
  json recall = json::object();
  for (std::size_t j = 0; j < sources.size() && j < conf.confusion.size(); ++j) {
    confusion[sources[j]] = to_json(conf.confusion[j]);
    recall[sources[j]] = conf.mean_recall(static_cast<Eigen::Index>(j));
  }
  return {{"confusion", confusion},
          {"mean_recall", recall},
          {"iterations", p.iterations},
          {"converged", p.converged},
          {"elbo_trace", p.state.elbo_trace}};
}

inline json aggregate_json(const bea::AggregateResult& r, const bea::AggregateOptions& opt) {
  json doc = {{"schema", kSchemaVersion},
              {"method", std::string(bea::to_string(opt.method))},
              {"granularity", std::string(bea::to_string(opt.config.granularity))},
              {"classes", class_names(r.corpus.labels, opt.config.granularity)},
              {"sources", r.sources},
              {"input_sources", r.corpus.source_ids}};
  if (r.posterior) doc["posterior"] = posterior_json(*r.posterior, r.sources);
  if (r.first_pass) doc["first_pass"] = posterior_json(*r.first_pass, r.corpus.source_ids);
  if (!r.ranking.empty()) doc["ranking"] = r.ranking;
  return doc;
}

inline json weights_json(const rare::SourceWeights& w, std::span<const std::string> sources) {
  json s = json::object(), omega = json::object();
  std::vector<std::size_t> order(sources.size());
  for (std::size_t j = 0; j < sources.size(); ++j) {
    s[sources[j]] = w.s[j];
    omega[sources[j]] = w.omega[j];
    order[j] = j;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w.s[a] > w.s[b]; });
  json ranking = json::array();
  for (auto j : order) ranking.push_back(sources[j]);
  return {{"schema", kSchemaVersion}, {"s", s}, {"k", w.k}, {"omega", omega}, {"ranking", ranking}};
}

/// Sidecar for silver CoNLL exports: which source supervised each batch.
inline json schedule_json(const rare::Schedule& schedule, const rare::DistillTrace& trace,
                          std::span<const std::string> sources) {
  json epochs = json::array();
  for (const auto& epoch : trace.epochs) {
    json batches = json::array();
    for (const auto& rec : epoch)
      batches.push_back({{"batch", rec.batch}, {"source", sources[rec.source]}, {"sentences", rec.sentences}});
    epochs.push_back(std::move(batches));
  }
  json assignments = json::array();
  for (auto a : schedule.assignments) assignments.push_back(sources[a]);
  return {{"schema", kSchemaVersion},
          {"seed", schedule.seed},
          {"batch_size", schedule.batch_size},
          {"assignments", assignments},
          {"epochs", epochs}};
}

/// Serialised memo tagger: label types plus the (token, tag) count table.
inline json memo_to_json(const rare::MemoTagger& tagger, const LabelSet& labels) {
  return {{"schema", kSchemaVersion}, {"kind", "memo"}, {"types", labels.entity_types()},
          {"counts", tagger.table()}};
}

struct LoadedMemo {
  LabelSet labels;
  rare::MemoTagger tagger;
};

inline LoadedMemo memo_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("kind", "") != "memo")
    throw DataError("model file is not a memo tagger");
  if (doc.value("schema", 0) != kSchemaVersion)
    throw DataError("unsupported model schema " + doc.value("schema", json()).dump());
  LoadedMemo out;
  try {
    out.labels = LabelSet(doc.at("types").get<std::vector<std::string>>());
    for (const auto& [token, tags] : doc.at("counts").items())
      for (const auto& [tag, n] : tags.items()) {
        if (!out.labels.tag_index(tag)) throw LabelError("model mentions unknown tag '" + tag + "'");
        out.tagger.add(token, tag, n.get<double>());
      }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  return out;
}

}  // namespace tagagg::report
