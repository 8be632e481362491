#pragma once

// Synthetic aggregation problems sampled from the BEA generative model,
// with the ground truth kept alongside. Used as the oracle in tests and by
// the `simulate` command.

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "tagagg/bea.hpp"
#include "tagagg/corpus_io.hpp"
#include "tagagg/error.hpp"
#include "tagagg/metrics.hpp"

namespace tagagg::synth {

struct Reliable {
  double diag = 0.9;  // P(correct); the rest spread uniformly
};
struct Spammer {};
struct Adversary {
  double diag = 1.0;
  std::vector<std::size_t> perm;  // true class k reported as perm[k]; empty = random
};
struct Explicit {
  Eigen::MatrixXd matrix;
};
using SourceSpec = std::variant<Reliable, Spammer, Adversary, Explicit>;

struct SynthConfig {
  std::size_t N = 1000;
  std::size_t K = 4;
  std::optional<Eigen::VectorXd> pi;  // nullopt: draw from Dir(beta)
  double beta = 1.0;
  std::vector<SourceSpec> sources;
  std::uint64_t seed = 0;
};

struct SynthProblem {
  bea::AnnotationMatrix y;
  std::vector<int> z;
  std::vector<Eigen::MatrixXd> v_true;
  Eigen::VectorXd pi_true;
};

inline Eigen::MatrixXd reliable_matrix(std::size_t K, double diag) {
  const auto k = static_cast<Eigen::Index>(K);
  if (K == 1) return Eigen::MatrixXd::Ones(1, 1);
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(k, k, (1.0 - diag) / static_cast<double>(K - 1));
  m.diagonal().setConstant(diag);
  return m;
}

inline Eigen::MatrixXd permuted_matrix(std::size_t K, double diag,
                                       const std::vector<std::size_t>& perm) {
  const Eigen::MatrixXd base = reliable_matrix(K, diag);
  Eigen::MatrixXd m(base.rows(), base.cols());
  for (Eigen::Index l = 0; l < base.cols(); ++l)
    m.col(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(l)])) = base.col(l);
  return m;
}

namespace detail {

template <class Rng>
Eigen::VectorXd sample_dirichlet(std::size_t K, double concentration, Rng& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(K));
  for (auto& x : v) x = gamma(rng);
  return v / v.sum();
}

inline void check_simplex(const Eigen::Ref<const Eigen::RowVectorXd>& p, const char* what) {
  if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9)
    throw DataError(std::string(what) + " is not on the probability simplex");
}

inline std::discrete_distribution<int> categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  return std::discrete_distribution<int>(p.data(), p.data() + p.size());
}

}  // namespace detail

/// z_i ~ Cat(pi), y_ij ~ Cat(V_j[z_i]); deterministic given the seed.
inline SynthProblem generate(const SynthConfig& cfg) {
  if (cfg.K == 0) throw DataError("K must be >= 1");
  std::mt19937_64 rng(cfg.seed);
  SynthProblem p;
  p.pi_true = cfg.pi ? *cfg.pi : detail::sample_dirichlet(cfg.K, cfg.beta, rng);
  if (static_cast<std::size_t>(p.pi_true.size()) != cfg.K) throw DataError("pi has wrong size");
  detail::check_simplex(p.pi_true.transpose(), "pi");

  for (const auto& spec : cfg.sources) {
    Eigen::MatrixXd v = std::visit(
        [&](const auto& s) -> Eigen::MatrixXd {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Reliable>) {
            return reliable_matrix(cfg.K, s.diag);
          } else if constexpr (std::is_same_v<T, Spammer>) {
            return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(cfg.K),
                                             static_cast<Eigen::Index>(cfg.K),
                                             1.0 / static_cast<double>(cfg.K));
          } else if constexpr (std::is_same_v<T, Adversary>) {
            std::vector<std::size_t> perm = s.perm;
            if (perm.empty()) {
              perm.resize(cfg.K);
              std::iota(perm.begin(), perm.end(), std::size_t{0});
              if (cfg.K > 1) {
                const auto identity = perm;
                while (perm == identity) std::shuffle(perm.begin(), perm.end(), rng);
              }
            }
            if (perm.size() != cfg.K) throw DataError("adversary permutation has wrong size");
            return permuted_matrix(cfg.K, s.diag, perm);
          } else {
            return s.matrix;
          }
        },
        spec);
    if (static_cast<std::size_t>(v.rows()) != cfg.K || static_cast<std::size_t>(v.cols()) != cfg.K)
      throw DataError("confusion matrix has wrong shape");
    for (Eigen::Index k = 0; k < v.rows(); ++k) detail::check_simplex(v.row(k), "confusion row");
    p.v_true.push_back(std::move(v));
  }

  const std::size_t H = cfg.sources.size();
  auto prior = detail::categorical(p.pi_true.transpose());
  std::vector<std::vector<std::discrete_distribution<int>>> rows(H);
  for (std::size_t j = 0; j < H; ++j)
    for (Eigen::Index k = 0; k < p.v_true[j].rows(); ++k)
      rows[j].push_back(detail::categorical(p.v_true[j].row(k)));

  p.y.num_classes = cfg.K;
  p.y.y.resize(static_cast<Eigen::Index>(cfg.N), static_cast<Eigen::Index>(H));
  p.z.resize(cfg.N);
  for (std::size_t i = 0; i < cfg.N; ++i) {
    const int z = prior(rng);
    p.z[i] = z;
    for (std::size_t j = 0; j < H; ++j)
      p.y.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[j][z](rng);
  }
  return p;
}

/// Maximum-weight perfect assignment (Hungarian algorithm, O(n^3)).
/// Returns col[r], the column assigned to row r.
inline std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& weight) {
  const auto n = static_cast<std::size_t>(weight.rows());
  if (static_cast<std::size_t>(weight.cols()) != n) throw DataError("assignment needs a square matrix");
  const double top = n ? weight.maxCoeff() : 0.0;
  // Potentials-based shortest augmenting path on cost = top - weight, 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cost = top - weight(static_cast<Eigen::Index>(i0 - 1),
                                         static_cast<Eigen::Index>(j - 1));
        const double cur = cost - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col(n);
  for (std::size_t j = 1; j <= n; ++j)
    if (match[j]) col[match[j] - 1] = j - 1;
  return col;
}

struct Recovery {
  double accuracy = 0.0;
  std::vector<double> confusion_l1;  // per source: mean |V_hat - V_true|
  std::vector<std::size_t> perm;     // estimated class -> true class
};

/// Label accuracy and confusion-matrix error after aligning estimated
/// classes to true ones by maximum agreement.
inline Recovery recovery_error(const bea::Posterior& posterior, const SynthProblem& truth) {
  const std::size_t N = truth.z.size();
  const std::size_t K = truth.y.K();
  if (posterior.map_labels.size() != N) throw DataError("posterior and truth differ in N");
  if (posterior.state.elog_v.size() != truth.v_true.size())
    throw DataError("posterior and truth differ in H");

  Eigen::MatrixXd agree = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K),
                                                static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < N; ++i) agree(posterior.map_labels[i], truth.z[i]) += 1.0;
  Recovery r;
  r.perm = max_weight_assignment(agree);

  std::vector<int> aligned(N);
  for (std::size_t i = 0; i < N; ++i)
    aligned[i] = static_cast<int>(r.perm[static_cast<std::size_t>(posterior.map_labels[i])]);
  r.accuracy = metrics::token_accuracy(aligned, truth.z);

  for (std::size_t j = 0; j < truth.v_true.size(); ++j) {
    const Eigen::MatrixXd est = bea::normalized_confusion(posterior.state.elog_v[j]);
    Eigen::MatrixXd moved(est.rows(), est.cols());
    for (Eigen::Index k = 0; k < est.rows(); ++k)
      moved.row(static_cast<Eigen::Index>(r.perm[static_cast<std::size_t>(k)])) = est.row(k);
    r.confusion_l1.push_back((moved - truth.v_true[j]).cwiseAbs().mean());
  }
  return r;
}

/// Source ids used when a synthetic problem is written as a corpus.
inline std::vector<std::string> synthetic_source_ids(std::size_t H) {
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < H; ++j) ids.push_back("m" + std::to_string(j + 1));
  return ids;
}

/// Writes each instance as a one-token sentence "t<i>": class 0 becomes O
/// and class k becomes B-C<k>. The entity view of this corpus is the
/// original K-class problem.
inline Corpus to_corpus(const SynthProblem& p) {
  std::vector<std::string> types;
  for (std::size_t k = 1; k < p.y.K(); ++k) types.push_back("C" + std::to_string(k));
  Corpus c;
  c.labels = LabelSet(types);
  c.source_ids = synthetic_source_ids(p.y.H());
  auto tag = [&](int k) { return k == 0 ? std::string(kOutsideTag) : c.labels.tag_name(2 * static_cast<std::size_t>(k) - 1); };
  c.sentences.reserve(p.y.N());
  for (std::size_t i = 0; i < p.y.N(); ++i) {
    Sentence s;
    s.tokens = {"t" + std::to_string(i)};
    for (std::size_t j = 0; j < p.y.H(); ++j) {
      const int l = p.y.at(i, j);
      if (l != bea::kMissing) s.layers.emplace(c.source_ids[j], TagSequence{tag(l)});
    }
    s.gold = TagSequence{tag(p.z[i])};
    c.sentences.push_back(std::move(s));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Sequence-labelling corpora with lexical signal, for distillation runs.

struct TaggingSimConfig {
  std::size_t sentences = 400;
  std::size_t min_len = 6;
  std::size_t max_len = 14;
  std::vector<std::string> types = {"PER", "ORG", "LOC"};
  std::size_t words_per_class = 25;  // lexicon size per token class
  double entity_rate = 0.25;         // chance a position starts an entity
  double continue_rate = 0.4;        // chance an entity grows by one token
  std::vector<SourceSpec> sources;   // over the token label space
  std::uint64_t seed = 0;
};

/// Every word belongs to one token class, so a word's gold tag is fixed;
/// gold is valid BIO by construction. Source layers are drawn per token
/// from their confusion matrices and then BIO-repaired.
inline Corpus simulate_tagging_corpus(const TaggingSimConfig& cfg) {
  if (cfg.min_len == 0 || cfg.max_len < cfg.min_len) throw DataError("bad sentence lengths");
  if (cfg.words_per_class == 0) throw DataError("words_per_class must be >= 1");
  Corpus c;
  c.labels = LabelSet(cfg.types);
  const std::size_t K = c.labels.token_space_size();
  const std::size_t T = cfg.types.size();
  c.source_ids = synthetic_source_ids(cfg.sources.size());

  SynthConfig dummy;
  dummy.K = K;
  dummy.N = 0;
  dummy.pi = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(K), 1.0 / static_cast<double>(K));
  dummy.sources = cfg.sources;
  dummy.seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
  const std::vector<Eigen::MatrixXd> v = generate(dummy).v_true;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> len(cfg.min_len, cfg.max_len);
  std::uniform_int_distribution<std::size_t> word(0, cfg.words_per_class - 1);
  std::uniform_int_distribution<std::size_t> type(0, T ? T - 1 : 0);
  auto token_for = [&](std::size_t cls) {
    return "t" + std::to_string(cls * cfg.words_per_class + word(rng));
  };
  std::vector<std::vector<std::discrete_distribution<int>>> rows(v.size());
  for (std::size_t j = 0; j < v.size(); ++j)
    for (Eigen::Index k = 0; k < v[j].rows(); ++k)
      rows[j].push_back(detail::categorical(v[j].row(k)));

  for (std::size_t s = 0; s < cfg.sentences; ++s) {
    Sentence sentence;
    TagSequence gold;
    std::vector<std::size_t> classes;
    const std::size_t n = len(rng);
    while (classes.size() < n) {
      if (T > 0 && unit(rng) < cfg.entity_rate) {
        const std::size_t t = type(rng);
        classes.push_back(1 + 2 * t);
        while (classes.size() < n && unit(rng) < cfg.continue_rate) classes.push_back(2 + 2 * t);
      } else {
        classes.push_back(0);
      }
    }
    for (std::size_t cls : classes) {
      sentence.tokens.push_back(token_for(cls));
      gold.push_back(c.labels.tag_name(cls));
    }
    sentence.gold = std::move(gold);
    for (std::size_t j = 0; j < v.size(); ++j) {
      TagSequence tags;
      for (std::size_t cls : classes)
        tags.push_back(c.labels.tag_name(static_cast<std::size_t>(rows[j][cls](rng))));
      sentence.layers.emplace(c.source_ids[j], repair_bio(tags));
    }
    c.sentences.push_back(std::move(sentence));
  }
  return c;
}

}  // namespace tagagg::synth
