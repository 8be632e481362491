#pragma once

// Fixtures and independent oracles shared by the unit and acceptance suites.
// Nothing here calls into the code path it is used to check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "tagagg/tagagg.hpp"

namespace tagagg::testing {

// Four-word sentence labelled by five sources, overlapping ORG/PER guesses.
inline Corpus five_source_corpus() {
  Corpus c;
  c.labels = LabelSet({"LOC", "ORG", "PER"});
  c.source_ids = {"M1", "M2", "M3", "M4", "M5"};
  Sentence s;
  s.tokens = {"w1", "w2", "w3", "w4"};
  s.layers["M1"] = {"B-ORG", "I-ORG", "I-ORG", "I-ORG"};
  s.layers["M2"] = {"O", "B-ORG", "I-ORG", "I-ORG"};
  s.layers["M3"] = {"O", "O", "B-ORG", "I-ORG"};
  s.layers["M4"] = {"O", "B-PER", "I-PER", "I-PER"};
  s.layers["M5"] = {"O", "B-PER", "I-PER", "I-PER"};
  c.sentences.push_back(std::move(s));
  return c;
}

// Regular-expression oracle for IOB2 validity at one position: position i
// is bad iff it holds I-X and the previous tag is neither B-X nor I-X.
inline std::vector<std::size_t> regex_bio_violations(const std::vector<std::string>& tags) {
  std::vector<std::size_t> bad;
  static const std::regex inside("^I-(.+)$");
  for (std::size_t i = 0; i < tags.size(); ++i) {
    std::smatch m;
    if (!std::regex_match(tags[i], m, inside)) continue;
    const std::string type = m[1];
    if (i == 0 || !std::regex_match(tags[i - 1], std::regex("^[BI]-" + type + "$")))
      bad.push_back(i);
  }
  return bad;
}

inline std::vector<std::string> random_tags(std::mt19937_64& rng, const LabelSet& labels,
                                            std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, labels.token_space_size() - 1);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(labels.tag_name(pick(rng)));
  return out;
}

// Random valid corpus: BIO-valid layers, some layers missing, optional gold.
inline Corpus random_corpus(std::mt19937_64& rng, const LabelSet& labels) {
  std::uniform_int_distribution<std::size_t> n_sent(0, 6), n_tok(1, 9), n_src(1, 4), word(0, 50);
  std::bernoulli_distribution missing(0.15), has_gold(0.5);
  Corpus c;
  c.labels = labels;
  const std::size_t H = n_src(rng);
  for (std::size_t j = 0; j < H; ++j) c.source_ids.push_back("src" + std::to_string(j));
  const bool gold = has_gold(rng);
  const std::size_t S = n_sent(rng);
  for (std::size_t s = 0; s < S; ++s) {
    Sentence sentence;
    const std::size_t n = n_tok(rng);
    for (std::size_t i = 0; i < n; ++i) sentence.tokens.push_back("tok" + std::to_string(word(rng)));
    for (const auto& id : c.source_ids)
      if (!missing(rng)) sentence.layers.emplace(id, repair_bio(random_tags(rng, labels, n)));
    if (gold) sentence.gold = repair_bio(random_tags(rng, labels, n));
    c.sentences.push_back(std::move(sentence));
  }
  return c;
}

// log of the Dirichlet-multinomial marginal: Gamma(sum a)/Gamma(sum a + n) * prod Gamma(a + n_k)/Gamma(a).
inline double log_dirichlet_multinomial(const std::vector<double>& counts, double a) {
  double n = 0.0;
  double out = 0.0;
  for (double c : counts) {
    n += c;
    out += std::lgamma(a + c) - std::lgamma(a);
  }
  const double total_a = a * static_cast<double>(counts.size());
  return out + std::lgamma(total_a) - std::lgamma(total_a + n);
}

// log P(Y, Z) with pi and V integrated out analytically.
inline double log_joint(const bea::AnnotationMatrix& y, const std::vector<int>& z, double alpha,
                        double beta) {
  const std::size_t K = y.K();
  std::vector<double> nk(K, 0.0);
  for (int k : z) nk[static_cast<std::size_t>(k)] += 1.0;
  double out = log_dirichlet_multinomial(nk, beta);
  for (std::size_t j = 0; j < y.H(); ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> row(K, 0.0);
      for (std::size_t i = 0; i < y.N(); ++i) {
        const int l = y.at(i, j);
        if (l != bea::kMissing && z[i] == static_cast<int>(k)) row[static_cast<std::size_t>(l)] += 1.0;
      }
      out += log_dirichlet_multinomial(row, alpha);
    }
  }
  return out;
}

struct ExactPosterior {
  double log_evidence = 0.0;
  Eigen::MatrixXd marginals;  // N x K
};

// Exhaustive sum over all K^N labelings.
inline ExactPosterior enumerate_posterior(const bea::AnnotationMatrix& y, double alpha, double beta) {
  const std::size_t N = y.N();
  const std::size_t K = y.K();
  std::size_t total = 1;
  for (std::size_t i = 0; i < N; ++i) total *= K;
  std::vector<double> logs(total);
  std::vector<std::vector<int>> zs(total, std::vector<int>(N));
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < N; ++i) {
      zs[code][i] = static_cast<int>(c % K);
      c /= K;
    }
    logs[code] = log_joint(y, zs[code], alpha, beta);
  }
  double m = logs[0];
  for (double l : logs) m = std::max(m, l);
  double sum = 0.0;
  for (double l : logs) sum += std::exp(l - m);
  ExactPosterior out;
  out.log_evidence = m + std::log(sum);
  out.marginals = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K));
  for (std::size_t code = 0; code < total; ++code) {
    const double w = std::exp(logs[code] - out.log_evidence);
    for (std::size_t i = 0; i < N; ++i) out.marginals(static_cast<Eigen::Index>(i), zs[code][i]) += w;
  }
  return out;
}

// The exact posterior is invariant under relabelling the classes, so its
// marginals are uniform. This version folds every labelling onto the
// relabelling that agrees most with `reference` (ties share the weight).
inline Eigen::MatrixXd aligned_marginals(const bea::AnnotationMatrix& y, double alpha, double beta,
                                         const std::vector<int>& reference) {
  const std::size_t N = y.N();
  const std::size_t K = y.K();
  const double log_evidence = enumerate_posterior(y, alpha, beta).log_evidence;
  std::vector<std::vector<int>> perms;
  std::vector<int> perm(K);
  for (std::size_t k = 0; k < K; ++k) perm[k] = static_cast<int>(k);
  do perms.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));

  std::size_t total = 1;
  for (std::size_t i = 0; i < N; ++i) total *= K;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K));
  std::vector<int> z(N);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < N; ++i) {
      z[i] = static_cast<int>(c % K);
      c /= K;
    }
    const double w = std::exp(log_joint(y, z, alpha, beta) - log_evidence);
    std::size_t best = 0;
    std::vector<const std::vector<int>*> winners;
    for (const auto& p : perms) {
      std::size_t agree = 0;
      for (std::size_t i = 0; i < N; ++i) agree += p[static_cast<std::size_t>(z[i])] == reference[i];
      if (agree > best || winners.empty()) {
        best = agree;
        winners.clear();
      }
      if (agree == best) winners.push_back(&p);
    }
    for (const auto* p : winners)
      for (std::size_t i = 0; i < N; ++i)
        out(static_cast<Eigen::Index>(i), (*p)[static_cast<std::size_t>(z[i])]) +=
            w / static_cast<double>(winners.size());
  }
  return out;
}

// Confusion of source j measured directly against the true labels.
inline Eigen::MatrixXd empirical_confusion(const synth::SynthProblem& p, std::size_t j) {
  const auto K = static_cast<Eigen::Index>(p.y.K());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t i = 0; i < p.y.N(); ++i) m(p.z[i], p.y.at(i, j)) += 1.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double s = m.row(k).sum();
    if (s > 0) m.row(k) /= s;
  }
  return m;
}

// Plain majority vote with the smallest class winning ties.
inline std::vector<int> plain_majority(const bea::AnnotationMatrix& y) {
  std::vector<int> out(y.N());
  for (std::size_t i = 0; i < y.N(); ++i) {
    std::vector<int> counts(y.K(), 0);
    for (std::size_t j = 0; j < y.H(); ++j)
      if (y.at(i, j) != bea::kMissing) ++counts[static_cast<std::size_t>(y.at(i, j))];
    out[i] = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
  return out;
}

// Random small annotation matrix with every entry observed.
inline bea::AnnotationMatrix random_matrix(std::mt19937_64& rng, std::size_t N, std::size_t H,
                                           std::size_t K) {
  bea::AnnotationMatrix y;
  y.num_classes = K;
  y.y.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(H));
  std::uniform_int_distribution<int> pick(0, static_cast<int>(K) - 1);
  for (Eigen::Index i = 0; i < y.y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.y.cols(); ++j) y.y(i, j) = pick(rng);
  return y;
}

// Three reliable sources (diagonal 0.9) and seven uniform spammers.
inline synth::SynthConfig reliable_plus_spammers(std::uint64_t seed, std::size_t N = 5000) {
  synth::SynthConfig cfg;
  cfg.N = N;
  cfg.K = 4;
  cfg.seed = seed;
  cfg.pi = Eigen::VectorXd::Constant(4, 0.25);
  for (int j = 0; j < 3; ++j) cfg.sources.push_back(synth::Reliable{0.9});
  for (int j = 0; j < 7; ++j) cfg.sources.push_back(synth::Spammer{});
  return cfg;
}

}  // namespace tagagg::testing
