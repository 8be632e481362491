#pragma once

// Bayesian aggregation of categorical predictions from H unreliable sources.
//
// Generative model: pi ~ Dir(beta), z_i ~ Cat(pi), each source j has a
// confusion matrix whose rows V_j[k] ~ Dir(alpha), and y_ij ~ Cat(V_j[z_i]).
// Inference is mean-field variational Bayes with q(Z) q(pi) q(V), optimised
// by coordinate ascent on the ELBO.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tagagg/digamma.hpp"
#include "tagagg/error.hpp"
#include "tagagg/parallel.hpp"

namespace tagagg::bea {

inline constexpr int kMissing = -1;

enum class Granularity { token, entity };

// Starting point of coordinate ascent.
enum class Init {
  majority,   // one-hot majority label; ties with the outside class go to the
              // other side, remaining ties share the mass equally
  vote_share  // fraction of observing sources voting for each class
};

struct BeaConfig {
  double alpha = 1.0;  // Dirichlet concentration of confusion rows
  double beta = 1.0;   // Dirichlet concentration of the class prior
  double elbo_tol = 1e-6;
  int max_iter = 200;
  Granularity granularity = Granularity::token;
  Init init = Init::majority;
  // Whether the outside class counts towards a source's mean recall.
  bool recall_includes_outside = false;
  std::size_t threads = 1;

  void validate() const {
    if (!(alpha > 0.0)) throw DataError("alpha must be > 0");
    if (!(beta > 0.0)) throw DataError("beta must be > 0");
    if (!(elbo_tol > 0.0)) throw DataError("elbo_tol must be > 0");
    if (max_iter < 1) throw DataError("max_iter must be >= 1");
  }
};

// Where an instance came from: a token (end = start + 1) or a range.
struct InstanceRef {
  std::size_t sentence = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

using LabelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N instances x H sources of class indices in [0, K), or kMissing.
struct AnnotationMatrix {
  std::size_t num_classes = 0;
  LabelMatrix y;
  std::optional<std::size_t> outside_class;
  std::vector<InstanceRef> instances;  // empty, or one per row

  std::size_t N() const noexcept { return static_cast<std::size_t>(y.rows()); }
  std::size_t H() const noexcept { return static_cast<std::size_t>(y.cols()); }
  std::size_t K() const noexcept { return num_classes; }

  int at(std::size_t i, std::size_t j) const { return y(static_cast<Eigen::Index>(i),
                                                        static_cast<Eigen::Index>(j)); }

  void validate() const {
    if (num_classes == 0) throw DataError("annotation matrix needs at least one class");
    if (!instances.empty() && instances.size() != N())
      throw DataError("instance index does not match the number of rows");
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const int v = y(i, j);
        if (v != kMissing && (v < 0 || static_cast<std::size_t>(v) >= num_classes))
          throw DataError("label " + std::to_string(v) + " out of range at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
      }
  }
};

/// Sub-matrix with the given source columns, in the given order.
inline AnnotationMatrix select_sources(const AnnotationMatrix& y,
                                       std::span<const std::size_t> columns) {
  AnnotationMatrix out;
  out.num_classes = y.num_classes;
  out.outside_class = y.outside_class;
  out.instances = y.instances;
  out.y.resize(y.y.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= y.H()) throw DataError("source column out of range");
    out.y.col(static_cast<Eigen::Index>(c)) = y.y.col(static_cast<Eigen::Index>(columns[c]));
  }
  return out;
}

struct VariationalState {
  Eigen::MatrixXd qz;  // N x K, rows on the simplex
  Eigen::VectorXd pi_conc;
  Eigen::VectorXd elog_pi;
  std::vector<Eigen::MatrixXd> v_conc;  // H of K x K
  std::vector<Eigen::MatrixXd> elog_v;
  std::vector<double> elbo_trace;
};

struct Posterior {
  VariationalState state;
  std::vector<int> map_labels;
  Eigen::VectorXd mean_recall;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// KL(Dir(a) || Dir(b)).
inline double dirichlet_kl(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                           const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double sa = a.sum();
  const double sb = b.sum();
  const double psi_sa = digamma(sa);
  double kl = std::lgamma(sa) - std::lgamma(sb);
  for (Eigen::Index k = 0; k < a.size(); ++k)
    kl += std::lgamma(b(k)) - std::lgamma(a(k)) + (a(k) - b(k)) * (digamma(a(k)) - psi_sa);
  return kl;
}

inline std::size_t active_sources(const AnnotationMatrix& y) {
  std::size_t active = 0;
  for (Eigen::Index j = 0; j < y.y.cols(); ++j)
    active += (y.y.col(j).array() != kMissing).any() ? 1 : 0;
  return active;
}

inline std::vector<int> argmax_rows(const Eigen::MatrixXd& qz) {
  std::vector<int> out(static_cast<std::size_t>(qz.rows()));
  for (Eigen::Index i = 0; i < qz.rows(); ++i) {
    Eigen::Index k = 0;
    qz.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

}  // namespace detail

/// E[log pi] update. Stores q(pi) = Dir(beta + sum_i qz_i) and returns
/// elog_pi[k] = psi(beta + sum_i qz[i,k]) - psi(K beta + N).
inline const Eigen::VectorXd& update_pi(VariationalState& s, const AnnotationMatrix& y,
                                        const BeaConfig& cfg) {
  const auto K = static_cast<Eigen::Index>(y.K());
  const std::size_t N = y.N();
  std::vector<Eigen::RowVectorXd> partial(num_chunks(N), Eigen::RowVectorXd::Zero(K));
  for_each_chunk(N, cfg.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) partial[c] += s.qz.row(static_cast<Eigen::Index>(i));
  });
  Eigen::RowVectorXd mass = Eigen::RowVectorXd::Zero(K);
  for (const auto& p : partial) mass += p;

  s.pi_conc = (mass.array() + cfg.beta).transpose();
  const double psi_total = digamma(static_cast<double>(K) * cfg.beta + static_cast<double>(N));
  s.elog_pi.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) s.elog_pi(k) = digamma(s.pi_conc(k)) - psi_total;
  return s.elog_pi;
}

/// E[log V] update. Counts run over instances observed by each source:
/// elog_v[j](k,l) = psi(alpha + sum_i qz[i,k] 1[y_ij = l])
///                - psi(K alpha + sum_i qz[i,k] 1[y_ij observed]).
inline const std::vector<Eigen::MatrixXd>& update_v(VariationalState& s,
                                                    const AnnotationMatrix& y,
                                                    const BeaConfig& cfg) {
  const auto K = static_cast<Eigen::Index>(y.K());
  const std::size_t H = y.H();
  const std::size_t N = y.N();
  std::vector<std::vector<Eigen::MatrixXd>> partial(
      num_chunks(N), std::vector<Eigen::MatrixXd>(H, Eigen::MatrixXd::Zero(K, K)));
  for_each_chunk(N, cfg.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    auto& counts = partial[c];
    for (std::size_t i = b; i < e; ++i) {
      const auto row = s.qz.row(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < H; ++j) {
        const int l = y.at(i, j);
        if (l == kMissing) continue;
        counts[j].col(l) += row.transpose();
      }
    }
  });

  s.v_conc.assign(H, Eigen::MatrixXd::Constant(K, K, cfg.alpha));
  s.elog_v.assign(H, Eigen::MatrixXd::Zero(K, K));
  for (std::size_t j = 0; j < H; ++j) {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(K, K);
    for (const auto& p : partial) counts += p[j];
    s.v_conc[j].array() += counts.array();
    for (Eigen::Index k = 0; k < K; ++k) {
      const double psi_row = digamma(static_cast<double>(K) * cfg.alpha + counts.row(k).sum());
      for (Eigen::Index l = 0; l < K; ++l)
        s.elog_v[j](k, l) = digamma(s.v_conc[j](k, l)) - psi_row;
    }
  }
  return s.elog_v;
}

/// q(z_i = k) proportional to exp(elog_pi[k] + sum_j elog_v[j](k, y_ij)),
/// normalised in log space. Missing entries contribute nothing.
inline const Eigen::MatrixXd& update_qz(VariationalState& s, const AnnotationMatrix& y,
                                        const BeaConfig& cfg) {
  const auto K = static_cast<Eigen::Index>(y.K());
  const std::size_t H = y.H();
  s.qz.resize(static_cast<Eigen::Index>(y.N()), K);
  for_each_chunk(y.N(), cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
    Eigen::RowVectorXd logits(K);
    for (std::size_t i = b; i < e; ++i) {
      logits = s.elog_pi.transpose();
      for (std::size_t j = 0; j < H; ++j) {
        const int l = y.at(i, j);
        if (l != kMissing) logits += s.elog_v[j].col(l).transpose();
      }
      const double lse = detail::log_sum_exp(logits);
      s.qz.row(static_cast<Eigen::Index>(i)) = (logits.array() - lse).exp();
    }
  });
  return s.qz;
}

/// Mean-field ELBO:
///   sum_i sum_k qz[i,k] (elog_pi[k] + sum_j elog_v[j](k, y_ij))
///   + H[q(Z)] - KL(q(pi) || Dir(beta)) - sum_{j,k} KL(q(V_j[k]) || Dir(alpha)).
inline double elbo(const VariationalState& s, const AnnotationMatrix& y, const BeaConfig& cfg) {
  const auto K = static_cast<Eigen::Index>(y.K());
  const std::size_t H = y.H();
  std::vector<double> partial(num_chunks(y.N()), 0.0);
  for_each_chunk(y.N(), cfg.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      const auto row = s.qz.row(static_cast<Eigen::Index>(i));
      for (Eigen::Index k = 0; k < K; ++k) {
        const double q = row(k);
        if (q <= 0.0) continue;
        double expected = s.elog_pi(k);
        for (std::size_t j = 0; j < H; ++j) {
          const int l = y.at(i, j);
          if (l != kMissing) expected += s.elog_v[j](k, l);
        }
        acc += q * (expected - std::log(q));
      }
    }
    partial[c] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;

  const Eigen::RowVectorXd prior_pi = Eigen::RowVectorXd::Constant(K, cfg.beta);
  const Eigen::RowVectorXd prior_v = Eigen::RowVectorXd::Constant(K, cfg.alpha);
  total -= detail::dirichlet_kl(s.pi_conc.transpose(), prior_pi);
  for (std::size_t j = 0; j < H; ++j)
    for (Eigen::Index k = 0; k < K; ++k) total -= detail::dirichlet_kl(s.v_conc[j].row(k), prior_v);
  return total;
}

/// Majority-vote initialisation (see Init), followed by one pi/V update.
/// Rows nobody observed start uniform.
inline VariationalState init_state(const AnnotationMatrix& y, const BeaConfig& cfg) {
  const auto K = static_cast<Eigen::Index>(y.K());
  VariationalState s;
  s.qz = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.N()), K);
  Eigen::RowVectorXd votes(K);
  for (std::size_t i = 0; i < y.N(); ++i) {
    votes.setZero();
    for (std::size_t j = 0; j < y.H(); ++j) {
      const int l = y.at(i, j);
      if (l != kMissing) votes(l) += 1.0;
    }
    auto row = s.qz.row(static_cast<Eigen::Index>(i));
    const double observed = votes.sum();
    if (observed == 0.0) {
      row.setConstant(1.0 / static_cast<double>(K));
      continue;
    }
    if (cfg.init == Init::vote_share) {
      row = votes / observed;
      continue;
    }
    const double top = votes.maxCoeff();
    Eigen::RowVectorXd winners = (votes.array() == top).cast<double>();
    if (y.outside_class && winners.sum() > 1.0)
      winners(static_cast<Eigen::Index>(*y.outside_class)) = 0.0;
    row = winners / winners.sum();
  }
  update_pi(s, y, cfg);
  update_v(s, y, cfg);
  return s;
}

/// Row-normalised exp(E[log V_j]); the reported confusion matrix.
inline Eigen::MatrixXd normalized_confusion(const Eigen::MatrixXd& elog_v) {
  Eigen::MatrixXd out(elog_v.rows(), elog_v.cols());
  for (Eigen::Index k = 0; k < elog_v.rows(); ++k) {
    const double lse = detail::log_sum_exp(elog_v.row(k));
    out.row(k) = (elog_v.row(k).array() - lse).exp();
  }
  return out;
}

/// Per-source mean of the normalised confusion diagonal over entity classes.
inline Eigen::VectorXd mean_recall(const std::vector<Eigen::MatrixXd>& elog_v,
                                   std::optional<std::size_t> outside_class,
                                   bool include_outside) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(elog_v.size()));
  for (std::size_t j = 0; j < elog_v.size(); ++j) {
    const Eigen::MatrixXd conf = normalized_confusion(elog_v[j]);
    double sum = 0.0;
    int classes = 0;
    for (Eigen::Index k = 0; k < conf.rows(); ++k) {
      if (!include_outside && outside_class && static_cast<std::size_t>(k) == *outside_class &&
          conf.rows() > 1)
        continue;
      sum += conf(k, k);
      ++classes;
    }
    out(static_cast<Eigen::Index>(j)) = classes ? sum / classes : 0.0;
  }
  return out;
}

namespace detail {

inline Posterior finish(VariationalState state, const AnnotationMatrix& y, const BeaConfig& cfg,
                        int iterations, bool converged) {
  Posterior p;
  p.map_labels = argmax_rows(state.qz);
  p.mean_recall = mean_recall(state.elog_v, y.outside_class, cfg.recall_includes_outside);
  p.state = std::move(state);
  p.iterations = iterations;
  p.converged = converged;
  return p;
}

}  // namespace detail

/// Coordinate ascent from the majority-vote initialisation until the ELBO
/// changes by less than elbo_tol or max_iter cycles have run. Each cycle
/// updates q(Z), then q(pi) and q(V), then records the ELBO.
///
/// With a single active source truth and confusion are not identifiable;
/// the initial state (that source's labels) is returned unchanged.
inline Posterior run_bea(const AnnotationMatrix& y, const BeaConfig& cfg) {
  cfg.validate();
  y.validate();
  VariationalState s = init_state(y, cfg);
  double prev = elbo(s, y, cfg);
  if (!std::isfinite(prev)) throw NumericalError(0, "non-finite ELBO");
  s.elbo_trace.push_back(prev);
  if (detail::active_sources(y) <= 1) return detail::finish(std::move(s), y, cfg, 0, true);

  bool converged = false;
  int it = 0;
  while (it < cfg.max_iter) {
    ++it;
    update_qz(s, y, cfg);
    update_pi(s, y, cfg);
    update_v(s, y, cfg);
    const double cur = elbo(s, y, cfg);
    if (!std::isfinite(cur)) throw NumericalError(it, "non-finite ELBO");
    s.elbo_trace.push_back(cur);
    if (std::abs(cur - prev) < cfg.elbo_tol) {
      converged = true;
      break;
    }
    prev = cur;
  }
  return detail::finish(std::move(s), y, cfg, it, converged);
}

// ---------------------------------------------------------------------------
// Supervised estimation from a small gold set.

/// Gold class counts n_k and per-source confusion counts n_jkl.
struct SufficientStats {
  Eigen::VectorXd class_counts;           // K
  std::vector<Eigen::MatrixXd> counts;    // H of K x K
  double total = 0.0;                     // N

  void validate() const {
    if ((class_counts.array() < 0.0).any()) throw DataError("negative class count");
    for (const auto& c : counts)
      if ((c.array() < 0.0).any()) throw DataError("negative confusion count");
    if (std::abs(class_counts.sum() - total) > 1e-9 * std::max(1.0, total))
      throw DataError("class counts do not sum to the instance total");
  }
};

inline SufficientStats sufficient_stats(const AnnotationMatrix& y,
                                        std::span<const int> gold) {
  if (gold.size() != y.N()) throw DataError("gold labels do not match the instance count");
  const auto K = static_cast<Eigen::Index>(y.K());
  SufficientStats st;
  st.class_counts = Eigen::VectorXd::Zero(K);
  st.counts.assign(y.H(), Eigen::MatrixXd::Zero(K, K));
  st.total = static_cast<double>(y.N());
  for (std::size_t i = 0; i < y.N(); ++i) {
    const int k = gold[i];
    if (k < 0 || k >= K) throw DataError("gold label out of range");
    st.class_counts(k) += 1.0;
    for (std::size_t j = 0; j < y.H(); ++j) {
      const int l = y.at(i, j);
      if (l != kMissing) st.counts[j](k, l) += 1.0;
    }
  }
  return st;
}

enum class Smoothing {
  pseudo_counts,  // add alpha/beta to every count (recovers the prior at zero)
  none            // bare counts; every count must be positive
};

struct FrozenParams {
  Eigen::VectorXd elog_pi;
  std::vector<Eigen::MatrixXd> elog_v;
};

/// Closed-form expectations from gold counts:
///   elog_pi[k]     = psi(n_k + beta) - psi(N + K beta)
///   elog_v[j](k,l) = psi(n_jkl + alpha) - psi(sum_l n_jkl + K alpha)
/// (alpha = beta = 0 under Smoothing::none).
inline FrozenParams supervised_estimate(const SufficientStats& stats, const BeaConfig& cfg,
                                        Smoothing smoothing = Smoothing::pseudo_counts) {
  cfg.validate();
  stats.validate();
  const bool smooth = smoothing == Smoothing::pseudo_counts;
  const double a = smooth ? cfg.alpha : 0.0;
  const double b = smooth ? cfg.beta : 0.0;
  const auto K = stats.class_counts.size();
  auto psi = [](double x) {
    if (!(x > 0.0)) throw DataError("unsmoothed estimate needs positive counts");
    return digamma(x);
  };
  FrozenParams out;
  out.elog_pi.resize(K);
  const double psi_total = psi(stats.total + static_cast<double>(K) * b);
  for (Eigen::Index k = 0; k < K; ++k) out.elog_pi(k) = psi(stats.class_counts(k) + b) - psi_total;
  out.elog_v.reserve(stats.counts.size());
  for (const auto& n : stats.counts) {
    Eigen::MatrixXd ev(K, K);
    for (Eigen::Index k = 0; k < K; ++k) {
      const double psi_row = psi(n.row(k).sum() + static_cast<double>(K) * a);
      for (Eigen::Index l = 0; l < K; ++l) ev(k, l) = psi(n(k, l) + a) - psi_row;
    }
    out.elog_v.push_back(std::move(ev));
  }
  return out;
}

/// One q(Z) update with frozen parameters.
inline Posterior infer_with(const FrozenParams& params, const AnnotationMatrix& y,
                            const BeaConfig& cfg) {
  y.validate();
  if (params.elog_v.size() != y.H() ||
      static_cast<std::size_t>(params.elog_pi.size()) != y.K())
    throw DataError("frozen parameters do not match the annotation matrix shape");
  VariationalState s;
  s.elog_pi = params.elog_pi;
  s.elog_v = params.elog_v;
  update_qz(s, y, cfg);
  return detail::finish(std::move(s), y, cfg, 1, true);
}

// ---------------------------------------------------------------------------
// Spammer removal.

struct FilterResult {
  Posterior posterior;
  std::vector<std::size_t> ranking;  // all sources, best mean recall first
  std::vector<std::size_t> kept;     // retained source columns, ascending
};

/// Ranks sources by mean recall, keeps the best k_keep and reruns BEA on
/// their columns only.
inline FilterResult spammer_filter(const Posterior& first_pass, const AnnotationMatrix& y,
                                   std::size_t k_keep, const BeaConfig& cfg) {
  if (k_keep == 0) throw DataError("k_keep must be >= 1");
  if (k_keep > y.H())
    throw DataError("k_keep (" + std::to_string(k_keep) + ") exceeds number of sources (" +
                    std::to_string(y.H()) + ")");
  if (static_cast<std::size_t>(first_pass.mean_recall.size()) != y.H())
    throw DataError("posterior does not match the annotation matrix");
  FilterResult out;
  out.ranking.resize(y.H());
  std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
    return first_pass.mean_recall(static_cast<Eigen::Index>(a)) >
           first_pass.mean_recall(static_cast<Eigen::Index>(b));
  });
  out.kept.assign(out.ranking.begin(), out.ranking.begin() + static_cast<long>(k_keep));
  std::sort(out.kept.begin(), out.kept.end());
  out.posterior = run_bea(select_sources(y, out.kept), cfg);
  return out;
}

}  // namespace tagagg::bea
