#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anova_rff/errors.hpp"
#include "anova_rff/features.hpp"
#include "anova_rff/rng.hpp"
#include "anova_rff/sampling.hpp"
#include "anova_rff/solvers.hpp"

namespace anova_rff {

/// Mean of |y - Re(A a)|^2.
inline double mse(const FeatureSet& features, const CoefficientVector& a, const SampleSet& S) {
  detail::require(S.count() >= 1 && S.labelled(), "mse: need labelled samples");
  return (S.labels - predict(features, a, S.points)).squaredNorm() /
         static_cast<double>(S.count());
}

namespace detail {

// Indices of the k largest |x_i|; ties keep the lower index. Returned sorted.
inline std::vector<Eigen::Index> top_k_by_modulus(const Eigen::VectorXcd& x, Eigen::Index k) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(x(a)) > std::abs(x(b));
  });
  idx.resize(static_cast<std::size_t>(std::min<Eigen::Index>(k, x.size())));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline Eigen::MatrixXcd gather_cols(const Eigen::MatrixXcd& A, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXcd out(A.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = A.col(cols[j]);
  return out;
}

inline Eigen::VectorXcd scatter(const Eigen::VectorXcd& v, const std::vector<Eigen::Index>& cols,
                                Eigen::Index n) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
  for (std::size_t j = 0; j < cols.size(); ++j) out(cols[j]) = v(static_cast<Eigen::Index>(j));
  return out;
}

inline double mean_sq(const Eigen::VectorXd& y, const Eigen::MatrixXcd& A, const Eigen::VectorXcd& a) {
  return (y - (A * a).real()).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Iterative magnitude pruning with validation selection

struct PruneSchedule {
  double p_keep = 0.5;
  Eigen::Index min_survivors = 4;
  int max_rounds = 20;

  void validate() const {
    detail::require(p_keep > 0 && p_keep < 1, "prune schedule: p_keep must be in (0,1)");
    detail::require(min_survivors >= 1, "prune schedule: min_survivors must be >= 1");
    detail::require(max_rounds >= 0, "prune schedule: max_rounds must be >= 0");
  }
};

struct PrunePoint {
  Eigen::Index survivors = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct ShrimpResult {
  CoefficientVector a;
  std::vector<bool> kept;
  double val_mse = 0.0;
  std::vector<PrunePoint> path;
};

inline ShrimpResult fit_shrimp(const FeatureSet& features, const SampleSet& train,
                               const SampleSet& val, double lambda,
                               const PruneSchedule& schedule = {}) {
  schedule.validate();
  detail::require(train.count() >= 1 && train.labelled(), "fit_shrimp: empty training set");
  detail::require(val.count() >= 1 && val.labelled(), "fit_shrimp: empty validation set");
  const FeatureMatrix Ft = assemble_matrix(features, train.points);
  const FeatureMatrix Fv = assemble_matrix(features, val.points);
  const Eigen::Index N = Ft.cols();
  detail::require(N >= 1, "fit_shrimp: no features");

  std::vector<Eigen::Index> active(static_cast<std::size_t>(N));
  std::iota(active.begin(), active.end(), Eigen::Index{0});
  ShrimpResult best;
  best.val_mse = std::numeric_limits<double>::infinity();
  for (int round = 0;; ++round) {
    const Eigen::VectorXcd sub = ridge_solve(detail::gather_cols(Ft.A, active), train.labels, lambda);
    const Eigen::VectorXcd full = detail::scatter(sub, active, N);
    PrunePoint pt;
    pt.survivors = static_cast<Eigen::Index>(active.size());
    pt.train_mse = detail::mean_sq(train.labels, Ft.A, full);
    pt.val_mse = detail::mean_sq(val.labels, Fv.A, full);
    best.path.push_back(pt);
    if (pt.val_mse < best.val_mse) {
      best.val_mse = pt.val_mse;
      best.a = {full, Ft.layout};
      best.kept.assign(static_cast<std::size_t>(N), false);
      for (auto j : active) best.kept[static_cast<std::size_t>(j)] = true;
    }
    if (round >= schedule.max_rounds) break;
    const Eigen::Index cur = static_cast<Eigen::Index>(active.size());
    const Eigen::Index next = std::max(
        schedule.min_survivors,
        static_cast<Eigen::Index>(std::ceil(schedule.p_keep * static_cast<double>(cur))));
    if (next >= cur) break;
    const std::vector<Eigen::Index> keep = detail::top_k_by_modulus(sub, next);
    std::vector<Eigen::Index> nxt;
    for (auto j : keep) nxt.push_back(active[static_cast<std::size_t>(j)]);
    active = std::move(nxt);
  }
  return best;
}

/// Seeded split into (train, validation); `train_fraction` of the rows go to train.
inline std::pair<SampleSet, SampleSet> split_samples(const SampleSet& S, double train_fraction,
                                                     std::uint64_t seed) {
  detail::require(train_fraction > 0 && train_fraction < 1, "split: fraction must be in (0,1)");
  detail::require(S.count() >= 2 && S.labelled(), "split: need >= 2 labelled samples");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(S.count()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Engine eng = make_stream(seed, "split");
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(perm[i], perm[pick(eng)]);
  }
  Eigen::Index nt = static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(S.count())));
  nt = std::clamp<Eigen::Index>(nt, 1, S.count() - 1);
  auto take = [&](Eigen::Index from, Eigen::Index to) {
    SampleSet out;
    out.points.resize(to - from, S.dimension());
    out.labels.resize(to - from);
    for (Eigen::Index r = from; r < to; ++r) {
      out.points.row(r - from) = S.points.row(perm[static_cast<std::size_t>(r)]);
      out.labels(r - from) = S.labels(perm[static_cast<std::size_t>(r)]);
    }
    return out;
  };
  return {take(0, nt), take(nt, S.count())};
}

/// SHRIMP on an 80/20 seeded split of `data`.
inline ShrimpResult fit_shrimp(const FeatureSet& features, const SampleSet& data, double lambda,
                               std::uint64_t seed, const PruneSchedule& schedule = {}) {
  auto [tr, va] = split_samples(data, 0.8, seed);
  return fit_shrimp(features, tr, va, lambda, schedule);
}

// ---------------------------------------------------------------------------
// Hard thresholding pursuit

struct HtpConfig {
  Eigen::Index s = 1;
  double eta = 0.0;  // 0: 1/||A||^2 from 20 power iterations
  double lambda = 1e-6;
  int max_iterations = 500;
  bool stop_on_stable_support = true;
};

struct HarfeResult {
  CoefficientVector a;
  std::vector<Eigen::Index> support;
  int iterations = 0;
  bool converged = false;
  double train_mse = 0.0;
  std::vector<std::string> diagnostics;
};

/// Squared spectral norm estimate of A by power iteration on A^*A.
inline double spectral_norm_sq(const Eigen::MatrixXcd& A, int steps = 20) {
  if (A.size() == 0) return 0.0;
  Engine eng = make_stream(0, "power-iteration");
  std::normal_distribution<double> nd;
  Eigen::VectorXcd v(A.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(nd(eng), nd(eng));
  v.normalize();
  double est = 0.0;
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXcd w = A.adjoint() * (A * v);
    est = w.norm();
    if (est == 0.0) return 0.0;
    v = w / est;
  }
  return est;
}

inline HarfeResult fit_harfe(const FeatureSet& features, const SampleSet& train, const HtpConfig& cfg) {
  detail::require(train.count() >= 1 && train.labelled(), "fit_harfe: empty training set");
  detail::require(cfg.lambda >= 0, "fit_harfe: lambda must be >= 0");
  detail::require(cfg.max_iterations >= 1, "fit_harfe: max_iterations must be >= 1");
  const FeatureMatrix F = assemble_matrix(features, train.points);
  const Eigen::Index N = F.cols();
  detail::require(cfg.s >= 1 && cfg.s <= N, "fit_harfe: need 1 <= s <= N");
  double eta = cfg.eta;
  if (eta <= 0) {
    const double nrm = spectral_norm_sq(F.A);
    eta = nrm > 0 ? 1.0 / nrm : 1.0;
  }
  const Eigen::VectorXcd fc = train.labels.cast<cplx>();

  HarfeResult res;
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(N);
  std::vector<Eigen::Index> prev;
  double best_res = std::numeric_limits<double>::infinity();
  Eigen::VectorXcd best_a = a;
  std::vector<Eigen::Index> best_S;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Eigen::VectorXcd g = a + eta * (F.A.adjoint() * (fc - F.A * a) - cfg.lambda * a);
    std::vector<Eigen::Index> S = detail::top_k_by_modulus(g, cfg.s);
    const Eigen::VectorXcd sub = ridge_solve(detail::gather_cols(F.A, S), train.labels, cfg.lambda);
    a = detail::scatter(sub, S, N);
    const double r = detail::mean_sq(train.labels, F.A, a);
    res.iterations = it;
    if (r < best_res) {
      best_res = r;
      best_a = a;
      best_S = S;
    }
    if (cfg.stop_on_stable_support && S == prev) {
      res.converged = true;
      res.a = {a, F.layout};
      res.support = S;
      res.train_mse = r;
      return res;
    }
    prev = std::move(S);
  }
  res.diagnostics.push_back("support did not stabilize within " +
                            std::to_string(cfg.max_iterations) +
                            " iterations; returning the best-residual iterate");
  res.a = {best_a, F.layout};
  res.support = best_S;
  res.train_mse = best_res;
  return res;
}

}  // namespace anova_rff
