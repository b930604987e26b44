#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anova_rff/errors.hpp"
#include "anova_rff/features.hpp"
#include "anova_rff/index_sets.hpp"
#include "anova_rff/sampling.hpp"
#include "anova_rff/sensitivity.hpp"
#include "anova_rff/solvers.hpp"

namespace anova_rff {

enum class RefineOrder {
  descending,  // round t adds uncovered terms of order q-t
  ascending    // round t adds uncovered terms of order t-1 (pseudocode as written)
};

struct BoostConfig {
  int q = 2;
  double eps = 0.01;
  Eigen::Index N = 0;  // total feature budget
  double lambda = 1e-6;
  FeatureDensitySpec density = FeatureDensitySpec::gaussian_variance(0.5);
  std::uint64_t seed = 0;
  RefineOrder order = RefineOrder::descending;
  Eigen::Index M_val = 0;     // 0: estimate variances on all of X
  SolverOptions solver{};     // penalized solve (dependent case); lambda is taken from `lambda`

  void validate(int d) const {
    detail::require(q >= 1 && q <= d, "boost: q must satisfy 1 <= q <= d");
    detail::require(eps >= 0 && !std::isnan(eps), "boost: eps must be >= 0");
    detail::require(N >= 1, "boost: N must be >= 1");
    detail::require(lambda >= 0 && std::isfinite(lambda), "boost: lambda must be >= 0");
    detail::require(M_val >= 0, "boost: M_val must be >= 0");
    density.validate();
  }
};

struct TermRecord {
  VarSubset u;
  double s_var = 0.0;
  double s_cor = 0.0;
  bool kept = false;
};

struct RoundRecord {
  int round = 0;
  AnovaIndexSet candidates;
  Eigen::Index features_per_term = 0;
  std::vector<TermRecord> terms;
  long solver_iterations = 0;
  double solver_residual = 0.0;
};

struct BoostTrace {
  std::vector<RoundRecord> rounds;
  std::vector<std::string> diagnostics;
};

struct BoostResult {
  AnovaIndexSet U;
  FeatureSet features;     // features drawn for U
  CoefficientVector a;     // last fitted coefficients (layout of fit_features)
  FeatureSet fit_features;  // features the coefficients belong to
  BoostTrace trace;
};

namespace detail {

inline Eigen::MatrixXd eval_subset(const Eigen::MatrixXd& X, Eigen::Index M_val) {
  if (M_val <= 0 || M_val >= X.rows()) return X;
  return X.topRows(M_val);
}

inline void check_boost_input(const SampleSet& S, const BoostConfig& cfg) {
  require(S.labelled(), "boost: samples have no labels");
  require(S.count() >= 2, "boost: need at least 2 samples");
  cfg.validate(S.dimension());
}

inline BoostResult degenerate(const SampleSet& S, const BoostConfig& cfg, BoostResult res,
                              const std::string& why) {
  res.U = AnovaIndexSet(S.dimension(), {VarSubset{}});
  res.features = draw_feature_set(res.U, std::max<Eigen::Index>(cfg.N, 1), cfg.density, nullptr, cfg.seed);
  res.fit_features = res.features;
  res.a = CoefficientVector::zeros(res.features.layout());
  res.a.values(0) = S.labels.mean();
  res.trace.diagnostics.push_back(why);
  return res;
}

}  // namespace detail

/// Refinement from order-q terms down using Monte-Carlo variances of the
/// maximal terms; independent inputs.
inline BoostResult boost_independent(const SampleSet& S, const BoostConfig& cfg) {
  detail::check_boost_input(S, cfg);
  const int d = S.dimension(), q = cfg.q;
  BoostResult res;
  const double var = label_variance(S.labels);
  if (!(var > 0))
    return detail::degenerate(S, cfg, std::move(res),
                              "labels have zero variance; every term is below eps, returning {}");

  const Eigen::MatrixXd E = detail::eval_subset(S.points, cfg.M_val);
  AnovaIndexSet U = all_subsets_of_order(d, q);
  FeatureSet feats = draw_feature_set(U, cfg.N, cfg.density, nullptr, cfg.seed);
  CoefficientVector a = ridge_solve_dual(assemble_matrix(feats, S.points), S.labels, cfg.lambda);

  for (int t = 1; t <= q; ++t) {
    RoundRecord rec;
    rec.round = t;
    rec.candidates = U;
    rec.features_per_term = cfg.N / static_cast<Eigen::Index>(U.size());
    AnovaIndexSet kept(d);
    for (const auto& u : U) {
      if (U.covers(u)) {
        kept.insert(u);
        continue;
      }
      const double s = mc_variance(feats, a, S.points, u, var, &E);
      const bool keep = s >= cfg.eps;
      rec.terms.push_back({u, s, 0.0, keep});
      if (keep) kept.insert(u);
    }
    const int k = cfg.order == RefineOrder::descending ? q - t : t - 1;
    U = set_union(kept, uncovered_subsets(kept, k));
    res.trace.rounds.push_back(std::move(rec));
    if (U.empty()) U.insert(VarSubset{});
    feats = draw_feature_set(U, cfg.N, cfg.density, &feats, cfg.seed);
    a = ridge_solve_dual(assemble_matrix(feats, S.points), S.labels, cfg.lambda);
  }
  if (U.size() == 1 && U.begin()->empty())
    res.trace.diagnostics.push_back("all terms fell below eps; returning {}");
  res.U = U;
  res.features = feats;
  res.fit_features = feats;
  res.a = a;
  return res;
}

/// All terms up to order q, fitted under the orthogonality penalty and pruned
/// by Sobol variance indices; inputs may be dependent.
inline BoostResult boost_dependent(const SampleSet& S, const BoostConfig& cfg) {
  detail::check_boost_input(S, cfg);
  detail::require(cfg.lambda > 0, "boost_dependent: lambda must be > 0");
  const int d = S.dimension(), q = cfg.q;
  BoostResult res;
  const double var = label_variance(S.labels);
  if (!(var > 0))
    return detail::degenerate(S, cfg, std::move(res),
                              "labels have zero variance; every term is below eps, returning {}");

  AnovaIndexSet U = all_subsets_up_to_order(d, q);
  FeatureSet feats(d);
  CoefficientVector a;
  SolverOptions so = cfg.solver;
  so.lambda = cfg.lambda;
  for (int t = q; t >= 1; --t) {
    RoundRecord rec;
    rec.round = q - t + 1;
    rec.candidates = U;
    rec.features_per_term = cfg.N / static_cast<Eigen::Index>(U.size());
    feats = draw_feature_set(U, cfg.N, cfg.density, feats.groups().empty() ? nullptr : &feats,
                             cfg.seed);
    const FeatureMatrix F = assemble_matrix(feats, S.points);
    const PenaltyBlocks P = build_penalty(F, U);
    PenalizedSolveResult sol = penalized_solve(F, S.labels, P, so);
    rec.solver_iterations = sol.iterations;
    rec.solver_residual = sol.residual;
    a = std::move(sol.a);
    const SensitivityReport rep = sobol_indices_dependent(F, a, S.labels);
    AnovaIndexSet kept(d);
    for (const auto& e : rep.entries) {
      const bool keep = e.s_var > cfg.eps || static_cast<int>(e.u.size()) < t;
      rec.terms.push_back({e.u, e.s_var, e.s_cor, keep});
      if (keep) kept.insert(e.u);
    }
    U = kept;
    res.trace.rounds.push_back(std::move(rec));
  }
  res.fit_features = feats;
  res.a = a;
  U = prune_to_anti_downward_closed(U);
  if (U.empty()) U.insert(VarSubset{});
  if (U.size() == 1 && U.begin()->empty())
    res.trace.diagnostics.push_back("all nonconstant terms fell below eps; returning {}");
  res.U = U;
  res.features = draw_feature_set(U, cfg.N, cfg.density, &feats, cfg.seed);
  return res;
}

}  // namespace anova_rff
