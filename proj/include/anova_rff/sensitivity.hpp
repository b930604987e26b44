#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "anova_rff/errors.hpp"
#include "anova_rff/features.hpp"
#include "anova_rff/index_sets.hpp"

namespace anova_rff {

/// Unbiased sample variance.
inline double label_variance(const Eigen::VectorXd& f) {
  detail::require(f.size() >= 2, "label_variance: need at least 2 labels");
  const double mean = f.mean();
  return (f.array() - mean).square().sum() / static_cast<double>(f.size() - 1);
}

namespace detail {

// Columns of group u's frequency matrix that correspond to the members of w.
inline std::vector<Eigen::Index> positions_in(const VarSubset& u, const VarSubset& w) {
  std::vector<Eigen::Index> pos;
  for (int i : w.members()) {
    const auto& m = u.members();
    pos.push_back(std::lower_bound(m.begin(), m.end(), i) - m.begin());
  }
  return pos;
}

// exp(i * X_s * Omega_s^T): X is points x d, s given by dimension indices and
// the matching frequency columns.
inline Eigen::MatrixXcd phase_matrix(const Eigen::MatrixXd& X, const VarSubset& s,
                                     const Eigen::MatrixXd& omegas,
                                     const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd ph = Eigen::MatrixXd::Zero(X.rows(), omegas.rows());
  for (std::size_t t = 0; t < cols.size(); ++t)
    ph += X.col(s.members()[t]) * omegas.col(cols[t]).transpose();
  return ph.unaryExpr([](double z) { return cplx(std::cos(z), std::sin(z)); });
}

}  // namespace detail

/// Monte-Carlo ANOVA term g_v of the block u, evaluated at eval_points:
///   g_v(x) = (1/M) sum_w a_w sum_j e^{i<x^(j)_{u\v}, w_{u\v}>} prod_{i in v}(e^{i x_i w_i} - e^{i x^(j)_i w_i}).
/// Expanding the product over w subset of v gives
///   g_v(x) = sum_w a_w sum_{s subset v} (-1)^{|v\s|} e^{i<x_s, w_s>} (1/M) T_{u\s}(w),
///   T_r(w) = sum_j e^{i<x^(j)_r, w_r>},
/// which costs O(2^|v| (M + #eval) n_u) instead of O(M #eval n_u).
inline Eigen::VectorXcd mc_anova_term(const FeatureSet& features, const CoefficientVector& a,
                                      const Eigen::MatrixXd& X, const VarSubset& u,
                                      const VarSubset& v, const Eigen::MatrixXd& eval_points) {
  detail::require(v.is_subset_of(u), "mc_anova_term: v must be a subset of u");
  detail::require(X.rows() >= 1, "mc_anova_term: no sample points");
  detail::require(X.cols() == features.dimension() && eval_points.cols() == features.dimension(),
                  "mc_anova_term: dimension mismatch");
  detail::require(a.layout == features.layout(), "mc_anova_term: coefficient blocks do not match");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(eval_points.rows());
  if (!features.has_group(u)) return out;
  const Eigen::MatrixXd& om = features.group(u);
  const Eigen::VectorXcd au = a.block(u);
  const double invM = 1.0 / static_cast<double>(X.rows());
  for (const auto& s : v.subsets()) {
    const VarSubset rest = u.minus(s);
    // (1/M) T_{u\s}(w) for every frequency of the block.
    const Eigen::VectorXcd T =
        detail::phase_matrix(X, rest, om, detail::positions_in(u, rest)).colwise().sum().transpose() *
        invM;
    const double sign = ((v.size() - s.size()) % 2 == 0) ? 1.0 : -1.0;
    const Eigen::VectorXcd c = sign * au.cwiseProduct(T);
    if (s.empty()) {
      out.array() += c.sum();
    } else {
      out += detail::phase_matrix(eval_points, s, om, detail::positions_in(u, s)) * c;
    }
  }
  return out;
}

/// (1/M_eval) sum |g_u(x)|^2 / denom over the evaluation points (default: X).
inline double mc_variance(const FeatureSet& features, const CoefficientVector& a,
                          const Eigen::MatrixXd& X, const VarSubset& u, double denom,
                          const Eigen::MatrixXd* eval_points = nullptr) {
  detail::require(X.rows() >= 2, "mc_variance: need at least 2 samples");
  detail::require(denom > 0, "mc_variance: variance denominator must be > 0");
  if (!features.has_group(u)) return 0.0;
  const Eigen::MatrixXd& E = eval_points ? *eval_points : X;
  const Eigen::VectorXcd g = mc_anova_term(features, a, X, u, u, E);
  return g.squaredNorm() / static_cast<double>(E.rows()) / denom;
}

struct SensitivityEntry {
  VarSubset u;
  double s_var = 0.0;
  double s_cor = 0.0;
  double s_total = 0.0;
  double normalized_s_var = 0.0;
};

struct SensitivityReport {
  std::vector<SensitivityEntry> entries;  // canonical order
  double variance = 0.0;                  // sigma^2(f) estimate
  double normalizer = 0.0;                // sum of s_var over nonempty u
  Eigen::Index M = 0, N = 0;
  std::uint64_t seed = 0;

  const SensitivityEntry* find(const VarSubset& u) const {
    for (const auto& e : entries)
      if (e.u == u) return &e;
    return nullptr;
  }

  void normalize() {
    normalizer = 0.0;
    for (const auto& e : entries)
      if (!e.u.empty()) normalizer += e.s_var;
    for (auto& e : entries) e.normalized_s_var = normalizer > 0 ? e.s_var / normalizer : 0.0;
  }
};

/// Dependent-input Sobol estimates from a fitted block model:
///   s_var(u) = (1/M) ||A_u a_u||^2 / var(f)
///   s_cor(u) = sum_{v != {}, v meets u, v not subset of u} Re<A_v a_v, A_u a_u>/M / var(f)
inline SensitivityReport sobol_indices_dependent(const FeatureMatrix& F, const CoefficientVector& a,
                                                 const Eigen::VectorXd& f) {
  detail::require(a.layout == F.layout, "sobol_indices_dependent: coefficient blocks do not match");
  detail::require(F.rows() == f.size(), "sobol_indices_dependent: label length mismatch");
  detail::require(f.size() >= 2, "sobol_indices_dependent: need at least 2 samples");
  const double var = label_variance(f);
  if (!(var > 0)) throw InvalidState("sobol_indices_dependent: labels have zero variance");
  const double M = static_cast<double>(F.rows());
  const auto& blocks = F.layout.blocks();
  std::vector<Eigen::VectorXcd> g;
  g.reserve(blocks.size());
  for (const auto& b : blocks)
    g.push_back(F.A.middleCols(b.offset, b.size) * a.values.segment(b.offset, b.size));

  SensitivityReport rep;
  rep.variance = var;
  rep.M = F.rows();
  rep.N = F.cols();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const VarSubset& u = blocks[i].u;
    SensitivityEntry e;
    e.u = u;
    e.s_var = g[i].squaredNorm() / M / var;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const VarSubset& v = blocks[k].u;
      if (v.empty() || !v.intersects(u) || v.is_subset_of(u)) continue;
      e.s_cor += g[i].dot(g[k]).real() / M / var;
    }
    e.s_total = e.s_var + e.s_cor;
    rep.entries.push_back(e);
  }
  rep.normalize();
  return rep;
}

/// Independent-input report: mc_variance for each requested term, s_cor = 0.
inline SensitivityReport sensitivity_independent(const FeatureSet& features,
                                                 const CoefficientVector& a,
                                                 const SampleSet& S, const AnovaIndexSet& terms,
                                                 const Eigen::MatrixXd* eval_points = nullptr) {
  detail::require(S.labelled(), "sensitivity_independent: samples have no labels");
  const double var = label_variance(S.labels);
  if (!(var > 0)) throw InvalidState("sensitivity_independent: labels have zero variance");
  SensitivityReport rep;
  rep.variance = var;
  rep.M = S.count();
  rep.N = features.total();
  for (const auto& u : terms) {
    SensitivityEntry e;
    e.u = u;
    e.s_var = u.empty() ? 0.0 : mc_variance(features, a, S.points, u, var, eval_points);
    e.s_total = e.s_var;
    rep.entries.push_back(e);
  }
  rep.normalize();
  return rep;
}

}  // namespace anova_rff
