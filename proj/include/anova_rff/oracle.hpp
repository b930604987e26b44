#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "anova_rff/errors.hpp"
#include "anova_rff/features.hpp"
#include "anova_rff/index_sets.hpp"
#include "anova_rff/rng.hpp"
#include "anova_rff/sampling.hpp"

namespace anova_rff {

// ---------------------------------------------------------------------------
// Exact ANOVA of f(x1,x2) = g1(x1) g2(x2), g1 = |x|/(1+x^2)^2, g2 = max(1-|x|, 0)

inline double tensor_g1(double x) {
  const double a = 1.0 + x * x;
  return std::abs(x) / (a * a);
}
inline double tensor_g2(double x) { return std::max(1.0 - std::abs(x), 0.0); }

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// E[h(X)] for X ~ marginal, by adaptive Gauss-Kronrod split at `kinks`.
inline QuadratureResult integrate_marginal(const std::function<double(double)>& h,
                                           const Marginal& m, std::vector<double> kinks = {},
                                           double tol = 1e-12) {
  m.validate();
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double lo, hi, scale;
  std::function<double(double)> w;
  if (m.kind == MarginalKind::uniform) {
    lo = m.a;
    hi = m.b;
    scale = 1.0 / (m.b - m.a);
    w = [&](double x) { return h(x); };
  } else {
    lo = -std::numeric_limits<double>::infinity();
    hi = std::numeric_limits<double>::infinity();
    scale = 1.0;
    const boost::math::normal_distribution<double> nd;
    w = [&h, nd](double x) { return h(x) * boost::math::pdf(nd, x); };
  }
  std::vector<double> pts{lo};
  std::sort(kinks.begin(), kinks.end());
  for (double k : kinks)
    if (k > lo && k < hi && k > pts.back()) pts.push_back(k);
  pts.push_back(hi);
  QuadratureResult r;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double err = 0.0;
    r.value += GK::integrate(w, pts[i], pts[i + 1], 15, tol, &err);
    r.error += err;
  }
  r.value *= scale;
  r.error *= scale;
  if (!std::isfinite(r.value) || r.error > 1e-8)
    throw NumericalFailure("integrate_marginal: quadrature did not converge");
  return r;
}

struct Tensor2Anova {
  double g1_mean = 0.0, g2_mean = 0.0;
  double quadrature_error = 0.0;

  double f_empty() const { return g1_mean * g2_mean; }
  double f1(double x1) const { return (tensor_g1(x1) - g1_mean) * g2_mean; }
  double f2(double x2) const { return g1_mean * (tensor_g2(x2) - g2_mean); }
  double f12(double x1, double x2) const {
    return (tensor_g1(x1) - g1_mean) * (tensor_g2(x2) - g2_mean);
  }
  double f(double x1, double x2) const { return tensor_g1(x1) * tensor_g2(x2); }
};

/// Both coordinates share the marginal (standard normal or uniform[a,b]).
inline Tensor2Anova exact_anova_tensor2(const Marginal& m) {
  const QuadratureResult a = integrate_marginal(tensor_g1, m, {0.0});
  const QuadratureResult b = integrate_marginal(tensor_g2, m, {-1.0, 0.0, 1.0});
  return {a.value, b.value, a.error + b.error};
}

// ---------------------------------------------------------------------------
// Nested Monte-Carlo Sobol shares for product measures

struct OracleOptions {
  Eigen::Index outer = 200000;
  Eigen::Index inner = 2000;
  int max_order = 2;
};

struct OracleShare {
  VarSubset u;
  double share = 0.0;
  double stderr_ = 0.0;
};

struct OracleResult {
  std::vector<OracleShare> shares;  // canonical order, nonempty u with |u| <= max_order
  double variance = 0.0;

  const OracleShare* find(const VarSubset& u) const {
    for (const auto& s : shares)
      if (s.u == u) return &s;
    return nullptr;
  }
};

/// f_u(x_u) ~ sum_{v subset u} (-1)^{|u\v|} (1/n) sum_k f(x_v, z_k); shares are
/// mean f_u^2 / var f over the outer points. Each outer point gets its own inner
/// sample z_1..z_n: a shared one biases every term the same way, an error the
/// outer standard error cannot see. Only the function's active coordinates are
/// enumerated.
inline OracleResult oracle_sobol_independent(TestFunction fn, const DataDistributionSpec& spec,
                                             std::uint64_t seed, const OracleOptions& opts = {}) {
  if (spec.kind != DataKind::uniform_box)
    throw Unsupported("oracle_sobol_independent: only product (independent) marginals are supported");
  spec.validate();
  detail::require(opts.outer >= 2 && opts.inner >= 1, "oracle: need outer >= 2 and inner >= 1");
  const int active = min_dimension(fn);
  detail::require(spec.dimension >= active, "oracle: dimension too small for the function");
  detail::require(opts.max_order >= 1 && opts.max_order <= active, "oracle: invalid max_order");
  const int d = spec.dimension;

  DataDistributionSpec ospec = spec;
  const Eigen::MatrixXd Xo = sample_data(ospec, opts.outer, mix_seed(seed, "oracle-outer")).points;
  const std::uint64_t inner_seed = mix_seed(seed, "oracle-inner");

  const AnovaIndexSet closure = all_subsets_up_to_order(active, opts.max_order);
  std::vector<VarSubset> terms(closure.begin(), closure.end());
  const std::size_t T = terms.size();

  // h[t](j) = (1/n) sum_k f(x^(j)_{terms[t]}, z_k)
  Eigen::MatrixXd h(opts.outer, static_cast<Eigen::Index>(T));
  Eigen::VectorXd fx(opts.outer);
  Eigen::VectorXd buf(d);
  for (Eigen::Index j = 0; j < opts.outer; ++j) {
    const Eigen::MatrixXd Z =
        sample_data(ospec, opts.inner, mix_seed(inner_seed, static_cast<std::uint64_t>(j))).points;
    for (std::size_t t = 0; t < T; ++t) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < opts.inner; ++k) {
        buf = Z.row(k).transpose();
        for (int i : terms[t].members()) buf(i) = Xo(j, i);
        acc += evaluate_test_function(fn, buf);
      }
      h(j, static_cast<Eigen::Index>(t)) = acc / static_cast<double>(opts.inner);
    }
    buf = Xo.row(j).transpose();
    fx(j) = evaluate_test_function(fn, buf);
  }

  OracleResult out;
  const double n = static_cast<double>(opts.outer);
  out.variance = (fx.array() - fx.mean()).square().sum() / (n - 1.0);
  for (std::size_t t = 0; t < T; ++t) {
    const VarSubset& u = terms[t];
    if (u.empty()) continue;
    Eigen::VectorXd fu = Eigen::VectorXd::Zero(opts.outer);
    for (const auto& v : u.subsets()) {
      const auto pos = std::find(terms.begin(), terms.end(), v) - terms.begin();
      const double sign = ((u.size() - v.size()) % 2 == 0) ? 1.0 : -1.0;
      fu += sign * h.col(pos);
    }
    const Eigen::ArrayXd sq = fu.array().square();
    const double m = sq.mean();
    const double sd = std::sqrt((sq - m).square().sum() / (n - 1.0));
    out.shares.push_back({u, m / out.variance, sd / std::sqrt(n) / out.variance});
  }
  return out;
}

// ---------------------------------------------------------------------------
// The Monte-Carlo term formula evaluated literally by explicit loops (tiny instances only)

inline Eigen::VectorXcd brute_force_mc_terms(const FeatureSet& features, const CoefficientVector& a,
                                             const Eigen::MatrixXd& X, const VarSubset& u,
                                             const VarSubset& v, const Eigen::MatrixXd& eval_points) {
  detail::require(X.rows() <= 10, "brute_force_mc_terms: M must be <= 10");
  detail::require(features.total() <= 10, "brute_force_mc_terms: N must be <= 10");
  detail::require(u.size() <= 3, "brute_force_mc_terms: |u| must be <= 3");
  detail::require(v.is_subset_of(u), "brute_force_mc_terms: v must be a subset of u");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(eval_points.rows());
  if (!features.has_group(u)) return out;
  const Eigen::MatrixXd& om = features.group(u);
  const Block& blk = a.layout.at(u);
  const cplx I(0.0, 1.0);
  const auto& mem = u.members();
  for (Eigen::Index p = 0; p < eval_points.rows(); ++p) {
    cplx total = 0.0;
    for (Eigen::Index w = 0; w < om.rows(); ++w) {
      cplx sum_j = 0.0;
      for (Eigen::Index j = 0; j < X.rows(); ++j) {
        cplx term = 1.0;
        for (std::size_t t = 0; t < mem.size(); ++t) {
          const int i = mem[t];
          const double wi = om(w, static_cast<Eigen::Index>(t));
          if (v.contains(i))
            term *= std::exp(I * eval_points(p, i) * wi) - std::exp(I * X(j, i) * wi);
          else
            term *= std::exp(I * X(j, i) * wi);
        }
        sum_j += term;
      }
      total += a.values(blk.offset + w) * sum_j;
    }
    out(p) = total / static_cast<double>(X.rows());
  }
  return out;
}

}  // namespace anova_rff
