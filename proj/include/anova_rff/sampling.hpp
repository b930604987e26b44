#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "anova_rff/errors.hpp"
#include "anova_rff/rng.hpp"

namespace anova_rff {

struct SampleSet {
  Eigen::MatrixXd points;  // M x d, one sample per row
  Eigen::VectorXd labels;  // length M (may be empty before labelling)

  Eigen::Index count() const { return points.rows(); }
  int dimension() const { return static_cast<int>(points.cols()); }
  bool labelled() const { return labels.size() == points.rows(); }
};

// ---------------------------------------------------------------------------
// Feature densities

enum class FeatureDensityKind { gaussian, cauchy, sobolev_tensor };

struct FeatureDensitySpec {
  FeatureDensityKind kind = FeatureDensityKind::gaussian;
  double scale = 1.0;       // sigma
  double smoothness = 1.0;  // s, sobolev_tensor only

  static FeatureDensitySpec gaussian_variance(double variance) {
    return {FeatureDensityKind::gaussian, std::sqrt(variance), 1.0};
  }
  static FeatureDensitySpec cauchy(double scale) {
    return {FeatureDensityKind::cauchy, scale, 1.0};
  }
  static FeatureDensitySpec sobolev_tensor(double scale, double s) {
    return {FeatureDensityKind::sobolev_tensor, scale, s};
  }

  void validate() const {
    detail::require(std::isfinite(scale) && scale > 0, "feature density: scale must be > 0");
    if (kind == FeatureDensityKind::sobolev_tensor)
      detail::require(smoothness > 0.5, "feature density: smoothness must be > 1/2");
  }
};

inline std::string to_string(FeatureDensityKind k) {
  switch (k) {
    case FeatureDensityKind::gaussian: return "gaussian";
    case FeatureDensityKind::cauchy: return "cauchy";
    case FeatureDensityKind::sobolev_tensor: return "sobolev-tensor";
  }
  return "?";
}

inline FeatureDensityKind parse_feature_density_kind(const std::string& s) {
  if (s == "gaussian") return FeatureDensityKind::gaussian;
  if (s == "cauchy") return FeatureDensityKind::cauchy;
  if (s == "sobolev-tensor" || s == "sobolev") return FeatureDensityKind::sobolev_tensor;
  throw InvalidArgument("unknown feature density '" + s + "'");
}

namespace detail {

// One nonzero draw from the 1-d factor of the density.
// (1 + w^2/sigma^2)^-s is a Student-t with nu = 2s-1, rescaled by sigma/sqrt(nu).
inline double draw_frequency(const FeatureDensitySpec& d, Engine& eng) {
  double w = 0.0;
  do {
    switch (d.kind) {
      case FeatureDensityKind::gaussian:
        w = std::normal_distribution<double>(0.0, d.scale)(eng);
        break;
      case FeatureDensityKind::cauchy:
        w = std::cauchy_distribution<double>(0.0, d.scale)(eng);
        break;
      case FeatureDensityKind::sobolev_tensor: {
        const double nu = 2.0 * d.smoothness - 1.0;
        w = d.scale * std::student_t_distribution<double>(nu)(eng) / std::sqrt(nu);
        break;
      }
    }
  } while (w == 0.0);
  return w;
}

}  // namespace detail

/// n x k i.i.d. draws from the k-fold product density. Row r is drawn from
/// its own stream (seed, r), so rows [first_row, first_row+n) are the same
/// whether they are drawn in one call or across several top-ups.
inline Eigen::MatrixXd sample_feature_frequencies(const FeatureDensitySpec& density,
                                                  int k, Eigen::Index n,
                                                  std::uint64_t seed,
                                                  Eigen::Index first_row = 0) {
  density.validate();
  detail::require(n >= 1, "sample_feature_frequencies: n must be >= 1");
  detail::require(k >= 1, "sample_feature_frequencies: k must be >= 1");
  Eigen::MatrixXd out(n, k);
  for (Eigen::Index r = 0; r < n; ++r) {
    Engine eng(mix_seed(seed, static_cast<std::uint64_t>(first_row + r)));
    for (int c = 0; c < k; ++c) out(r, c) = detail::draw_frequency(density, eng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data distributions

enum class MarginalKind { standard_normal, uniform };

struct Marginal {
  MarginalKind kind = MarginalKind::standard_normal;
  double a = 0.0, b = 1.0;

  static Marginal standard_normal() { return {MarginalKind::standard_normal, 0.0, 1.0}; }
  static Marginal uniform(double a, double b) { return {MarginalKind::uniform, a, b}; }

  void validate() const {
    if (kind == MarginalKind::uniform)
      detail::require(std::isfinite(a) && std::isfinite(b) && a < b,
                      "uniform marginal needs a < b");
  }

  double quantile(double p) const {
    if (kind == MarginalKind::uniform) return a + (b - a) * p;
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
  }

  double cdf(double x) const {
    if (kind == MarginalKind::uniform) return std::clamp((x - a) / (b - a), 0.0, 1.0);
    return boost::math::cdf(boost::math::normal_distribution<double>(), x);
  }
};

enum class CopulaFamily { clayton, gumbel, frank };

inline std::string to_string(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::clayton: return "clayton";
    case CopulaFamily::gumbel: return "gumbel";
    case CopulaFamily::frank: return "frank";
  }
  return "?";
}

inline CopulaFamily parse_copula_family(const std::string& s) {
  if (s == "clayton") return CopulaFamily::clayton;
  if (s == "gumbel") return CopulaFamily::gumbel;
  if (s == "frank") return CopulaFamily::frank;
  throw InvalidArgument("unknown copula family '" + s + "'");
}

/// Closed-form Kendall tau for Clayton and Gumbel. Frank has no elementary
/// form and is not covered here.
inline double copula_kendall_tau(CopulaFamily f, double theta) {
  switch (f) {
    case CopulaFamily::clayton: return theta / (theta + 2.0);
    case CopulaFamily::gumbel: return 1.0 - 1.0 / theta;
    case CopulaFamily::frank: break;
  }
  throw Unsupported("copula_kendall_tau: no closed form for frank");
}

enum class DataKind { gaussian_cov, copula, uniform_box };

/// uniform_box means independent coordinates drawn from `marginals`
/// (uniform or standard normal, one entry per coordinate).
struct DataDistributionSpec {
  DataKind kind = DataKind::uniform_box;
  int dimension = 1;
  Eigen::MatrixXd covariance;      // gaussian_cov
  CopulaFamily family = CopulaFamily::clayton;
  double theta = 1.0;              // copula
  std::vector<Marginal> marginals;  // copula, uniform_box

  static DataDistributionSpec gaussian(const Eigen::MatrixXd& sigma) {
    DataDistributionSpec s;
    s.kind = DataKind::gaussian_cov;
    s.dimension = static_cast<int>(sigma.rows());
    s.covariance = sigma;
    return s;
  }

  static DataDistributionSpec box(int d, Marginal m) {
    DataDistributionSpec s;
    s.kind = DataKind::uniform_box;
    s.dimension = d;
    s.marginals.assign(static_cast<std::size_t>(d), m);
    return s;
  }

  static DataDistributionSpec archimedean(int d, CopulaFamily f, double theta, Marginal m) {
    DataDistributionSpec s;
    s.kind = DataKind::copula;
    s.dimension = d;
    s.family = f;
    s.theta = theta;
    s.marginals.assign(static_cast<std::size_t>(d), m);
    return s;
  }

  void validate() const {
    detail::require(dimension >= 1, "data distribution: dimension must be >= 1");
    switch (kind) {
      case DataKind::gaussian_cov:
        detail::require(covariance.rows() == dimension && covariance.cols() == dimension,
                        "data distribution: covariance must be d x d");
        detail::require(covariance.isApprox(covariance.transpose(), 1e-12),
                        "data distribution: covariance must be symmetric");
        break;
      case DataKind::copula:
        switch (family) {
          case CopulaFamily::clayton:
            detail::require(theta > 0, "clayton copula needs theta > 0");
            break;
          case CopulaFamily::gumbel:
            detail::require(theta >= 1, "gumbel copula needs theta >= 1");
            break;
          case CopulaFamily::frank:
            detail::require(theta > 0, "frank copula needs theta > 0");
            break;
        }
        [[fallthrough]];
      case DataKind::uniform_box:
        detail::require(marginals.size() == static_cast<std::size_t>(dimension),
                        "data distribution: need one marginal per coordinate");
        for (const auto& m : marginals) m.validate();
        break;
    }
  }
};

inline Eigen::MatrixXd sigma_identity(int d) { return Eigen::MatrixXd::Identity(d, d); }

/// 0.8 I + 0.2 * 1 1^T
inline Eigen::MatrixXd sigma_equicorrelated(int d) {
  return 0.8 * Eigen::MatrixXd::Identity(d, d) + 0.2 * Eigen::MatrixXd::Ones(d, d);
}

/// Block diagonal with the 3x3 block [[1,-.2,.4],[-.2,1,-.8],[.4,-.8,1]].
inline Eigen::MatrixXd sigma_mixed(int d) {
  detail::require(d % 3 == 0, "mixed covariance needs d divisible by 3");
  Eigen::Matrix3d B;
  B << 1.0, -0.2, 0.4, -0.2, 1.0, -0.8, 0.4, -0.8, 1.0;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < d; k += 3) S.block<3, 3>(k, k) = B;
  return S;
}

/// Lower Cholesky factor L with L L^T = sigma.
inline Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw DecompositionFailure("covariance is not positive definite");
  return llt.matrixL();
}

namespace detail {

inline double clamp_open_unit(double u) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(u, lo, hi);
}

// Positive stable variable with Laplace transform exp(-s^alpha), 0<alpha<=1
// (Kanter / Chambers-Mallows-Stuck).
inline double positive_stable(double alpha, Engine& eng) {
  if (alpha == 1.0) return 1.0;
  std::uniform_real_distribution<double> unif(0.0, std::numbers::pi);
  std::exponential_distribution<double> expo(1.0);
  double th = 0.0;
  do th = unif(eng); while (th == 0.0);
  const double w = expo(eng);
  return std::sin(alpha * th) / std::pow(std::sin(th), 1.0 / alpha) *
         std::pow(std::sin((1.0 - alpha) * th) / w, (1.0 - alpha) / alpha);
}

// Logarithmic series P(V=k) = -p^k / (k log(1-p)), Kemp's LK sampler.
inline double logarithmic_series(double p, Engine& eng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double v = unif(eng);
  if (v >= p) return 1.0;
  double u = 0.0;
  do u = unif(eng); while (u == 0.0);
  const double q = -std::expm1(std::log1p(-p) * u);
  if (v <= q * q) return std::floor(1.0 + std::log(v) / std::log(q));
  return v <= q ? 2.0 : 1.0;
}

inline Eigen::RowVectorXd copula_row(CopulaFamily f, double theta, int d, Engine& eng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::RowVectorXd u(d);
  switch (f) {
    case CopulaFamily::clayton: {
      const double v = std::gamma_distribution<double>(1.0 / theta, 1.0)(eng);
      for (int i = 0; i < d; ++i) u(i) = std::pow(1.0 + expo(eng) / v, -1.0 / theta);
      break;
    }
    case CopulaFamily::gumbel: {
      const double alpha = 1.0 / theta;
      const double v = positive_stable(alpha, eng);
      for (int i = 0; i < d; ++i) u(i) = std::exp(-std::pow(expo(eng) / v, alpha));
      break;
    }
    case CopulaFamily::frank: {
      // psi(s) = -(1/theta) log(1 - (1 - e^-theta) e^-s)
      const double p = -std::expm1(-theta);
      const double v = logarithmic_series(p, eng);
      for (int i = 0; i < d; ++i) {
        const double s = expo(eng) / v;
        u(i) = -std::log1p(-p * std::exp(-s)) / theta;
      }
      break;
    }
  }
  for (int i = 0; i < d; ++i) u(i) = clamp_open_unit(u(i));
  return u;
}

}  // namespace detail

/// M i.i.d. draws from `spec`; labels are left empty.
inline SampleSet sample_data(const DataDistributionSpec& spec, Eigen::Index M,
                             std::uint64_t seed) {
  spec.validate();
  detail::require(M >= 1, "sample_data: M must be >= 1");
  const int d = spec.dimension;
  SampleSet out;
  out.points.resize(M, d);
  Engine eng = make_stream(seed, "data");
  switch (spec.kind) {
    case DataKind::gaussian_cov: {
      const Eigen::MatrixXd L = cholesky_factor(spec.covariance);
      std::normal_distribution<double> nd(0.0, 1.0);
      Eigen::VectorXd z(d);
      for (Eigen::Index j = 0; j < M; ++j) {
        for (int i = 0; i < d; ++i) z(i) = nd(eng);
        out.points.row(j) = (L * z).transpose();
      }
      break;
    }
    case DataKind::copula:
      for (Eigen::Index j = 0; j < M; ++j) {
        const Eigen::RowVectorXd u = detail::copula_row(spec.family, spec.theta, d, eng);
        for (int i = 0; i < d; ++i)
          out.points(j, i) = spec.marginals[static_cast<std::size_t>(i)].quantile(u(i));
      }
      break;
    case DataKind::uniform_box: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (Eigen::Index j = 0; j < M; ++j)
        for (int i = 0; i < d; ++i)
          out.points(j, i) = spec.marginals[static_cast<std::size_t>(i)].quantile(
              detail::clamp_open_unit(unif(eng)));
      break;
    }
  }
  return out;
}

/// Adds i.i.d. N(0, sd^2) noise from the "noise" stream.
inline void add_label_noise(Eigen::VectorXd& labels, double sd, std::uint64_t seed) {
  detail::require(sd >= 0, "noise level must be >= 0");
  if (sd == 0) return;
  Engine eng = make_stream(seed, "noise");
  std::normal_distribution<double> nd(0.0, sd);
  for (Eigen::Index j = 0; j < labels.size(); ++j) labels(j) += nd(eng);
}

// ---------------------------------------------------------------------------
// Test functions

enum class TestFunction { fT1, fT2, fT3, friedmann9, tensor2d };

inline TestFunction parse_test_function(const std::string& s) {
  if (s == "fT1") return TestFunction::fT1;
  if (s == "fT2" || s == "ishigami") return TestFunction::fT2;
  if (s == "fT3" || s == "friedmann") return TestFunction::fT3;
  if (s == "friedmann9") return TestFunction::friedmann9;
  if (s == "tensor2d") return TestFunction::tensor2d;
  throw InvalidArgument("unknown test function '" + s + "'");
}

inline std::string to_string(TestFunction f) {
  switch (f) {
    case TestFunction::fT1: return "fT1";
    case TestFunction::fT2: return "fT2";
    case TestFunction::fT3: return "fT3";
    case TestFunction::friedmann9: return "friedmann9";
    case TestFunction::tensor2d: return "tensor2d";
  }
  return "?";
}

inline int min_dimension(TestFunction f) {
  switch (f) {
    case TestFunction::fT1: return 4;
    case TestFunction::fT2: return 3;
    case TestFunction::fT3: return 5;
    case TestFunction::friedmann9: return 9;
    case TestFunction::tensor2d: return 2;
  }
  return 1;
}

/// Point evaluation; x is indexed zero-based (x[0] is x1).
template <class Vec>
double evaluate_test_function(TestFunction f, const Vec& x) {
  using std::sin;
  constexpr double pi = std::numbers::pi;
  switch (f) {
    case TestFunction::fT1:
      return x[3] * x[3] + x[1] * x[2] + x[0] * x[1] + x[3];
    case TestFunction::fT2: {
      const double s2 = sin(x[1]);
      return sin(x[0]) + 7.0 * s2 * s2 + 0.1 * std::pow(x[2], 4) * sin(x[0]);
    }
    case TestFunction::fT3:
      return 10.0 * sin(pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
             10.0 * x[3] + 5.0 * x[4];
    case TestFunction::friedmann9:
      return 10.0 * sin(0.1 * pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
             10.0 * x[3] + 5.0 * x[4];
    case TestFunction::tensor2d: {
      const double a = 1.0 + x[0] * x[0];
      return std::abs(x[0]) / (a * a) * std::max(1.0 - std::abs(x[1]), 0.0);
    }
  }
  return 0.0;
}

inline Eigen::VectorXd evaluate_test_function(TestFunction f, const Eigen::MatrixXd& X) {
  detail::require(X.cols() >= min_dimension(f),
                  to_string(f) + " needs dimension >= " + std::to_string(min_dimension(f)));
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index j = 0; j < X.rows(); ++j) {
    const Eigen::RowVectorXd row = X.row(j);
    y(j) = evaluate_test_function(f, row);
  }
  return y;
}

inline void label(SampleSet& s, TestFunction f) {
  s.labels = evaluate_test_function(f, s.points);
}

/// Default marginals: N(0,1) for fT1, U[-pi,pi] for fT2, U[0,1] for fT3.
inline Marginal default_marginal(TestFunction f) {
  switch (f) {
    case TestFunction::fT2: return Marginal::uniform(-std::numbers::pi, std::numbers::pi);
    case TestFunction::fT3: return Marginal::uniform(0.0, 1.0);
    default: return Marginal::standard_normal();
  }
}

// ---------------------------------------------------------------------------
// Diagnostics used by tests and the acceptance harness.

namespace detail {

inline std::int64_t merge_count(std::vector<double>& v, std::vector<double>& tmp,
                                std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo),
            tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace detail

/// Kendall's tau-a via inversion counting (Knight), O(n log n); assumes no ties.
inline double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "kendall_tau: need >= 2 paired values");
  const std::size_t n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x(static_cast<Eigen::Index>(a)) < x(static_cast<Eigen::Index>(b));
  });
  std::vector<double> ys(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y(static_cast<Eigen::Index>(order[i]));
  const double discordant = static_cast<double>(detail::merge_count(ys, tmp, 0, n));
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return 1.0 - 2.0 * discordant / pairs;
}

/// One-sample Kolmogorov-Smirnov statistic sup |F_n - F|.
template <class Cdf>
double ks_statistic(Eigen::VectorXd sample, Cdf&& cdf) {
  detail::require(sample.size() >= 1, "ks_statistic: empty sample");
  std::sort(sample.data(), sample.data() + sample.size());
  const double n = static_cast<double>(sample.size());
  double dmax = 0.0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample(i));
    dmax = std::max({dmax, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return dmax;
}

}  // namespace anova_rff
