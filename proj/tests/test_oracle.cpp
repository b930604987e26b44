#include <gtest/gtest.h>

#include <numbers>

#include "anova_rff/oracle.hpp"
#include "anova_rff/sensitivity.hpp"

using namespace anova_rff;

namespace {

// Nested Monte Carlo squares a noisy conditional mean; the bias of a share is
// at most about 2^|u| / inner. Tolerance: three standard errors plus that.
double share_tol(const OracleShare& s, Eigen::Index inner) {
  return 3.0 * s.stderr_ + static_cast<double>(1 << s.u.size()) / static_cast<double>(inner);
}

void expect_share(const OracleResult& r, std::initializer_list<int> one_based, double expected, Eigen::Index inner) {
  const OracleShare* s = r.find(VarSubset::from_one_based(std::vector<int>(one_based)));
  ASSERT_NE(s, nullptr);
  EXPECT_NEAR(s->share, expected, share_tol(*s, inner)) << to_text(s->u) << " stderr " << s->stderr_;
}

// Term u's share of the prediction, straight from its feature block.
Eigen::VectorXcd block_prediction(const FeatureSet& F, const CoefficientVector& a, const VarSubset& u,
                                  const Eigen::MatrixXd& X) {
  FeatureSet only(F.dimension());
  only.set_group(u, F.group(u));
  return assemble_matrix(only, X).A * a.block(u);
}

}  // namespace

TEST(ExactTensor2, GaussianConstants) {
  const Tensor2Anova t = exact_anova_tensor2(Marginal::standard_normal());
  EXPECT_NEAR(t.f_empty(), 0.0792, 5e-4);
  EXPECT_NEAR(t.g1_mean, 0.2148, 5e-4);
  EXPECT_NEAR(t.g2_mean, 0.3687, 5e-4);
  EXPECT_LT(t.quadrature_error, 1e-8);
}

TEST(ExactTensor2, UniformConstants) {
  const Tensor2Anova t = exact_anova_tensor2(Marginal::uniform(-1, 1));
  EXPECT_NEAR(t.f_empty(), 0.125, 1e-6);
  EXPECT_NEAR(t.g1_mean, 0.25, 1e-6);
  EXPECT_NEAR(t.g2_mean, 0.5, 1e-6);
}

TEST(ExactTensor2, TermsHaveZeroMeansAndAreOrthogonal) {
  for (const Marginal& m : {Marginal::standard_normal(), Marginal::uniform(-1, 1)}) {
    const Tensor2Anova t = exact_anova_tensor2(m);
    const std::vector<double> k1{0.0}, k2{-1.0, 0.0, 1.0};
    EXPECT_NEAR(integrate_marginal([&](double x) { return t.f1(x); }, m, k1).value, 0.0, 1e-8);
    EXPECT_NEAR(integrate_marginal([&](double x) { return t.f2(x); }, m, k2).value, 0.0, 1e-8);
    // f12 integrates to zero in each coordinate separately: it factorizes.
    const double c1 = integrate_marginal([&](double x) { return tensor_g1(x) - t.g1_mean; }, m, k1).value;
    const double c2 = integrate_marginal([&](double x) { return tensor_g2(x) - t.g2_mean; }, m, k2).value;
    EXPECT_NEAR(c1, 0.0, 1e-8);
    EXPECT_NEAR(c2, 0.0, 1e-8);
    // <f1, f12> = g2bar * E[(g1 - g1bar)^2] * E[g2 - g2bar] = 0; <f1, f2> = 0 likewise.
    const double v1 = integrate_marginal([&](double x) { return t.f1(x) * t.f1(x); }, m, k1).value;
    EXPECT_NEAR(v1 / t.g2_mean * c2, 0.0, 1e-6);
    // Decomposition is exact pointwise.
    for (double x1 : {-1.3, 0.0, 0.4})
      for (double x2 : {-0.5, 0.2, 1.7})
        EXPECT_NEAR(t.f_empty() + t.f1(x1) + t.f2(x2) + t.f12(x1, x2), t.f(x1, x2), 1e-15);
  }
}

TEST(IntegrateMarginal, KnownMoments) {
  EXPECT_NEAR(integrate_marginal([](double x) { return x * x; }, Marginal::standard_normal()).value, 1.0, 1e-10);
  EXPECT_NEAR(integrate_marginal([](double x) { return x; }, Marginal::uniform(2, 4)).value, 3.0, 1e-12);
}

TEST(OracleSobol, FT1SharesOnlyOnItsTerms) {
  // Var = Var(x4^2 + x4) + Var(x2 x3) + Var(x1 x2) = 3 + 1 + 1.
  const Eigen::Index inner = 400;
  const OracleResult r = oracle_sobol_independent(
      TestFunction::fT1, DataDistributionSpec::box(4, Marginal::standard_normal()), 1, {4000, inner, 2});
  for (const auto& s : r.shares) {
    const auto one = s.u.to_one_based();
    double expected = 0.0;
    if (one == std::vector<int>{4}) expected = 0.6;
    if (one == std::vector<int>{1, 2} || one == std::vector<int>{2, 3}) expected = 0.2;
    EXPECT_NEAR(s.share, expected, share_tol(s, inner)) << to_text(s.u);
  }
}

TEST(OracleSobol, FT3MatchesQuadrature) {
  // Independent one-dimensional quadrature of each ANOVA term.
  const Eigen::Index inner = 400;
  const OracleResult r = oracle_sobol_independent(
      TestFunction::fT3, DataDistributionSpec::box(5, Marginal::uniform(0, 1)), 2, {6000, inner, 2});
  expect_share(r, {3}, 0.0933, inner);
  expect_share(r, {4}, 0.3498, inner);
  expect_share(r, {5}, 0.0874, inner);
  expect_share(r, {1, 2}, 0.0749, inner);
  expect_share(r, {1}, 0.1973, inner);
  expect_share(r, {2}, 0.1973, inner);
  expect_share(r, {3, 4}, 0.0, inner);
}

TEST(OracleSobol, IshigamiClosedForm) {
  const double a = 7.0, b = 0.1, pi4 = std::pow(std::numbers::pi, 4);
  const double V1 = 0.5 * std::pow(1 + b * pi4 / 5, 2);
  const double V2 = a * a / 8;
  const double V13 = b * b * pi4 * pi4 * 8.0 / 225.0;
  const double V = V1 + V2 + V13;
  const Eigen::Index inner = 400;
  const OracleResult r = oracle_sobol_independent(
      TestFunction::fT2, DataDistributionSpec::box(3, Marginal::uniform(-std::numbers::pi, std::numbers::pi)), 3,
      {6000, inner, 2});
  EXPECT_NEAR(r.variance, V, 0.05 * V);
  expect_share(r, {1}, V1 / V, inner);
  expect_share(r, {2}, V2 / V, inner);
  expect_share(r, {1, 3}, V13 / V, inner);
  expect_share(r, {3}, 0.0, inner);
  expect_share(r, {1, 2}, 0.0, inner);
}

TEST(OracleSobol, Friedmann9GaussianMatchesQuadrature) {
  const Eigen::Index inner = 400;
  OracleResult r = oracle_sobol_independent(
      TestFunction::friedmann9, DataDistributionSpec::box(9, Marginal::standard_normal()), 4, {3000, inner, 1});
  expect_share(r, {3}, 0.9005, inner);
  expect_share(r, {4}, 0.0750, inner);
  expect_share(r, {5}, 0.0188, inner);
  for (int i = 6; i <= 9; ++i) expect_share(r, {i}, 0.0, inner);
}

TEST(OracleSobol, DeterministicAndValidated) {
  const auto spec = DataDistributionSpec::box(3, Marginal::uniform(-std::numbers::pi, std::numbers::pi));
  const OracleResult a = oracle_sobol_independent(TestFunction::fT2, spec, 9, {50, 10, 2});
  const OracleResult b = oracle_sobol_independent(TestFunction::fT2, spec, 9, {50, 10, 2});
  ASSERT_EQ(a.shares.size(), 6u);
  for (std::size_t i = 0; i < a.shares.size(); ++i) EXPECT_EQ(a.shares[i].share, b.shares[i].share);
  EXPECT_THROW(oracle_sobol_independent(TestFunction::fT2, DataDistributionSpec::gaussian(sigma_equicorrelated(3)), 1),
               Unsupported);
  EXPECT_THROW(oracle_sobol_independent(TestFunction::fT3, spec, 1, {50, 10, 2}), InvalidArgument);
  EXPECT_THROW(oracle_sobol_independent(TestFunction::fT2, spec, 1, {1, 10, 2}), InvalidArgument);
  EXPECT_THROW(oracle_sobol_independent(TestFunction::fT2, spec, 1, {50, 10, 4}), InvalidArgument);
}

TEST(BruteForceMcTerms, MatchesFactorizedOnRandomTinyInstances) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Engine eng(seed);
    const int d = 3 + static_cast<int>(seed % 2);
    AnovaIndexSet U(d);
    U.insert(VarSubset{0, 1, 2});
    U.insert(VarSubset{static_cast<int>(seed % 3)});
    const FeatureSet F = draw_feature_set(U, 10, FeatureDensitySpec::gaussian_variance(1), nullptr, seed);
    const SampleSet S = sample_data(DataDistributionSpec::box(d, Marginal::standard_normal()),
                                    2 + static_cast<Eigen::Index>(seed % 9), seed);
    std::normal_distribution<double> nd;
    CoefficientVector a = CoefficientVector::zeros(F.layout());
    for (Eigen::Index k = 0; k < a.values.size(); ++k) a.values(k) = cplx(nd(eng), nd(eng));
    for (const auto& u : U)
      for (const auto& v : u.subsets()) {
        const Eigen::VectorXcd fast = mc_anova_term(F, a, S.points, u, v, S.points);
        const Eigen::VectorXcd slow = brute_force_mc_terms(F, a, S.points, u, v, S.points);
        ASSERT_LT((fast - slow).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, slow.cwiseAbs().maxCoeff()))
            << "seed " << seed << " " << to_text(u) << "/" << to_text(v);
      }
  }
}

TEST(BruteForceMcTerms, EmptyTermAndTelescoping) {
  AnovaIndexSet U(3);
  U.insert(VarSubset{0, 2});
  const FeatureSet F = draw_feature_set(U, 8, FeatureDensitySpec::gaussian_variance(1), nullptr, 5);
  const SampleSet S = sample_data(DataDistributionSpec::box(3, Marginal::standard_normal()), 6, 5);
  CoefficientVector a = CoefficientVector::zeros(F.layout());
  a.values.setConstant(cplx(0.3, -0.2));
  const VarSubset u{0, 2};
  const Eigen::VectorXcd g = block_prediction(F, a, u, S.points);
  const Eigen::VectorXcd e = brute_force_mc_terms(F, a, S.points, u, VarSubset{}, S.points);
  for (Eigen::Index p = 0; p < e.size(); ++p) EXPECT_NEAR(std::abs(e(p) - g.mean()), 0.0, 1e-12);
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(S.count());
  for (const auto& v : u.subsets()) sum += brute_force_mc_terms(F, a, S.points, u, v, S.points);
  EXPECT_LT((sum - g).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BruteForceMcTerms, SizeCaps) {
  const FeatureSet F = draw_feature_set(all_subsets_of_order(4, 1), 8, FeatureDensitySpec::gaussian_variance(1), nullptr, 1);
  const CoefficientVector a = CoefficientVector::zeros(F.layout());
  const Eigen::MatrixXd X11 = Eigen::MatrixXd::Zero(11, 4), X3 = Eigen::MatrixXd::Zero(3, 4);
  EXPECT_THROW(brute_force_mc_terms(F, a, X11, VarSubset{0}, VarSubset{}, X3), InvalidArgument);
  const FeatureSet G = draw_feature_set(all_subsets_of_order(4, 1), 12, FeatureDensitySpec::gaussian_variance(1), nullptr, 1);
  EXPECT_THROW(brute_force_mc_terms(G, CoefficientVector::zeros(G.layout()), X3, VarSubset{0}, VarSubset{}, X3),
               InvalidArgument);
  EXPECT_THROW(brute_force_mc_terms(F, a, X3, VarSubset{0, 1, 2, 3}, VarSubset{}, X3), InvalidArgument);
  EXPECT_THROW(brute_force_mc_terms(F, a, X3, VarSubset{0}, VarSubset{1}, X3), InvalidArgument);
}
