#include <gtest/gtest.h>

#include <numbers>

#include "anova_rff/features.hpp"

using namespace anova_rff;

namespace {

const FeatureDensitySpec kGauss = FeatureDensitySpec::gaussian_variance(0.5);

AnovaIndexSet set1(int d, std::initializer_list<std::vector<int>> one_based) {
  AnovaIndexSet U(d);
  for (const auto& m : one_based) U.insert(VarSubset::from_one_based(m));
  return U;
}

CoefficientVector random_coefficients(const BlockLayout& layout, std::uint64_t seed) {
  Engine eng(seed);
  std::normal_distribution<double> nd;
  CoefficientVector a = CoefficientVector::zeros(layout);
  for (Eigen::Index k = 0; k < a.values.size(); ++k) a.values(k) = cplx(nd(eng), nd(eng));
  return a;
}

}  // namespace

TEST(DrawFeatureSet, SplitsBudgetAndRespectsSupport) {
  const FeatureSet F = draw_feature_set(set1(4, {{1, 2}, {3}}), 100, kGauss, nullptr, 1);
  EXPECT_EQ(F.group_size(VarSubset::from_one_based({1, 2})), 50);
  EXPECT_EQ(F.group_size(VarSubset::from_one_based({3})), 50);
  EXPECT_EQ(F.total(), 100);
  for (Eigen::Index k = 0; k < F.total(); ++k) {
    const Eigen::VectorXd om = F.full_frequency(k);
    if (k < 50) {  // {3} sorts before {1,2}
      EXPECT_NE(om(2), 0.0);
      EXPECT_EQ(om(0), 0.0);
      EXPECT_EQ(om(1), 0.0);
    } else {
      EXPECT_NE(om(0), 0.0);
      EXPECT_NE(om(1), 0.0);
      EXPECT_EQ(om(2), 0.0);
    }
    EXPECT_EQ(om(3), 0.0);
  }
}

TEST(DrawFeatureSet, FloorRuleDiscardsRemainder) {
  const AnovaIndexSet U = all_subsets_of_order(7, 3);
  const FeatureSet F = draw_feature_set(U, 2500, kGauss, nullptr, 3);
  for (const auto& u : U) EXPECT_EQ(F.group_size(u), 71);
  EXPECT_EQ(F.total(), 35 * 71);
}

TEST(DrawFeatureSet, EmptyTermHoldsOneConstantFeature) {
  const FeatureSet F = draw_feature_set(all_subsets_up_to_order(3, 1), 40, kGauss, nullptr, 3);
  EXPECT_EQ(F.group_size(VarSubset{}), 1);
  EXPECT_EQ(F.group(VarSubset{}).cols(), 0);
  EXPECT_EQ(F.group_size(VarSubset{1}), 10);
  EXPECT_EQ(F.total(), 31);
}

TEST(DrawFeatureSet, TopUpKeepsExistingRows) {
  const AnovaIndexSet U3 = set1(4, {{3}});
  const FeatureSet old = draw_feature_set(U3, 40, kGauss, nullptr, 5);
  const FeatureSet grown = draw_feature_set(U3, 50, kGauss, &old, 5);
  const VarSubset u = VarSubset::from_one_based({3});
  ASSERT_EQ(grown.group_size(u), 50);
  EXPECT_EQ(grown.group(u).topRows(40), old.group(u));
  // Top-ups use the same per-row streams as a fresh draw.
  EXPECT_EQ(grown, draw_feature_set(U3, 50, kGauss, nullptr, 5));
  // Shrinking keeps a prefix.
  const FeatureSet shrunk = draw_feature_set(U3, 30, kGauss, &grown, 5);
  EXPECT_EQ(shrunk.group(u), old.group(u).topRows(30));
}

TEST(DrawFeatureSet, TopUpOnlyDrawsMissingRows) {
  // A pre-existing group that could never come from the sampler proves it was kept.
  FeatureSet old(3);
  old.set_group(VarSubset{2}, Eigen::MatrixXd::Constant(40, 1, 123.0));
  const FeatureSet grown = draw_feature_set(set1(3, {{3}, {1}}), 100, kGauss, &old, 9);
  EXPECT_TRUE((grown.group(VarSubset{2}).topRows(40).array() == 123.0).all());
  EXPECT_TRUE((grown.group(VarSubset{2}).bottomRows(10).array() != 123.0).all());
}

TEST(DrawFeatureSet, Errors) {
  EXPECT_THROW(draw_feature_set(AnovaIndexSet(3), 10, kGauss, nullptr, 1), InvalidArgument);
  EXPECT_THROW(draw_feature_set(all_subsets_of_order(4, 2), 5, kGauss, nullptr, 1), InvalidArgument);
  FeatureSet other(5);
  EXPECT_THROW(draw_feature_set(all_subsets_of_order(4, 1), 8, kGauss, &other, 1), InvalidArgument);
}

TEST(FeatureSet, RejectsZeroAndMisshapenFrequencies) {
  FeatureSet F(3);
  EXPECT_THROW(F.set_group(VarSubset{0, 1}, Eigen::MatrixXd::Ones(2, 1)), InvalidArgument);
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(2, 2);
  z(1, 0) = 0.0;
  EXPECT_THROW(F.set_group(VarSubset{0, 1}, z), InvalidArgument);
  EXPECT_THROW(F.set_group(VarSubset{3}, Eigen::MatrixXd::Ones(2, 1)), InvalidArgument);
}

TEST(AssembleMatrix, Examples) {
  FeatureSet F(2);
  F.set_group(VarSubset{}, {});
  Eigen::MatrixXd w(1, 1);
  w << 1.0;
  F.set_group(VarSubset{0}, w);
  Eigen::MatrixXd X(1, 2);
  X << std::numbers::pi, 0.0;
  const FeatureMatrix A = assemble_matrix(F, X);
  ASSERT_EQ(A.cols(), 2);
  EXPECT_EQ(A.A(0, 0), cplx(1.0, 0.0));
  EXPECT_NEAR(std::abs(A.A(0, 1) - cplx(-1.0, 0.0)), 0.0, 1e-15);
  EXPECT_THROW(assemble_matrix(F, Eigen::MatrixXd::Zero(1, 3)), InvalidArgument);
}

TEST(AssembleMatrix, UnitModulusOnesColumnAndCanonicalBlocks) {
  const FeatureSet F = draw_feature_set(all_subsets_up_to_order(4, 2), 110, kGauss, nullptr, 2);
  const SampleSet S = sample_data(DataDistributionSpec::box(4, Marginal::standard_normal()), 30, 2);
  const FeatureMatrix A = assemble_matrix(F, S);
  EXPECT_LT((A.A.cwiseAbs().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_TRUE((A.block(VarSubset{}).array() == cplx(1, 0)).all());
  const auto& blocks = A.layout.blocks();
  for (std::size_t i = 1; i < blocks.size(); ++i) EXPECT_LT(blocks[i - 1].u, blocks[i].u);
  EXPECT_EQ(blocks.front().u, VarSubset{});
  // Deterministic.
  EXPECT_EQ(assemble_matrix(F, S).A, A.A);
  // Entry check against the full frequency vector.
  for (Eigen::Index k = 0; k < A.cols(); k += 7) {
    const double t = S.points.row(4).dot(F.full_frequency(k));
    EXPECT_NEAR(std::abs(A.A(4, k) - std::polar(1.0, t)), 0.0, 1e-12);
  }
}

TEST(Predict, Examples) {
  const FeatureSet F = draw_feature_set(all_subsets_up_to_order(3, 2), 70, kGauss, nullptr, 4);
  const SampleSet S = sample_data(DataDistributionSpec::box(3, Marginal::uniform(0, 1)), 12, 4);
  const BlockLayout L = F.layout();
  EXPECT_EQ(predict(F, CoefficientVector::zeros(L), S.points), Eigen::VectorXd::Zero(12));

  FeatureSet C(3);
  C.set_group(VarSubset{}, {});
  CoefficientVector c = CoefficientVector::zeros(C.layout());
  c.values(0) = cplx(2.5, 0.0);
  EXPECT_TRUE(predict(C, c, S.points).isApproxToConstant(2.5));
}

TEST(Predict, MatchesDefinitionLevelSum) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const FeatureSet F = draw_feature_set(all_subsets_up_to_order(4, 2), 20, kGauss, nullptr, seed);
    const SampleSet S = sample_data(DataDistributionSpec::box(4, Marginal::standard_normal()), 20, seed);
    const CoefficientVector a = random_coefficients(F.layout(), seed);
    const Eigen::VectorXd y = predict(F, a, S.points);
    const Eigen::VectorXd yA = (assemble_matrix(F, S).A * a.values).real();
    for (Eigen::Index j = 0; j < S.count(); ++j) {
      cplx s = 0;
      for (Eigen::Index k = 0; k < F.total(); ++k)
        s += a.values(k) * std::exp(cplx(0, S.points.row(j).dot(F.full_frequency(k))));
      EXPECT_NEAR(y(j), s.real(), 1e-10);
      EXPECT_NEAR(yA(j), s.real(), 1e-10);
    }
  }
}

TEST(Predict, LayoutMismatchRejected) {
  const FeatureSet F = draw_feature_set(all_subsets_of_order(3, 1), 30, kGauss, nullptr, 4);
  const FeatureSet G = draw_feature_set(all_subsets_of_order(3, 1), 60, kGauss, nullptr, 4);
  EXPECT_THROW(predict(F, CoefficientVector::zeros(G.layout()), Eigen::MatrixXd::Zero(2, 3)), InvalidArgument);
}
