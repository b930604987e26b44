#include <gtest/gtest.h>

#include <numbers>

#include "anova_rff/sparse_fit.hpp"

using namespace anova_rff;

namespace {

// One-dimensional DFT instance: points 2*pi*j/M and frequencies +-1..+-N/2,
// so the feature columns are orthogonal with squared norm M. Real labels
// sum_k c_k cos(k x) are realized exactly by the pairs (k, -k) with c_k / 2.
struct DftInstance {
  FeatureSet F{1};
  SampleSet S;
};

DftInstance dft_instance(Eigen::Index M, Eigen::Index half, const std::vector<std::pair<int, double>>& cosines) {
  DftInstance I;
  Eigen::MatrixXd w(2 * half, 1);
  for (Eigen::Index k = 0; k < half; ++k) {
    w(k, 0) = static_cast<double>(k + 1);
    w(half + k, 0) = -static_cast<double>(k + 1);
  }
  I.F.set_group(VarSubset{0}, w);
  I.S.points.resize(M, 1);
  for (Eigen::Index j = 0; j < M; ++j) I.S.points(j, 0) = 2 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(M);
  I.S.labels = Eigen::VectorXd::Zero(M);
  for (const auto& [k, c] : cosines) I.S.labels += c * (k * I.S.points.col(0)).array().cos().matrix();
  return I;
}

// 50 random features where columns 0 (constant), 1 and 2 (a frequency and its
// negation) realize f = 0.7 + 2.4 cos(<omega, x>) exactly.
struct Planted {
  FeatureSet F{3};
  SampleSet train, val;
  std::vector<Eigen::Index> cols{0, 1, 2};
};

Planted planted_instance() {
  Planted P;
  const FeatureSet R = draw_feature_set(all_subsets_up_to_order(3, 1), 65, FeatureDensitySpec::gaussian_variance(0.5), nullptr, 12);
  Eigen::MatrixXd g0 = R.group(VarSubset{0}).topRows(17);
  g0.row(1) = -g0.row(0);
  P.F.set_group(VarSubset{}, {});
  P.F.set_group(VarSubset{0}, g0);
  P.F.set_group(VarSubset{1}, R.group(VarSubset{1}).topRows(16));
  P.F.set_group(VarSubset{2}, R.group(VarSubset{2}).topRows(16));
  const double om = g0(0, 0);
  auto make = [&](Eigen::Index M, std::uint64_t seed) {
    SampleSet S = sample_data(DataDistributionSpec::box(3, Marginal::standard_normal()), M, seed);
    S.labels = (0.7 + 2.4 * (om * S.points.col(0)).array().cos()).matrix();
    return S;
  };
  P.train = make(200, 1);
  P.val = make(60, 2);
  return P;
}

Eigen::Index nnz(const CoefficientVector& a) {
  return (a.values.array() != cplx(0, 0)).count();
}

}  // namespace

TEST(Mse, Examples) {
  const FeatureSet F = draw_feature_set(all_subsets_of_order(2, 1), 20, FeatureDensitySpec::gaussian_variance(0.5), nullptr, 1);
  SampleSet S = sample_data(DataDistributionSpec::box(2, Marginal::uniform(0, 1)), 15, 3);
  S.labels = Eigen::VectorXd::LinSpaced(15, -1, 2);
  EXPECT_NEAR(mse(F, CoefficientVector::zeros(F.layout()), S), S.labels.squaredNorm() / 15.0, 1e-15);

  // Two-pass naive computation.
  Engine eng(4);
  std::normal_distribution<double> nd;
  CoefficientVector a = CoefficientVector::zeros(F.layout());
  for (Eigen::Index k = 0; k < a.values.size(); ++k) a.values(k) = cplx(nd(eng), nd(eng));
  double acc = 0;
  for (Eigen::Index j = 0; j < S.count(); ++j) {
    double pred = 0;
    for (Eigen::Index k = 0; k < F.total(); ++k)
      pred += (a.values(k) * std::exp(cplx(0, S.points.row(j).dot(F.full_frequency(k))))).real();
    acc += (S.labels(j) - pred) * (S.labels(j) - pred);
  }
  EXPECT_NEAR(mse(F, a, S), acc / 15.0, 1e-12);

  // A model evaluated against its own predictions.
  SampleSet T = S;
  T.labels = predict(F, a, S.points);
  EXPECT_LT(mse(F, a, T), 1e-16 * T.labels.squaredNorm());

  SampleSet empty;
  EXPECT_THROW(mse(F, a, empty), InvalidArgument);
}

TEST(Shrimp, PlantedModelReachesThreeFeatures) {
  const Planted P = planted_instance();
  PruneSchedule sch;
  sch.min_survivors = 3;
  const ShrimpResult r = fit_shrimp(P.F, P.train, P.val, 1e-10, sch);
  ASSERT_EQ(P.F.total(), 50);
  ASSERT_EQ(r.path.back().survivors, 3);
  EXPECT_EQ(std::count(r.kept.begin(), r.kept.end(), true), 3);
  for (Eigen::Index c : P.cols) EXPECT_TRUE(r.kept[static_cast<std::size_t>(c)]);
  EXPECT_LE(r.path.back().val_mse, 1e-6);
  EXPECT_LE(r.val_mse, 1e-6);
  EXPECT_LE(nnz(r.a), 50);
}

TEST(Shrimp, PathInvariants) {
  SampleSet S = sample_data(DataDistributionSpec::box(4, Marginal::uniform(-1, 1)), 120, 5);
  label(S, TestFunction::fT1);
  const FeatureSet F = draw_feature_set(all_subsets_up_to_order(4, 2), 200, FeatureDensitySpec::gaussian_variance(0.5), nullptr, 5);
  const auto [tr, va] = split_samples(S, 0.8, 5);
  EXPECT_EQ(tr.count(), 96);
  EXPECT_EQ(va.count(), 24);
  const ShrimpResult r = fit_shrimp(F, tr, va, 1e-6);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < r.path.size(); ++i) {
    if (i > 0) {
      EXPECT_LT(r.path[i].survivors, r.path[i - 1].survivors);
    }
    EXPECT_TRUE(std::isfinite(r.path[i].train_mse));
    best = std::min(best, r.path[i].val_mse);
    found = found || r.path[i].survivors == static_cast<Eigen::Index>(std::count(r.kept.begin(), r.kept.end(), true));
  }
  EXPECT_EQ(r.val_mse, best);
  EXPECT_TRUE(found);
  EXPECT_EQ(r.path.front().survivors, F.total());
  EXPECT_GE(r.path.back().survivors, 4);
  EXPECT_NEAR(mse(F, r.a, va), r.val_mse, 1e-12);
  for (std::size_t k = 0; k < r.kept.size(); ++k) {
    if (!r.kept[k]) {
      EXPECT_EQ(r.a.values(static_cast<Eigen::Index>(k)), cplx(0, 0));
    }
  }
}

TEST(Shrimp, SeededSplitAndErrors) {
  SampleSet S = sample_data(DataDistributionSpec::box(2, Marginal::uniform(0, 1)), 30, 1);
  S.labels = S.points.col(0) + S.points.col(1);
  const auto a = split_samples(S, 0.8, 3), b = split_samples(S, 0.8, 3), c = split_samples(S, 0.8, 4);
  EXPECT_EQ(a.first.points, b.first.points);
  EXPECT_NE(a.first.points, c.first.points);
  EXPECT_THROW(split_samples(S, 1.0, 1), InvalidArgument);
  const FeatureSet F = draw_feature_set(all_subsets_of_order(2, 1), 10, FeatureDensitySpec::gaussian_variance(0.5), nullptr, 1);
  EXPECT_THROW(fit_shrimp(F, S, SampleSet{}, 1e-6), InvalidArgument);
  PruneSchedule bad;
  bad.p_keep = 1.0;
  EXPECT_THROW(fit_shrimp(F, S, S, 1e-6, bad), InvalidArgument);
  EXPECT_EQ(fit_shrimp(F, S, 0.1, 7).path.size(), fit_shrimp(F, S, 0.1, 7).path.size());
}

TEST(Harfe, OrthogonalColumnsRecoverInOneStep) {
  // Columns: +1..+10 then -1..-10.
  const DftInstance I = dft_instance(64, 10, {{3, 1.5}, {8, -0.75}});
  HtpConfig cfg;
  cfg.s = 4;
  cfg.eta = 1.0 / 64.0;  // unit step once the columns are scaled to unit norm
  cfg.lambda = 0.0;
  cfg.max_iterations = 1;
  const HarfeResult r = fit_harfe(I.F, I.S, cfg);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.support, (std::vector<Eigen::Index>{2, 7, 12, 17}));
  EXPECT_LT(r.train_mse, 1e-24);
  EXPECT_NEAR(std::abs(r.a.values(2) - cplx(0.75, 0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(r.a.values(12) - cplx(0.75, 0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(r.a.values(7) - cplx(-0.375, 0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(r.a.values(17) - cplx(-0.375, 0)), 0.0, 1e-12);
}

TEST(Harfe, ConvergesOnStableSupportAndSatisfiesNormalEquations) {
  const Planted P = planted_instance();
  HtpConfig cfg;
  cfg.s = 6;
  cfg.lambda = 1e-6;
  const HarfeResult r = fit_harfe(P.F, P.train, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_LE(static_cast<Eigen::Index>(r.support.size()), cfg.s);
  EXPECT_LE(nnz(r.a), cfg.s);
  // Restricted normal equations: (A_S^* A_S + lambda I) a_S = A_S^* f.
  const FeatureMatrix F = assemble_matrix(P.F, P.train);
  Eigen::MatrixXcd AS(F.rows(), static_cast<Eigen::Index>(r.support.size()));
  Eigen::VectorXcd aS(AS.cols());
  for (std::size_t j = 0; j < r.support.size(); ++j) {
    AS.col(static_cast<Eigen::Index>(j)) = F.A.col(r.support[j]);
    aS(static_cast<Eigen::Index>(j)) = r.a.values(r.support[j]);
  }
  const Eigen::VectorXcd rhs = AS.adjoint() * P.train.labels.cast<cplx>();
  const Eigen::VectorXcd lhs = AS.adjoint() * (AS * aS) + cfg.lambda * aS;
  EXPECT_LE((lhs - rhs).norm(), 1e-8 * rhs.norm());
}

TEST(Harfe, ZeroLabelsAndNonStabilization) {
  Planted P = planted_instance();
  SampleSet Z = P.train;
  Z.labels.setZero();
  HtpConfig cfg;
  cfg.s = 5;
  const HarfeResult z = fit_harfe(P.F, Z, cfg);
  EXPECT_EQ(nnz(z.a), 0);
  EXPECT_EQ(z.train_mse, 0.0);

  cfg.max_iterations = 1;
  const HarfeResult one = fit_harfe(P.F, P.train, cfg);
  EXPECT_FALSE(one.converged);
  ASSERT_EQ(one.diagnostics.size(), 1u);
  EXPECT_EQ(one.iterations, 1);
}

TEST(Harfe, Errors) {
  const Planted P = planted_instance();
  HtpConfig cfg;
  cfg.s = 51;
  EXPECT_THROW(fit_harfe(P.F, P.train, cfg), InvalidArgument);
  cfg.s = 0;
  EXPECT_THROW(fit_harfe(P.F, P.train, cfg), InvalidArgument);
  cfg.s = 3;
  cfg.lambda = -1;
  EXPECT_THROW(fit_harfe(P.F, P.train, cfg), InvalidArgument);
  EXPECT_THROW(fit_harfe(P.F, SampleSet{}, HtpConfig{}), InvalidArgument);
}
