#include <gtest/gtest.h>

#include <sstream>

#include "anova_rff/experiment.hpp"

using namespace anova_rff;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.fn = "fT2";
  c.d = 4;
  c.M = 60;
  c.n_mult = 2;
  c.repeats = 3;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(RunExperiment, RowCountAndAggregate) {
  ExperimentConfig c = small_config();
  const auto rows = run_experiment(c);
  ASSERT_EQ(rows.size(), 4u);
  double s = 0;
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(rows[static_cast<std::size_t>(r)].repeat, std::to_string(r));
    EXPECT_TRUE(rows[static_cast<std::size_t>(r)].error.empty()) << rows[static_cast<std::size_t>(r)].error;
    EXPECT_TRUE(std::isfinite(rows[static_cast<std::size_t>(r)].mse));
    s += rows[static_cast<std::size_t>(r)].mse;
  }
  EXPECT_EQ(rows.back().repeat, "mean");
  EXPECT_NEAR(rows.back().mse, s / 3, 1e-12 * s);
  EXPECT_EQ(rows[0].N, 120);
}

TEST(RunExperiment, DeterministicAndRepeatsDiffer) {
  ExperimentConfig c = small_config();
  c.method = "harfe";
  c.repeats = 2;
  const auto a = run_experiment(c), b = run_experiment(c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mse, b[i].mse);
    EXPECT_EQ(a[i].seed, b[i].seed);
  }
  EXPECT_NE(a[0].seed, a[1].seed);
  EXPECT_NE(a[0].mse, a[1].mse);
}

TEST(RunExperiment, PlainAndDependentPaths) {
  ExperimentConfig c = small_config();
  c.repeats = 1;
  c.boosted = false;
  EXPECT_TRUE(run_experiment(c)[0].error.empty());
  c.boosted = true;
  c.alg = "dep";
  c.lambda_boost = 1.0;
  c.dist = "gauss-cov";
  c.sigma_model = "equi";
  c.fn = "fT1";
  const auto rows = run_experiment(c);
  EXPECT_TRUE(rows[0].error.empty()) << rows[0].error;
}

TEST(RunExperiment, StageFailureIsRecordedAndRunContinues) {
  ExperimentConfig c = small_config();
  c.alg = "dep";
  c.lambda_boost = 0.0;  // the dependent pass needs lambda > 0
  const auto rows = run_experiment(c);
  ASSERT_EQ(rows.size(), 4u);
  for (int r = 0; r < 3; ++r) {
    EXPECT_FALSE(rows[static_cast<std::size_t>(r)].error.empty());
    EXPECT_TRUE(std::isnan(rows[static_cast<std::size_t>(r)].mse));
  }
  EXPECT_TRUE(std::isnan(rows.back().mse));
  std::stringstream ss;
  write_results(ss, rows);
  EXPECT_NE(ss.str().find("# error repeat 0: "), std::string::npos);
}

TEST(ExperimentConfig, ValidationAndApply) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.apply({{"fn", "fT3"}, {"d", "6"}, {"M", "80"}, {"lambda", "0.5"}, {"boosted", "no"}, {"s", "7"}});
  EXPECT_EQ(c.fn, "fT3");
  EXPECT_EQ(c.d, 6);
  EXPECT_EQ(c.M, 80);
  EXPECT_EQ(c.lambda_fit, 0.5);
  EXPECT_FALSE(c.boosted);
  EXPECT_EQ(c.harfe_s, 7);
  EXPECT_THROW(c.apply({{"bogus", "1"}}), InvalidArgument);
  EXPECT_THROW(c.apply({{"M", "2.5"}}), InvalidArgument);
  EXPECT_THROW(c.apply({{"boosted", "ture"}}), InvalidArgument);
  EXPECT_THROW(c.apply({{"theta", "x"}}), InvalidArgument);

  auto bad = [](std::map<std::string, std::string> kv) {
    ExperimentConfig e;
    e.apply(kv);
    EXPECT_THROW(e.validate(), InvalidArgument) << kv.begin()->first;
  };
  bad({{"M", "-5"}});
  bad({{"repeats", "0"}});
  bad({{"d", "2"}});
  bad({{"method", "lasso"}});
  bad({{"dist", "weird"}});
  bad({{"marginal", "uniform:1"}});
  bad({{"q", "11"}});
}

TEST(ExperimentConfig, HeaderRoundTrips) {
  ExperimentConfig c = small_config();
  c.method = "harfe";
  c.theta = 3.5;
  c.dist = "copula";
  c.copula = "gumbel";
  ExperimentConfig back;
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : c.header()) kv[k] = v;
  back.apply(kv);
  EXPECT_EQ(back.header(), c.header());
  EXPECT_NO_THROW(back.validate());
  EXPECT_EQ(back.distribution().kind, DataKind::copula);
}

TEST(Results, CsvRoundTripAndTable) {
  ExperimentConfig c = small_config();
  c.repeats = 2;
  const auto rows = run_experiment(c);
  std::stringstream ss;
  write_results(ss, rows, c.header());
  const auto back = read_results(ss);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].mse, rows[i].mse);
    EXPECT_EQ(back[i].seed, rows[i].seed);
    EXPECT_EQ(back[i].repeat, rows[i].repeat);
  }
  const std::string t = format_results_table(back);
  EXPECT_NE(t.find("median_mse"), std::string::npos);
  EXPECT_NE(t.find("fT2"), std::string::npos);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 2);

  std::stringstream bad("fn,d\n");
  EXPECT_THROW(read_results(bad), io::ParseError);
  std::stringstream short_row(std::string(results_columns()) + "\nfT2,3\n");
  EXPECT_THROW(read_results(short_row), io::ParseError);
}

TEST(Results, TableMedianOverRepeats) {
  std::vector<ResultRow> rows(4);
  const double m[] = {1.0, 5.0, 2.0, 100.0};
  for (int i = 0; i < 4; ++i) {
    rows[static_cast<std::size_t>(i)].fn = "fT2";
    rows[static_cast<std::size_t>(i)].repeat = std::to_string(i);
    rows[static_cast<std::size_t>(i)].mse = m[i];
  }
  const std::string t = format_results_table(rows);
  EXPECT_NE(t.find("27"), std::string::npos);   // mean
  EXPECT_NE(t.find(" 3.5") , std::string::npos);  // median
}
