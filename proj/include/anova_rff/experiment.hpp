#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "anova_rff/boosting.hpp"
#include "anova_rff/errors.hpp"
#include "anova_rff/features.hpp"
#include "anova_rff/io.hpp"
#include "anova_rff/sampling.hpp"
#include "anova_rff/sparse_fit.hpp"

namespace anova_rff {

/// One experiment = `repeats` independent (train, test) draws, each fitted
/// with or without a boosting pass in front.
struct ExperimentConfig {
  std::string fn = "fT2";
  int d = 10;
  Eigen::Index M = 500;
  int q = 2;
  double n_mult = 5.0;  // N = n_mult * M
  double eps = 0.01;
  double lambda_boost = 1e-6;
  double lambda_fit = 1e-6;
  std::string method = "shrimp";  // shrimp | harfe
  bool boosted = true;
  std::string alg = "indep";      // indep | dep
  int repeats = 10;
  std::uint64_t seed = 1;
  std::string dist = "box";       // box | gauss-cov | copula
  std::string marginal = "default";  // default | normal | uniform01 | uniform-pi | uniform:a:b
  std::string sigma_model = "id";    // id | equi | mixed
  std::string copula = "clayton";
  double theta = 2.0;
  std::string density = "gaussian";
  double feature_variance = 0.0;  // 0: 1/q
  double feature_scale = 0.0;     // cauchy / sobolev scale; 0: 1
  double smoothness = 1.0;
  Eigen::Index harfe_s = 0;       // 0: M/5
  double noise = 0.0;
  Eigen::Index m_val = 0;

  Eigen::Index N() const { return static_cast<Eigen::Index>(std::floor(n_mult * static_cast<double>(M))); }

  void validate() const {
    (void)parse_test_function(fn);
    detail::require(d >= min_dimension(parse_test_function(fn)), "d too small for " + fn);
    detail::require(M >= 2, "M must be >= 2");
    detail::require(q >= 1 && q <= d, "q must satisfy 1 <= q <= d");
    detail::require(n_mult > 0 && N() >= 1, "N multiplier must be > 0");
    detail::require(eps >= 0, "eps must be >= 0");
    detail::require(lambda_boost >= 0 && lambda_fit >= 0, "lambda must be >= 0");
    detail::require(method == "shrimp" || method == "harfe", "method must be shrimp or harfe");
    detail::require(alg == "indep" || alg == "dep", "alg must be indep or dep");
    detail::require(repeats >= 1, "repeats must be >= 1");
    detail::require(noise >= 0, "noise must be >= 0");
    detail::require(harfe_s >= 0 && m_val >= 0, "s and m_val must be >= 0");
    (void)distribution();
    (void)feature_density();
  }

  Marginal resolve_marginal() const {
    if (marginal == "default") return default_marginal(parse_test_function(fn));
    if (marginal == "normal") return Marginal::standard_normal();
    if (marginal == "uniform01") return Marginal::uniform(0.0, 1.0);
    if (marginal == "uniform-pi") return Marginal::uniform(-std::numbers::pi, std::numbers::pi);
    if (marginal.rfind("uniform:", 0) == 0) {
      const auto parts = io::split(marginal, ':');
      detail::require(parts.size() == 3, "marginal must be uniform:a:b");
      return Marginal::uniform(io::parse_double(parts[1], 0), io::parse_double(parts[2], 0));
    }
    throw InvalidArgument("unknown marginal '" + marginal + "'");
  }

  DataDistributionSpec distribution() const {
    if (dist == "box") return DataDistributionSpec::box(d, resolve_marginal());
    if (dist == "gauss-cov") {
      if (sigma_model == "id") return DataDistributionSpec::gaussian(sigma_identity(d));
      if (sigma_model == "equi") return DataDistributionSpec::gaussian(sigma_equicorrelated(d));
      if (sigma_model == "mixed") return DataDistributionSpec::gaussian(sigma_mixed(d));
      throw InvalidArgument("unknown sigma model '" + sigma_model + "'");
    }
    if (dist == "copula") {
      auto s = DataDistributionSpec::archimedean(d, parse_copula_family(copula), theta, resolve_marginal());
      s.validate();
      return s;
    }
    throw InvalidArgument("unknown distribution '" + dist + "'");
  }

  FeatureDensitySpec feature_density() const {
    const auto k = parse_feature_density_kind(density);
    FeatureDensitySpec s;
    if (k == FeatureDensityKind::gaussian)
      s = FeatureDensitySpec::gaussian_variance(feature_variance > 0 ? feature_variance : 1.0 / q);
    else
      s = {k, feature_scale > 0 ? feature_scale : 1.0, smoothness};
    s.validate();
    return s;
  }

  io::Header header() const {
    return {{"fn", fn},
            {"d", std::to_string(d)},
            {"M", std::to_string(M)},
            {"q", std::to_string(q)},
            {"n_mult", io::fmt(n_mult)},
            {"eps", io::fmt(eps)},
            {"lambda_boost", io::fmt(lambda_boost)},
            {"lambda_fit", io::fmt(lambda_fit)},
            {"method", method},
            {"boosted", boosted ? "1" : "0"},
            {"alg", alg},
            {"repeats", std::to_string(repeats)},
            {"seed", std::to_string(seed)},
            {"dist", dist},
            {"marginal", marginal},
            {"sigma_model", sigma_model},
            {"copula", copula},
            {"theta", io::fmt(theta)},
            {"density", density},
            {"feature_variance", io::fmt(feature_variance)},
            {"feature_scale", io::fmt(feature_scale)},
            {"smoothness", io::fmt(smoothness)},
            {"harfe_s", std::to_string(harfe_s)},
            {"noise", io::fmt(noise)},
            {"m_val", std::to_string(m_val)}};
  }

  /// Overrides fields from key=value pairs (same names as header()).
  void apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
      auto num = [&] { return io::parse_double(v, 0); };
      auto integer = [&] {
        const double x = num();
        detail::require(x == std::floor(x), "'" + k + "' must be an integer");
        return static_cast<long long>(x);
      };
      if (k == "fn") fn = v;
      else if (k == "d") d = static_cast<int>(integer());
      else if (k == "M") M = integer();
      else if (k == "q") q = static_cast<int>(integer());
      else if (k == "n_mult" || k == "N-mult") n_mult = num();
      else if (k == "eps") eps = num();
      else if (k == "lambda_boost") lambda_boost = num();
      else if (k == "lambda_fit" || k == "lambda") lambda_fit = num();
      else if (k == "method") method = v;
      else if (k == "boosted") {
        if (v == "1" || v == "true" || v == "yes") boosted = true;
        else if (v == "0" || v == "false" || v == "no") boosted = false;
        else throw InvalidArgument("'boosted' must be 0 or 1");
      }
      else if (k == "alg") alg = v;
      else if (k == "repeats") repeats = static_cast<int>(integer());
      else if (k == "seed") seed = static_cast<std::uint64_t>(integer());
      else if (k == "dist") dist = v;
      else if (k == "marginal") marginal = v;
      else if (k == "sigma_model" || k == "sigma-model") sigma_model = v;
      else if (k == "copula") copula = v;
      else if (k == "theta") theta = num();
      else if (k == "density") density = v;
      else if (k == "feature_variance") feature_variance = num();
      else if (k == "feature_scale") feature_scale = num();
      else if (k == "smoothness") smoothness = num();
      else if (k == "harfe_s" || k == "s") harfe_s = integer();
      else if (k == "noise") noise = num();
      else if (k == "m_val") m_val = integer();
      else throw InvalidArgument("unknown config key '" + k + "'");
    }
  }
};

struct ResultRow {
  std::string fn;
  int d = 0, q = 0;
  Eigen::Index M = 0, N = 0;
  std::string dist, method;
  bool boosted = false;
  std::string repeat;  // index or "mean"
  double mse = 0.0;
  double elapsed_s = 0.0;
  std::uint64_t seed = 0;
  std::string error;   // empty on success
};

inline const char* results_columns() { return "fn,d,q,M,N,dist,method,boosted,repeat,mse,elapsed_s,seed"; }

inline std::uint64_t repeat_seed(std::uint64_t master, int r) {
  return mix_seed(master, "repeat", static_cast<std::uint64_t>(r));
}

/// One repeat: fresh train/test draw, optional boost, fit, test MSE.
inline ResultRow run_repeat(const ExperimentConfig& cfg, int r) {
  const auto t0 = std::chrono::steady_clock::now();
  ResultRow row;
  row.fn = cfg.fn;
  row.d = cfg.d;
  row.q = cfg.q;
  row.M = cfg.M;
  row.N = cfg.N();
  row.dist = cfg.dist;
  row.method = cfg.method;
  row.boosted = cfg.boosted;
  row.repeat = std::to_string(r);
  const std::uint64_t rs = repeat_seed(cfg.seed, r);
  row.seed = rs;
  try {
    const TestFunction fn = parse_test_function(cfg.fn);
    const DataDistributionSpec dist = cfg.distribution();
    SampleSet train = sample_data(dist, cfg.M, mix_seed(rs, "train"));
    SampleSet test = sample_data(dist, cfg.M, mix_seed(rs, "test"));
    label(train, fn);
    label(test, fn);
    add_label_noise(train.labels, cfg.noise, mix_seed(rs, "train-noise"));

    FeatureSet features;
    if (cfg.boosted) {
      BoostConfig bc;
      bc.q = cfg.q;
      bc.eps = cfg.eps;
      bc.N = cfg.N();
      bc.lambda = cfg.lambda_boost;
      bc.density = cfg.feature_density();
      bc.seed = mix_seed(rs, "boost");
      bc.M_val = cfg.m_val;
      features = (cfg.alg == "dep" ? boost_dependent(train, bc) : boost_independent(train, bc)).features;
    } else {
      features = draw_feature_set(all_subsets_of_order(cfg.d, cfg.q), cfg.N(), cfg.feature_density(),
                                  nullptr, mix_seed(rs, "plain"));
    }
    CoefficientVector a;
    if (cfg.method == "shrimp") {
      a = fit_shrimp(features, train, cfg.lambda_fit, mix_seed(rs, "split")).a;
    } else {
      HtpConfig hc;
      hc.lambda = cfg.lambda_fit;
      hc.s = std::min(features.total(), cfg.harfe_s > 0 ? cfg.harfe_s : std::max<Eigen::Index>(1, cfg.M / 5));
      a = fit_harfe(features, train, hc).a;
    }
    row.mse = mse(features, a, test);
  } catch (const std::exception& e) {
    row.mse = std::numeric_limits<double>::quiet_NaN();
    row.error = e.what();
  }
  row.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

inline ResultRow aggregate(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
  ResultRow m = rows.empty() ? ResultRow{} : rows.front();
  m.repeat = "mean";
  m.seed = cfg.seed;
  m.error.clear();
  double s = 0, t = 0;
  int n = 0;
  for (const auto& r : rows) {
    t += r.elapsed_s;
    if (std::isfinite(r.mse)) {
      s += r.mse;
      ++n;
    }
  }
  m.mse = n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
  m.elapsed_s = rows.empty() ? 0.0 : t / static_cast<double>(rows.size());
  return m;
}

/// Per-repeat rows followed by the mean row.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  for (int r = 0; r < cfg.repeats; ++r) rows.push_back(run_repeat(cfg, r));
  rows.push_back(aggregate(cfg, rows));
  return rows;
}

inline void write_results(std::ostream& os, const std::vector<ResultRow>& rows, const io::Header& h = {}) {
  io::write_header(os, h);
  for (const auto& r : rows)
    if (!r.error.empty()) os << "# error repeat " << r.repeat << ": " << r.error << '\n';
  os << results_columns() << '\n';
  for (const auto& r : rows)
    os << r.fn << ',' << r.d << ',' << r.q << ',' << r.M << ',' << r.N << ',' << r.dist << ',' << r.method
       << ',' << (r.boosted ? 1 : 0) << ',' << r.repeat << ',' << io::fmt(r.mse) << ','
       << io::fmt(r.elapsed_s) << ',' << r.seed << '\n';
}

inline std::vector<ResultRow> read_results(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  long ln = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != results_columns()) throw io::ParseError("unexpected results header", ln);
      header = true;
      continue;
    }
    const auto c = io::split(line, ',');
    if (c.size() != 12) throw io::ParseError("expected 12 columns", ln);
    ResultRow r;
    r.fn = c[0];
    r.d = static_cast<int>(io::parse_double(c[1], ln));
    r.q = static_cast<int>(io::parse_double(c[2], ln));
    r.M = static_cast<Eigen::Index>(io::parse_double(c[3], ln));
    r.N = static_cast<Eigen::Index>(io::parse_double(c[4], ln));
    r.dist = c[5];
    r.method = c[6];
    r.boosted = c[7] == "1";
    r.repeat = c[8];
    r.mse = c[9] == "nan" || c[9] == "-nan" ? std::numeric_limits<double>::quiet_NaN() : io::parse_double(c[9], ln);
    r.elapsed_s = io::parse_double(c[10], ln);
    try {
      r.seed = std::stoull(c[11]);
    } catch (const std::exception&) {
      throw io::ParseError("bad seed '" + c[11] + "'", ln);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Aligned text table: one line per (fn, d, q, M, N, dist, method, boosted)
/// with the mean and median test MSE over the repeat rows.
inline std::string format_results_table(const std::vector<ResultRow>& rows) {
  std::map<std::string, std::vector<double>> groups;
  std::vector<std::string> order;
  std::map<std::string, ResultRow> first;
  for (const auto& r : rows) {
    if (r.repeat == "mean") continue;
    std::ostringstream k;
    k << r.fn << '|' << r.d << '|' << r.q << '|' << r.M << '|' << r.N << '|' << r.dist << '|' << r.method
      << '|' << r.boosted;
    if (!groups.count(k.str())) {
      order.push_back(k.str());
      first[k.str()] = r;
    }
    auto& g = groups[k.str()];
    if (std::isfinite(r.mse)) g.push_back(r.mse);
  }
  std::ostringstream os;
  os << std::left << std::setw(11) << "fn" << std::setw(4) << "d" << std::setw(4) << "q" << std::setw(7) << "M"
     << std::setw(8) << "N" << std::setw(10) << "dist" << std::setw(8) << "method" << std::setw(8) << "boosted"
     << std::setw(5) << "n" << std::setw(14) << "mean_mse" << "median_mse\n";
  for (const auto& k : order) {
    auto v = groups[k];
    const ResultRow& r = first[k];
    double mean = std::numeric_limits<double>::quiet_NaN(), med = mean;
    if (!v.empty()) {
      mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      std::sort(v.begin(), v.end());
      med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    }
    std::ostringstream m1, m2;
    m1 << std::setprecision(6) << mean;
    m2 << std::setprecision(6) << med;
    os << std::left << std::setw(11) << r.fn << std::setw(4) << r.d << std::setw(4) << r.q << std::setw(7) << r.M
       << std::setw(8) << r.N << std::setw(10) << r.dist << std::setw(8) << r.method << std::setw(8)
       << (r.boosted ? "yes" : "no") << std::setw(5) << v.size() << std::setw(14) << m1.str() << m2.str() << '\n';
  }
  return os.str();
}

}  // namespace anova_rff
