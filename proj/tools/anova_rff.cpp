// anova-rff: command line front end for data generation, ANOVA boosting,
// sparse fitting, sensitivity reports, oracles and full experiments.
//
// Every subcommand accepts --config FILE with key=value lines named like the
// long flags (without the dashes); flags given on the command line win.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anova_rff/anova_rff.hpp"

using namespace anova_rff;

namespace {

enum Exit { kOk = 0, kFailure = 1, kInvalidConfig = 2, kNumerical = 3 };

/// String-valued flags of one subcommand, merged with its config file.
class Flags {
 public:
  Flags(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_, "key=value file with defaults for these flags");
  }

  void add(const std::string& name, const std::string& help, const std::string& def = "") {
    defaults_[name] = def;
    app_->add_option("--" + name, given_[name], help + (def.empty() ? "" : " [" + def + "]"));
  }
  void flag(const std::string& name, const std::string& help) {
    defaults_[name] = "0";
    app_->add_flag("--" + name, bool_[name], help);
  }

  void resolve() {
    values_ = defaults_;
    if (!config_.empty()) {
      for (const auto& [k, v] : io::read_config(config_)) {
        if (!defaults_.count(k)) throw InvalidArgument("unknown config key '" + k + "'");
        values_[k] = v;
      }
    }
    for (const auto& [k, v] : given_)
      if (app_->get_option("--" + k)->count() > 0) values_[k] = v;
    for (const auto& [k, v] : bool_)
      if (app_->get_option("--" + k)->count() > 0) values_[k] = v ? "1" : "0";
  }

  const std::string& str(const std::string& k) const { return values_.at(k); }
  bool has(const std::string& k) const { return !values_.at(k).empty(); }
  double num(const std::string& k) const { return io::parse_double(values_.at(k), 0); }
  long long integer(const std::string& k) const {
    const double x = num(k);
    if (x != std::floor(x)) throw InvalidArgument("--" + k + " must be an integer");
    return static_cast<long long>(x);
  }
  bool on(const std::string& k) const {
    const auto& v = values_.at(k);
    return v == "1" || v == "true" || v == "yes";
  }
  std::string require(const std::string& k) const {
    if (values_.at(k).empty()) throw InvalidArgument("--" + k + " is required");
    return values_.at(k);
  }

  /// All resolved values, for embedding in outputs.
  io::Header header() const {
    io::Header h;
    for (const auto& [k, v] : values_)
      if (k != "config") h.emplace_back(k, v);
    return h;
  }

 private:
  CLI::App* app_;
  std::string config_;
  std::map<std::string, std::string> defaults_, given_, values_;
  std::map<std::string, bool> bool_;
};

template <class Write>
void emit(const std::string& path, Write&& w) {
  if (path.empty() || path == "-") {
    w(std::cout);
  } else {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidArgument("cannot write '" + path + "'");
    w(os);
  }
}

io::Header with_command(const std::string& cmd, io::Header h) {
  h.insert(h.begin(), {"command", cmd});
  return h;
}

ExperimentConfig experiment_from(const Flags& f, bool boosted_default = true) {
  ExperimentConfig c;
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : f.header())
    if (!v.empty()) kv[k] = v;
  kv.erase("out");
  kv.erase("dry-run");
  if (!kv.count("boosted")) kv["boosted"] = boosted_default ? "1" : "0";
  c.apply(kv);
  return c;
}

FeatureDensitySpec density_from(const Flags& f, int q) {
  const auto kind = parse_feature_density_kind(f.str("density"));
  FeatureDensitySpec s;
  if (kind == FeatureDensityKind::gaussian)
    s = FeatureDensitySpec::gaussian_variance(f.num("feature-variance") > 0 ? f.num("feature-variance") : 1.0 / q);
  else
    s = {kind, f.num("feature-scale") > 0 ? f.num("feature-scale") : 1.0, f.num("smoothness")};
  s.validate();
  return s;
}

void add_density_flags(Flags& f) {
  f.add("density", "feature density: gaussian | cauchy | sobolev-tensor", "gaussian");
  f.add("feature-variance", "gaussian feature variance (0: 1/q)", "0");
  f.add("feature-scale", "cauchy / sobolev-tensor scale", "1");
  f.add("smoothness", "sobolev-tensor smoothness s > 1/2", "1");
}

Eigen::Index budget(const Flags& f, Eigen::Index M) {
  if (f.has("N")) return static_cast<Eigen::Index>(f.integer("N"));
  return static_cast<Eigen::Index>(std::floor(f.num("N-mult") * static_cast<double>(M)));
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Flags& f) {
  std::map<std::string, std::string> kv{{"fn", f.str("fn")},        {"dist", f.str("dist")},
                                        {"sigma_model", f.str("sigma-model")},
                                        {"marginal", f.str("marginal")}, {"copula", f.str("copula")},
                                        {"theta", f.str("theta")},   {"M", f.str("M")},
                                        {"seed", f.str("seed")},     {"noise", f.str("noise")}};
  ExperimentConfig c;
  c.apply(kv);
  const TestFunction fn = parse_test_function(c.fn);
  c.d = f.has("d") ? static_cast<int>(f.integer("d"))
                   : (c.dist == "gauss-cov" ? std::max(9, min_dimension(fn)) : std::max(10, min_dimension(fn)));
  if (c.dist == "gauss-cov" && c.sigma_model == "mixed" && c.d % 3) c.d += 3 - c.d % 3;
  c.validate();
  SampleSet S = sample_data(c.distribution(), c.M, c.seed);
  label(S, fn);
  add_label_noise(S.labels, c.noise, c.seed);
  io::Header h = with_command("gen-data", f.header());
  for (auto& [k, v] : h)
    if (k == "d") v = std::to_string(c.d);
  emit(f.str("out"), [&](std::ostream& os) { io::write_dataset(os, S, h); });
  return kOk;
}

int cmd_boost(const Flags& f) {
  const SampleSet S = io::read_dataset(f.require("data"));
  BoostConfig bc;
  bc.q = static_cast<int>(f.integer("q"));
  bc.eps = f.num("eps");
  bc.N = budget(f, S.count());
  bc.lambda = f.num("lambda");
  bc.density = density_from(f, bc.q);
  bc.seed = static_cast<std::uint64_t>(f.integer("seed"));
  bc.M_val = static_cast<Eigen::Index>(f.integer("m-val"));
  const std::string order = f.str("order");
  if (order == "ascending") bc.order = RefineOrder::ascending;
  else if (order != "descending") throw InvalidArgument("--order must be descending or ascending");
  const std::string alg = f.str("alg");
  if (alg != "indep" && alg != "dep") throw InvalidArgument("--alg must be indep or dep");
  const BoostResult r = alg == "dep" ? boost_dependent(S, bc) : boost_independent(S, bc);
  const io::Header h = with_command("boost", f.header());
  for (const auto& d : r.trace.diagnostics) std::cerr << "warning: " << d << '\n';
  if (f.has("out")) io::write_index_set(f.str("out"), r.U, h);
  else std::cout << to_text(r.U) << '\n';
  if (f.has("trace")) emit(f.str("trace"), [&](std::ostream& os) { io::write_trace(os, r.trace, h); });
  if (f.has("features")) {
    emit(f.str("features"), [&](std::ostream& os) { os << io::to_json(r.features).dump(1) << '\n'; });
  }
  return kOk;
}

int cmd_fit(const Flags& f) {
  const SampleSet train = io::read_dataset(f.require("data"));
  const int d = train.dimension();
  const std::uint64_t seed = static_cast<std::uint64_t>(f.integer("seed"));
  const int q = static_cast<int>(f.integer("q"));
  AnovaIndexSet U = f.has("U") ? io::read_index_set(f.str("U"), d) : all_subsets_of_order(d, q);
  if (U.dimension() != d) throw InvalidArgument("index set dimension does not match the data");
  const FeatureSet features =
      draw_feature_set(U, budget(f, train.count()), density_from(f, static_cast<int>(U.max_order() ? U.max_order() : 1)),
                       nullptr, seed);
  const double lambda = f.num("lambda");
  io::Model m;
  m.features = features;
  m.meta = with_command("fit", f.header());
  std::vector<std::pair<std::string, double>> report;
  if (f.str("method") == "shrimp") {
    PruneSchedule ps;
    ps.p_keep = f.num("p-keep");
    const ShrimpResult r = fit_shrimp(features, train, lambda, seed, ps);
    m.a = r.a;
    report.emplace_back("val_mse", r.val_mse);
  } else if (f.str("method") == "harfe") {
    HtpConfig hc;
    hc.lambda = lambda;
    hc.s = f.integer("s");
    const HarfeResult r = fit_harfe(features, train, hc);
    for (const auto& d : r.diagnostics) std::cerr << "warning: " << d << '\n';
    m.a = r.a;
    report.emplace_back("train_mse", r.train_mse);
  } else {
    throw InvalidArgument("--method must be shrimp or harfe");
  }
  report.emplace_back("train_mse_full", mse(features, m.a, train));
  if (f.has("test")) report.emplace_back("test_mse", mse(features, m.a, io::read_dataset(f.str("test"))));
  Eigen::Index nnz = 0;
  for (Eigen::Index k = 0; k < m.a.values.size(); ++k) nnz += m.a.values(k) != cplx(0, 0);
  report.emplace_back("nnz", static_cast<double>(nnz));
  if (f.has("out")) io::write_model(f.str("out"), m);
  emit(f.str("report"), [&](std::ostream& os) {
    io::write_header(os, m.meta);
    os << "metric,value\n";
    for (const auto& [k, v] : report) os << k << ',' << io::fmt(v) << '\n';
  });
  return kOk;
}

int cmd_sensitivity(const Flags& f) {
  const io::Model m = io::read_model(f.require("model"));
  const SampleSet S = io::read_dataset(f.require("data"));
  const io::Header h = with_command("sensitivity", f.header());
  SensitivityReport rep;
  const FeatureMatrix F = assemble_matrix(m.features, S.points);
  if (f.str("alg") == "dep") {
    rep = sobol_indices_dependent(F, m.a, S.labels);
  } else if (f.str("alg") == "indep") {
    rep = sensitivity_independent(m.features, m.a, S, prune_to_anti_downward_closed(m.features.terms()));
  } else {
    throw InvalidArgument("--alg must be indep or dep");
  }
  emit(f.str("out"), [&](std::ostream& os) { io::write_sensitivity(os, rep, h); });
  if (f.has("penalty")) {
    const PenaltyBlocks P = build_penalty(F, m.features.terms());
    emit(f.str("penalty"), [&](std::ostream& os) { io::write_penalty(os, penalty_value(m.a, P), h); });
  }
  return kOk;
}

int cmd_oracle(const Flags& f) {
  const TestFunction fn = parse_test_function(f.str("fn"));
  const int d = f.has("d") ? static_cast<int>(f.integer("d")) : min_dimension(fn);
  ExperimentConfig c;
  c.fn = f.str("fn");
  c.d = d;
  c.marginal = f.str("marginal");
  const DataDistributionSpec spec = DataDistributionSpec::box(d, c.resolve_marginal());
  OracleOptions o;
  o.outer = static_cast<Eigen::Index>(f.integer("outer"));
  o.inner = static_cast<Eigen::Index>(f.integer("inner"));
  o.max_order = static_cast<int>(f.integer("max-order"));
  const OracleResult r = oracle_sobol_independent(fn, spec, static_cast<std::uint64_t>(f.integer("seed")), o);
  io::Header h = with_command("oracle", f.header());
  h.emplace_back("variance", io::fmt(r.variance));
  emit(f.str("out"), [&](std::ostream& os) { io::write_oracle(os, r, h); });
  return kOk;
}

int cmd_run(const Flags& f) {
  const ExperimentConfig c = experiment_from(f);
  c.validate();
  const io::Header h = with_command("run", c.header());
  if (f.on("dry-run")) {
    std::cout << "plan: " << c.repeats << " repeat(s) of " << c.fn << " d=" << c.d << " M=" << c.M
              << " N=" << c.N() << " q=" << c.q << " dist=" << c.dist << " method=" << c.method
              << (c.boosted ? " boosted (" + c.alg + ")" : " plain") << '\n';
    io::write_header(std::cout, h);
    return kOk;
  }
  const auto rows = run_experiment(c);
  emit(f.str("out"), [&](std::ostream& os) { write_results(os, rows, h); });
  for (const auto& r : rows)
    if (!r.error.empty()) std::cerr << "repeat " << r.repeat << " failed: " << r.error << '\n';
  return kOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<ResultRow> rows;
  std::vector<SensitivityReport> sens;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::istringstream probe(text);
    std::string line, first;
    while (std::getline(probe, line))
      if (!line.empty() && line[0] != '#') {
        first = line;
        break;
      }
    std::istringstream is(text);
    if (first.empty()) continue;
    if (first.rfind("u,s_var", 0) == 0) {
      sens.push_back(io::read_sensitivity(is));
    } else {
      auto r = read_results(is);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  emit(out, [&](std::ostream& os) {
    os << format_results_table(rows);
    for (auto& s : sens) {
      s.normalize();
      os << "\nu,normalized_s_var\n";
      for (const auto& e : s.entries)
        if (!e.u.empty()) os << io::subset_cell(e.u) << ',' << io::fmt(e.normalized_s_var) << '\n';
    }
  });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ANOVA-boosted sparse random Fourier feature regression"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "sample inputs and label them with a test function");
  Flags fgen(gen);
  fgen.add("fn", "fT1 | fT2 | fT3 | friedmann9 | tensor2d", "friedmann9");
  fgen.add("d", "dimension (default: 9 for gauss-cov, else 10)");
  fgen.add("dist", "box | gauss-cov | copula", "gauss-cov");
  fgen.add("sigma-model", "id | equi | mixed", "id");
  fgen.add("marginal", "default | normal | uniform01 | uniform-pi | uniform:a:b", "default");
  fgen.add("copula", "clayton | gumbel | frank", "clayton");
  fgen.add("theta", "copula parameter", "2");
  fgen.add("M", "number of samples", "500");
  fgen.add("seed", "master seed", "1");
  fgen.add("noise", "label noise standard deviation", "0");
  fgen.add("out", "output CSV (default stdout)");

  auto* boost = app.add_subcommand("boost", "find the ANOVA index set U");
  Flags fboost(boost);
  fboost.add("alg", "indep | dep", "indep");
  fboost.add("q", "maximal superposition order", "2");
  fboost.add("eps", "ANOVA threshold", "0.01");
  fboost.add("N-mult", "feature budget as a multiple of M", "5");
  fboost.add("N", "absolute feature budget (overrides --N-mult)");
  fboost.add("lambda", "regularization", "1e-6");
  fboost.add("data", "training CSV");
  fboost.add("seed", "master seed", "1");
  fboost.add("m-val", "variance evaluation points (0: all)", "0");
  fboost.add("order", "refinement order: descending | ascending", "descending");
  add_density_flags(fboost);
  fboost.add("out", "U as JSON (default: text on stdout)");
  fboost.add("trace", "per-round trace CSV");
  fboost.add("features", "final feature set JSON");

  auto* fit = app.add_subcommand("fit", "fit a sparse random feature model");
  Flags ffit(fit);
  ffit.add("method", "shrimp | harfe", "shrimp");
  ffit.add("U", "index set JSON (default: all order-q terms)");
  ffit.add("q", "order used when --U is absent", "2");
  ffit.add("data", "training CSV");
  ffit.add("test", "test CSV");
  ffit.add("lambda", "ridge parameter", "1e-6");
  ffit.add("s", "HARFE sparsity", "64");
  ffit.add("p-keep", "SHRIMP keep fraction per round", "0.5");
  ffit.add("N-mult", "feature budget as a multiple of M", "5");
  ffit.add("N", "absolute feature budget (overrides --N-mult)");
  ffit.add("seed", "master seed", "1");
  add_density_flags(ffit);
  ffit.add("out", "model JSON");
  ffit.add("report", "metrics CSV (default stdout)");

  auto* sens = app.add_subcommand("sensitivity", "sensitivity indices of a fitted model");
  Flags fsens(sens);
  fsens.add("model", "model JSON");
  fsens.add("data", "sample CSV");
  fsens.add("alg", "dep (Sobol indices) | indep (Monte-Carlo variances)", "dep");
  fsens.add("out", "report CSV (default stdout)");
  fsens.add("penalty", "per-block penalty CSV");

  auto* orc = app.add_subcommand("oracle", "nested Monte-Carlo Sobol shares for product inputs");
  Flags forc(orc);
  forc.add("fn", "test function", "fT3");
  forc.add("d", "dimension (default: active variables only)");
  forc.add("marginal", "default | normal | uniform01 | uniform-pi | uniform:a:b", "default");
  forc.add("outer", "outer samples", "200000");
  forc.add("inner", "inner samples", "2000");
  forc.add("max-order", "largest term order", "2");
  forc.add("seed", "seed", "1");
  forc.add("out", "CSV (default stdout)");

  auto* run = app.add_subcommand("run", "full experiment: repeats of data, boost, fit, test MSE");
  Flags frun(run);
  const ExperimentConfig defaults;
  const std::map<std::string, std::string> run_help{
      {"fn", "test function"},
      {"d", "dimension"},
      {"M", "training samples per repeat"},
      {"q", "maximal superposition order"},
      {"n_mult", "feature budget N = n_mult * M"},
      {"eps", "ANOVA threshold"},
      {"lambda_boost", "regularization inside boosting"},
      {"lambda_fit", "ridge parameter of the sparse fitter"},
      {"method", "shrimp | harfe"},
      {"boosted", "1: boost before fitting, 0: plain order-q features"},
      {"alg", "indep | dep"},
      {"repeats", "independent repeats"},
      {"seed", "master seed"},
      {"dist", "box | gauss-cov | copula"},
      {"marginal", "marginal for box and copula inputs"},
      {"sigma_model", "id | equi | mixed"},
      {"copula", "clayton | gumbel | frank"},
      {"theta", "copula parameter"},
      {"density", "gaussian | cauchy | sobolev-tensor"},
      {"feature_variance", "gaussian feature variance (0: 1/q)"},
      {"feature_scale", "cauchy / sobolev-tensor scale"},
      {"smoothness", "sobolev-tensor smoothness"},
      {"harfe_s", "HARFE sparsity (0: M/5)"},
      {"noise", "label noise standard deviation"},
      {"m_val", "variance evaluation points (0: all)"}};
  for (const auto& [k, v] : defaults.header()) {
    const auto h = run_help.find(k);
    frun.add(k, h == run_help.end() ? k : h->second, v);
  }
  frun.flag("dry-run", "print the resolved plan and exit");
  frun.add("out", "results CSV (default stdout)");

  auto* rep = app.add_subcommand("report", "summarize results / sensitivity CSVs");
  std::vector<std::string> rep_in;
  std::string rep_out;
  rep->add_option("inputs", rep_in, "CSV files");
  rep->add_option("--out", rep_out, "output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidConfig;
  }

  try {
    if (*gen) return fgen.resolve(), cmd_gen_data(fgen);
    if (*boost) return fboost.resolve(), cmd_boost(fboost);
    if (*fit) return ffit.resolve(), cmd_fit(ffit);
    if (*sens) return fsens.resolve(), cmd_sensitivity(fsens);
    if (*orc) return forc.resolve(), cmd_oracle(forc);
    if (*run) return frun.resolve(), cmd_run(frun);
    if (*rep) return cmd_report(rep_in, rep_out);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const InvalidState& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
