#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "anova_rff/boosting.hpp"
#include "anova_rff/errors.hpp"
#include "anova_rff/features.hpp"
#include "anova_rff/index_sets.hpp"
#include "anova_rff/oracle.hpp"
#include "anova_rff/sampling.hpp"
#include "anova_rff/sensitivity.hpp"
#include "anova_rff/solvers.hpp"

namespace anova_rff::io {

using json = nlohmann::json;

class ParseError : public InvalidArgument {
 public:
  ParseError(const std::string& what, long line)
      : InvalidArgument(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// Text that round-trips a double.
inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// "# key=value" header lines, in the given order.
using Header = std::vector<std::pair<std::string, std::string>>;

inline void write_header(std::ostream& os, const Header& h) {
  for (const auto& [k, v] : h) os << "# " << k << '=' << v << '\n';
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(s);
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, long line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ParseError("bad number '" + s + "'", line);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "'", line);
  }
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Index sets

inline json to_json(const AnovaIndexSet& U) {
  json arr = json::array();
  for (const auto& u : U) arr.push_back(u.to_one_based());
  return arr;
}

inline AnovaIndexSet index_set_from_json(int dimension, const json& j) {
  if (!j.is_array()) throw ParseError("index set must be a JSON array of arrays", 0);
  AnovaIndexSet U(dimension);
  for (const auto& t : j) {
    if (!t.is_array()) throw ParseError("index set term must be an array", 0);
    U.insert(VarSubset::from_one_based(t.get<std::vector<int>>()));
  }
  return U;
}

/// {"dimension": d, "U": [[...], ...]}
inline void write_index_set(const std::string& path, const AnovaIndexSet& U, const Header& meta = {}) {
  json j;
  j["dimension"] = U.dimension();
  j["U"] = to_json(U);
  if (!meta.empty()) {
    json m = json::object();
    for (const auto& [k, v] : meta) m[k] = v;
    j["meta"] = m;
  }
  open_out(path) << j.dump(1) << '\n';
}

/// Accepts either the object form above or a bare array (dimension required then).
inline AnovaIndexSet read_index_set(const std::string& path, int dimension_hint = 0) {
  json j;
  try {
    j = json::parse(open_in(path));
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
  if (j.is_object()) return index_set_from_json(j.at("dimension").get<int>(), j.at("U"));
  if (dimension_hint < 1) throw ParseError("bare index set array needs a dimension", 0);
  return index_set_from_json(dimension_hint, j);
}

// ---------------------------------------------------------------------------
// Feature sets, coefficients, models

inline json to_json(const FeatureSet& F) {
  json groups = json::array();
  for (const auto& [u, w] : F.groups()) {
    json om = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
      om.push_back(row);
    }
    groups.push_back({{"u", u.to_one_based()}, {"omegas", om}});
  }
  return {{"dimension", F.dimension()}, {"groups", groups}};
}

inline FeatureSet feature_set_from_json(const json& j) {
  FeatureSet F(j.at("dimension").get<int>());
  for (const auto& g : j.at("groups")) {
    const VarSubset u = VarSubset::from_one_based(g.at("u").get<std::vector<int>>());
    const auto& om = g.at("omegas");
    Eigen::MatrixXd w(static_cast<Eigen::Index>(om.size()), static_cast<Eigen::Index>(u.size()));
    for (std::size_t r = 0; r < om.size(); ++r) {
      if (om[r].size() != u.size()) throw ParseError("frequency width does not match |u|", 0);
      for (std::size_t c = 0; c < u.size(); ++c)
        w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = om[r][c].get<double>();
    }
    F.set_group(u, std::move(w));
  }
  return F;
}

inline json to_json(const CoefficientVector& a) {
  json blocks = json::array();
  for (const auto& b : a.layout.blocks()) {
    std::vector<double> re, im;
    for (Eigen::Index k = 0; k < b.size; ++k) {
      re.push_back(a.values(b.offset + k).real());
      im.push_back(a.values(b.offset + k).imag());
    }
    blocks.push_back({{"u", b.u.to_one_based()}, {"re", re}, {"im", im}});
  }
  return blocks;
}

inline CoefficientVector coefficients_from_json(const json& j, const BlockLayout& layout) {
  CoefficientVector a = CoefficientVector::zeros(layout);
  if (j.size() != layout.size()) throw ParseError("coefficient blocks do not match features", 0);
  for (const auto& blk : j) {
    const VarSubset u = VarSubset::from_one_based(blk.at("u").get<std::vector<int>>());
    const Block& b = layout.at(u);
    const auto re = blk.at("re").get<std::vector<double>>();
    const auto im = blk.at("im").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(re.size()) != b.size || re.size() != im.size())
      throw ParseError("coefficient block " + to_text(u) + " has the wrong length", 0);
    for (Eigen::Index k = 0; k < b.size; ++k)
      a.values(b.offset + k) = cplx(re[static_cast<std::size_t>(k)], im[static_cast<std::size_t>(k)]);
  }
  return a;
}

struct Model {
  FeatureSet features;
  CoefficientVector a;
  Header meta;
};

inline void write_model(const std::string& path, const Model& m) {
  json meta = json::object();
  for (const auto& [k, v] : m.meta) meta[k] = v;
  json j{{"features", to_json(m.features)}, {"coefficients", to_json(m.a)}, {"meta", meta}};
  open_out(path) << j.dump(1) << '\n';
}

inline Model read_model(const std::string& path) {
  json j;
  try {
    j = json::parse(open_in(path));
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
  Model m;
  m.features = feature_set_from_json(j.at("features"));
  m.a = coefficients_from_json(j.at("coefficients"), m.features.layout());
  if (j.contains("meta"))
    for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it)
      m.meta.emplace_back(it.key(), it.value().is_string() ? it.value().get<std::string>() : it.value().dump());
  return m;
}

// ---------------------------------------------------------------------------
// Datasets

inline void write_dataset(std::ostream& os, const SampleSet& S, const Header& h = {}) {
  write_header(os, h);
  for (int i = 0; i < S.dimension(); ++i) os << 'x' << (i + 1) << ',';
  os << "y\n";
  for (Eigen::Index j = 0; j < S.count(); ++j) {
    for (int i = 0; i < S.dimension(); ++i) os << fmt(S.points(j, i)) << ',';
    os << fmt(S.labelled() ? S.labels(j) : 0.0) << '\n';
  }
}

inline void write_dataset(const std::string& path, const SampleSet& S, const Header& h = {}) {
  auto os = open_out(path);
  write_dataset(os, S, h);
}

inline SampleSet read_dataset(std::istream& in, Header* header = nullptr) {
  std::string line;
  long ln = 0;
  int d = -1;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header) {
        const auto body = line.substr(line.find_first_not_of("# "));
        const auto eq = body.find('=');
        if (eq != std::string::npos) header->emplace_back(body.substr(0, eq), body.substr(eq + 1));
      }
      continue;
    }
    const auto cells = split(line, ',');
    if (d < 0) {
      if (cells.size() < 2 || cells.back() != "y") throw ParseError("header must be x1,...,xd,y", ln);
      for (std::size_t i = 0; i + 1 < cells.size(); ++i)
        if (cells[i] != "x" + std::to_string(i + 1)) throw ParseError("header must be x1,...,xd,y", ln);
      d = static_cast<int>(cells.size()) - 1;
      continue;
    }
    if (static_cast<int>(cells.size()) != d + 1)
      throw ParseError("expected " + std::to_string(d + 1) + " columns", ln);
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_double(c, ln));
    rows.push_back(std::move(r));
  }
  if (d < 0) throw ParseError("missing header", ln);
  SampleSet S;
  S.points.resize(static_cast<Eigen::Index>(rows.size()), d);
  S.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (int i = 0; i < d; ++i) S.points(static_cast<Eigen::Index>(j), i) = rows[j][static_cast<std::size_t>(i)];
    S.labels(static_cast<Eigen::Index>(j)) = rows[j][static_cast<std::size_t>(d)];
  }
  return S;
}

inline SampleSet read_dataset(const std::string& path, Header* header = nullptr) {
  auto in = open_in(path);
  return read_dataset(in, header);
}

// ---------------------------------------------------------------------------
// Reports

/// Space separated, one-based; "{}" for the empty set.
inline std::string subset_cell(const VarSubset& u) {
  if (u.empty()) return "{}";
  std::string s;
  for (int i : u.to_one_based()) {
    if (!s.empty()) s += ' ';
    s += std::to_string(i);
  }
  return s;
}

inline VarSubset parse_subset_cell(const std::string& cell, long line) {
  if (cell == "{}" || cell.empty()) return {};
  std::vector<int> m;
  for (const auto& t : split(cell, ' ')) {
    if (t.empty()) continue;
    m.push_back(static_cast<int>(parse_double(t, line)));
  }
  return VarSubset::from_one_based(m);
}

inline void write_sensitivity(std::ostream& os, const SensitivityReport& r, const Header& h = {}) {
  write_header(os, h);
  os << "# variance=" << fmt(r.variance) << "\n# normalizer=" << fmt(r.normalizer) << '\n';
  os << "u,s_var,s_cor,s_total,normalized_s_var\n";
  for (const auto& e : r.entries)
    os << subset_cell(e.u) << ',' << fmt(e.s_var) << ',' << fmt(e.s_cor) << ',' << fmt(e.s_total)
       << ',' << fmt(e.normalized_s_var) << '\n';
}

inline SensitivityReport read_sensitivity(std::istream& in) {
  SensitivityReport r;
  std::string line;
  long ln = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != "u,s_var,s_cor,s_total,normalized_s_var")
        throw ParseError("unexpected sensitivity header", ln);
      seen_header = true;
      continue;
    }
    const auto c = split(line, ',');
    if (c.size() != 5) throw ParseError("expected 5 columns", ln);
    r.entries.push_back({parse_subset_cell(c[0], ln), parse_double(c[1], ln), parse_double(c[2], ln),
                         parse_double(c[3], ln), parse_double(c[4], ln)});
  }
  return r;
}

inline void write_trace(std::ostream& os, const BoostTrace& t, const Header& h = {}) {
  write_header(os, h);
  for (const auto& d : t.diagnostics) os << "# diagnostic=" << d << '\n';
  os << "round,u,s_var,s_cor,kept\n";
  for (const auto& r : t.rounds)
    for (const auto& e : r.terms)
      os << r.round << ',' << subset_cell(e.u) << ',' << fmt(e.s_var) << ',' << fmt(e.s_cor) << ','
         << (e.kept ? 1 : 0) << '\n';
}

inline void write_penalty(std::ostream& os, const PenaltyValues& p, const Header& h = {}) {
  write_header(os, h);
  os << "u,penalty\n";
  for (const auto& [u, v] : p.per_block) os << subset_cell(u) << ',' << fmt(v) << '\n';
}

inline void write_oracle(std::ostream& os, const OracleResult& r, const Header& h = {}) {
  write_header(os, h);
  os << "u,share,stderr\n";
  for (const auto& s : r.shares) os << subset_cell(s.u) << ',' << fmt(s.share) << ',' << fmt(s.stderr_) << '\n';
}

// ---------------------------------------------------------------------------
// key=value config files

/// Lines "key=value"; '#' starts a comment; blank lines ignored.
inline std::map<std::string, std::string> read_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  long ln = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++ln;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", ln);
    const std::string k = trim(line.substr(0, eq));
    if (k.empty()) throw ParseError("empty key", ln);
    out[k] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> read_config(const std::string& path) {
  auto in = open_in(path);
  return read_config(in);
}

}  // namespace anova_rff::io
