#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "anova_rff/errors.hpp"
#include "anova_rff/index_sets.hpp"
#include "anova_rff/rng.hpp"
#include "anova_rff/sampling.hpp"

namespace anova_rff {

using cplx = std::complex<double>;

/// Column range of one term u inside A or a.
struct Block {
  VarSubset u;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

/// Canonically ordered blocks covering [0, total).
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
    Eigen::Index off = 0;
    for (auto& b : blocks_) {
      detail::require(b.offset == off, "BlockLayout: blocks must be contiguous");
      off += b.size;
    }
    total_ = off;
  }

  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  Eigen::Index total() const noexcept { return total_; }
  std::size_t size() const noexcept { return blocks_.size(); }

  const Block* find(const VarSubset& u) const {
    auto it = std::lower_bound(blocks_.begin(), blocks_.end(), u,
                               [](const Block& b, const VarSubset& v) { return b.u < v; });
    return (it != blocks_.end() && it->u == u) ? &*it : nullptr;
  }

  const Block& at(const VarSubset& u) const {
    const Block* b = find(u);
    if (!b) throw InvalidArgument("no feature block for term " + to_text(u));
    return *b;
  }

  bool operator==(const BlockLayout& o) const {
    if (blocks_.size() != o.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (blocks_[i].u != o.blocks_[i].u || blocks_[i].size != o.blocks_[i].size) return false;
    return true;
  }

 private:
  std::vector<Block> blocks_;
  Eigen::Index total_ = 0;
};

/// ANOVA-truncated frequencies grouped by support. The group of u stores an
/// n_u x |u| matrix; the implied full vector is zero outside u. The empty
/// term holds a single constant feature (an n=1, 0-column matrix).
class FeatureSet {
 public:
  FeatureSet() = default;
  explicit FeatureSet(int dimension) : dimension_(dimension) {
    detail::require(dimension >= 1, "FeatureSet: dimension must be >= 1");
  }

  int dimension() const noexcept { return dimension_; }
  const std::map<VarSubset, Eigen::MatrixXd>& groups() const noexcept { return groups_; }

  void set_group(const VarSubset& u, Eigen::MatrixXd omegas) {
    detail::require(u.max_member() < dimension_, "FeatureSet: term exceeds dimension");
    if (u.empty()) {
      omegas.resize(1, 0);
    } else {
      detail::require(omegas.cols() == static_cast<Eigen::Index>(u.size()),
                      "FeatureSet: frequency width must equal |u|");
      detail::require((omegas.array() != 0.0).all(),
                      "FeatureSet: frequencies must be nonzero on their support");
      detail::require(omegas.allFinite(), "FeatureSet: non-finite frequency");
    }
    groups_[u] = std::move(omegas);
  }

  bool has_group(const VarSubset& u) const { return groups_.count(u) > 0; }
  const Eigen::MatrixXd& group(const VarSubset& u) const {
    auto it = groups_.find(u);
    if (it == groups_.end()) throw InvalidArgument("FeatureSet: no group " + to_text(u));
    return it->second;
  }
  Eigen::Index group_size(const VarSubset& u) const {
    auto it = groups_.find(u);
    return it == groups_.end() ? 0 : it->second.rows();
  }

  Eigen::Index total() const {
    Eigen::Index n = 0;
    for (const auto& [u, w] : groups_) n += w.rows();
    return n;
  }

  AnovaIndexSet terms() const {
    AnovaIndexSet U(dimension_);
    for (const auto& [u, w] : groups_) U.insert(u);
    return U;
  }

  BlockLayout layout() const {
    std::vector<Block> b;
    Eigen::Index off = 0;
    for (const auto& [u, w] : groups_) {
      b.push_back({u, off, w.rows()});
      off += w.rows();
    }
    return BlockLayout(std::move(b));
  }

  /// Full-length frequency vector of column k (zeros off the support).
  Eigen::VectorXd full_frequency(Eigen::Index k) const {
    for (const auto& [u, w] : groups_) {
      if (k < w.rows()) {
        Eigen::VectorXd om = Eigen::VectorXd::Zero(dimension_);
        for (std::size_t t = 0; t < u.size(); ++t)
          om(u.members()[t]) = w(k, static_cast<Eigen::Index>(t));
        return om;
      }
      k -= w.rows();
    }
    throw InvalidArgument("FeatureSet: column index out of range");
  }

  bool operator==(const FeatureSet& o) const {
    if (dimension_ != o.dimension_ || groups_.size() != o.groups_.size()) return false;
    for (auto a = groups_.begin(), b = o.groups_.begin(); a != groups_.end(); ++a, ++b)
      if (a->first != b->first || a->second != b->second) return false;
    return true;
  }

 private:
  int dimension_ = 0;
  std::map<VarSubset, Eigen::MatrixXd> groups_;
};

/// Seed of the frequency stream of term u; row r of u is drawn from
/// mix_seed(feature_stream_seed(seed, u), r).
inline std::uint64_t feature_stream_seed(std::uint64_t seed, const VarSubset& u) {
  return mix_seed(seed, "features:" + to_text(u));
}

/// n = floor(N_total/|U|) features per term. Rows already present in
/// `existing` for a surviving term are kept (truncated to a prefix if n
/// shrank) and only the missing rows are drawn.
inline FeatureSet draw_feature_set(const AnovaIndexSet& U, Eigen::Index N_total,
                                   const FeatureDensitySpec& density,
                                   const FeatureSet* existing, std::uint64_t seed) {
  detail::require(!U.empty(), "draw_feature_set: U must be nonempty");
  detail::require(N_total >= static_cast<Eigen::Index>(U.size()),
                  "draw_feature_set: N_total must be >= |U|");
  density.validate();
  if (existing)
    detail::require(existing->dimension() == U.dimension(),
                    "draw_feature_set: existing feature set has another dimension");
  const Eigen::Index n = N_total / static_cast<Eigen::Index>(U.size());
  FeatureSet out(U.dimension());
  for (const auto& u : U) {
    if (u.empty()) {
      out.set_group(u, Eigen::MatrixXd(1, 0));
      continue;
    }
    const int k = static_cast<int>(u.size());
    Eigen::MatrixXd w(n, k);
    Eigen::Index have = 0;
    if (existing && existing->has_group(u)) {
      const Eigen::MatrixXd& old = existing->group(u);
      have = std::min(n, old.rows());
      w.topRows(have) = old.topRows(have);
    }
    if (have < n)
      w.bottomRows(n - have) =
          sample_feature_frequencies(density, k, n - have, feature_stream_seed(seed, u), have);
    out.set_group(u, std::move(w));
  }
  return out;
}

/// Complex M x N matrix of e^{i<omega_u, x_u>}, column blocks in canonical order.
struct FeatureMatrix {
  Eigen::MatrixXcd A;
  BlockLayout layout;

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }
  auto block(const VarSubset& u) const {
    const Block& b = layout.at(u);
    return A.middleCols(b.offset, b.size);
  }
};

/// Coefficient vector a, blocked like the feature set it belongs to.
struct CoefficientVector {
  Eigen::VectorXcd values;
  BlockLayout layout;

  auto block(const VarSubset& u) const {
    const Block& b = layout.at(u);
    return values.segment(b.offset, b.size);
  }

  static CoefficientVector zeros(const BlockLayout& layout) {
    return {Eigen::VectorXcd::Zero(layout.total()), layout};
  }
};

/// Phases X_u * omega_u^T for one group (M x n_u).
inline Eigen::MatrixXd group_phases(const VarSubset& u, const Eigen::MatrixXd& omegas,
                                    const Eigen::MatrixXd& X) {
  if (u.empty()) return Eigen::MatrixXd::Zero(X.rows(), 1);
  Eigen::MatrixXd Xu(X.rows(), static_cast<Eigen::Index>(u.size()));
  for (std::size_t t = 0; t < u.size(); ++t)
    Xu.col(static_cast<Eigen::Index>(t)) = X.col(u.members()[t]);
  return Xu * omegas.transpose();
}

inline FeatureMatrix assemble_matrix(const FeatureSet& features, const Eigen::MatrixXd& X) {
  detail::require(X.cols() == features.dimension(),
                  "assemble_matrix: sample dimension does not match features");
  FeatureMatrix F;
  F.layout = features.layout();
  F.A.resize(X.rows(), F.layout.total());
  for (const auto& b : F.layout.blocks()) {
    const Eigen::MatrixXd ph = group_phases(b.u, features.group(b.u), X);
    F.A.middleCols(b.offset, b.size) =
        ph.unaryExpr([](double t) { return cplx(std::cos(t), std::sin(t)); });
  }
  return F;
}

inline FeatureMatrix assemble_matrix(const FeatureSet& features, const SampleSet& S) {
  return assemble_matrix(features, S.points);
}

/// Re(A(X) a).
inline Eigen::VectorXd predict(const FeatureSet& features, const CoefficientVector& a,
                               const Eigen::MatrixXd& X) {
  detail::require(a.layout == features.layout(), "predict: coefficient blocks do not match features");
  detail::require(X.cols() == features.dimension(), "predict: dimension mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (const auto& b : a.layout.blocks()) {
    const Eigen::MatrixXd ph = group_phases(b.u, features.group(b.u), X);
    const Eigen::VectorXcd ab = a.values.segment(b.offset, b.size);
    out += ph.array().cos().matrix() * ab.real() - ph.array().sin().matrix() * ab.imag();
  }
  return out;
}

}  // namespace anova_rff
