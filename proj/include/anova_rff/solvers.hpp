#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anova_rff/errors.hpp"
#include "anova_rff/features.hpp"
#include "anova_rff/index_sets.hpp"

namespace anova_rff {

struct SolverOptions {
  double lambda = 1e-6;
  double tol = 1e-8;
  long max_iterations = 0;  // 0: 10 * (N + M)
  bool precondition = true;
  double shift = 1e-8;      // preconditioner shift, relative to the mean diagonal of the normal matrix
  bool record_objective = false;
};

namespace detail {

inline void check_ridge_args(const Eigen::MatrixXcd& A, const Eigen::VectorXd& f, double lambda) {
  require(A.rows() == f.size(), "ridge: label length must equal number of rows");
  require(std::isfinite(lambda) && lambda >= 0, "ridge: lambda must be >= 0");
}

}  // namespace detail

/// a = A^* (A A^* + lambda I)^{-1} f  (Cholesky on the M x M Gram matrix).
inline Eigen::VectorXcd ridge_solve_dual(const Eigen::MatrixXcd& A, const Eigen::VectorXd& f,
                                         double lambda) {
  detail::check_ridge_args(A, f, lambda);
  const Eigen::Index M = A.rows();
  Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(M, M);
  K.selfadjointView<Eigen::Lower>().rankUpdate(A);
  K.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXcd> llt(K);
  if (llt.info() != Eigen::Success)
    throw SolverFailure("ridge_solve_dual: Gram matrix is not positive definite",
                        std::numeric_limits<double>::infinity());
  if (lambda == 0.0) {
    const double rc = llt.rcond();
    if (rc < 1e3 * std::numeric_limits<double>::epsilon())
      throw SolverFailure("ridge_solve_dual: Gram matrix is numerically singular", 1.0 / rc);
  }
  const Eigen::VectorXcd z = llt.solve(f.cast<cplx>());
  return A.adjoint() * z;
}

/// a solving (A^* A + lambda I) a = A^* f.
inline Eigen::VectorXcd ridge_solve_primal(const Eigen::MatrixXcd& A, const Eigen::VectorXd& f,
                                           double lambda) {
  detail::check_ridge_args(A, f, lambda);
  const Eigen::Index N = A.cols();
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(N, N);
  H.selfadjointView<Eigen::Lower>().rankUpdate(A.adjoint());
  H.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXcd> llt(H);
  if (llt.info() != Eigen::Success)
    throw SolverFailure("ridge_solve_primal: normal matrix is not positive definite",
                        std::numeric_limits<double>::infinity());
  if (lambda == 0.0) {
    const double rc = llt.rcond();
    if (rc < 1e3 * std::numeric_limits<double>::epsilon())
      throw SolverFailure("ridge_solve_primal: normal matrix is numerically singular", 1.0 / rc);
  }
  return llt.solve(A.adjoint() * f.cast<cplx>());
}

/// Whichever of the two forms has the smaller Gram matrix.
inline Eigen::VectorXcd ridge_solve(const Eigen::MatrixXcd& A, const Eigen::VectorXd& f,
                                    double lambda) {
  return A.cols() < A.rows() ? ridge_solve_primal(A, f, lambda) : ridge_solve_dual(A, f, lambda);
}

inline CoefficientVector ridge_solve_dual(const FeatureMatrix& F, const Eigen::VectorXd& f,
                                          double lambda) {
  return {ridge_solve_dual(F.A, f, lambda), F.layout};
}

// ---------------------------------------------------------------------------
// Hierarchical-orthogonality penalty

struct PenaltyBlock {
  VarSubset u;
  Eigen::Index offset = 0;
  Eigen::MatrixXcd W;      // n_u x n_u
  Eigen::MatrixXcd sqrtW;  // principal square root
};

struct PenaltyBlocks {
  BlockLayout layout;
  std::vector<PenaltyBlock> blocks;  // one per term of U, canonical order

  const PenaltyBlock* find(const VarSubset& u) const {
    for (const auto& b : blocks)
      if (b.u == u) return &b;
    return nullptr;
  }

  /// y = W x (block diagonal; terms outside U contribute nothing).
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const {
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(x.size());
    for (const auto& b : blocks)
      y.segment(b.offset, b.W.rows()) = b.W * x.segment(b.offset, b.W.rows());
    return y;
  }

  /// Dense block-diagonal W (tests and small problems only).
  Eigen::MatrixXcd dense() const {
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(layout.total(), layout.total());
    for (const auto& b : blocks) D.block(b.offset, b.offset, b.W.rows(), b.W.cols()) = b.W;
    return D;
  }
};

/// Principal square root of a Hermitian PSD matrix; eigenvalues below
/// 1e-10 * max eigenvalue are clamped to 0.
inline Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& W) {
  if (W.size() == 0) return W;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(W);
  if (es.info() != Eigen::Success) throw NumericalFailure("psd_sqrt: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double cut = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = ev(i) <= cut ? 0.0 : std::sqrt(ev(i));
  return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

/// W_u = (1/M^2) sum_{v strict subset of u, v has a block} (A_v^* A_u)^* (A_v^* A_u),
/// with the empty term's block being the all-ones column.
inline PenaltyBlocks build_penalty(const FeatureMatrix& F, const AnovaIndexSet& U) {
  const VarSubset empty;
  const Block* b0 = F.layout.find(empty);
  if (!b0) throw InvalidState("build_penalty: feature matrix has no block for the empty term");
  const double M = static_cast<double>(F.rows());
  detail::require(F.rows() >= 1, "build_penalty: no samples");
  PenaltyBlocks P;
  P.layout = F.layout;
  for (const auto& u : U) {
    const Block& bu = F.layout.at(u);
    const auto Au = F.A.middleCols(bu.offset, bu.size);
    Eigen::MatrixXcd W = Eigen::MatrixXcd::Zero(bu.size, bu.size);
    for (const auto& v : u.subsets()) {
      if (v == u) continue;
      const Block* bv = F.layout.find(v);
      if (!bv) continue;
      const Eigen::MatrixXcd C = F.A.middleCols(bv->offset, bv->size).adjoint() * Au;
      W.selfadjointView<Eigen::Lower>().rankUpdate(C.adjoint());
    }
    W.triangularView<Eigen::StrictlyUpper>() = W.adjoint();
    W /= M * M;
    P.blocks.push_back({u, bu.offset, W, psd_sqrt(W)});
  }
  return P;
}

struct PenaltyValues {
  std::vector<std::pair<VarSubset, double>> per_block;
  double total = 0.0;
};

/// a_u^* W_u a_u per block and their sum.
inline PenaltyValues penalty_value(const CoefficientVector& a, const PenaltyBlocks& P) {
  detail::require(a.layout == P.layout, "penalty_value: coefficient blocks do not match penalty");
  PenaltyValues out;
  for (const auto& b : P.blocks) {
    const Eigen::VectorXcd au = a.values.segment(b.offset, b.W.rows());
    const double v = std::max(0.0, (au.adjoint() * b.W * au)(0, 0).real());
    out.per_block.emplace_back(b.u, v);
    out.total += v;
  }
  return out;
}

struct PenalizedSolveResult {
  CoefficientVector a;
  long iterations = 0;
  long lsqr_iterations = 0;       // of `iterations`, spent in the stacked least-squares refinement
  double residual = 0.0;          // ||A^*f - (A^*A + lambda W) a|| / ||A^*f||
  std::vector<double> objective;  // ||Aa - f||^2 + lambda a^*Wa per iteration, if recorded
};

namespace detail {

// Applies (A^*A + lambda W + delta I)^{-1} through the Woodbury identity with
// D = lambda W + delta I (block diagonal):
//   (D + A^*A)^{-1} = D^{-1} - D^{-1} A^* (I + A D^{-1} A^*)^{-1} A D^{-1}.
// This operator commutes with H = A^*A + lambda W, so it maps range(H) into
// itself and preconditioned CG started at 0 still tends to the minimum-norm
// minimizer.
class ShiftedInverse {
 public:
  ShiftedInverse(const FeatureMatrix& F, const PenaltyBlocks& P, double lambda, double delta)
      : A_(F.A) {
    const Eigen::Index N = F.cols();
    std::vector<char> covered(static_cast<std::size_t>(N), 0);
    for (const auto& b : F.layout.blocks()) {
      Eigen::MatrixXcd D = Eigen::MatrixXcd::Identity(b.size, b.size) * delta;
      if (const PenaltyBlock* pb = P.find(b.u)) D += lambda * pb->W;
      Eigen::LLT<Eigen::MatrixXcd> llt(D);
      if (llt.info() != Eigen::Success)
        throw SolverFailure("penalized_solve: shifted penalty block is not positive definite",
                            std::numeric_limits<double>::infinity());
      blocks_.push_back({b.offset, b.size, llt.matrixL()});
    }
    // G = A L^{-*} blockwise, so that A D^{-1} A^* = G G^*.
    G_.resize(A_.rows(), N);
    for (const auto& b : blocks_)
      G_.middleCols(b.offset, b.size) =
          b.L.triangularView<Eigen::Lower>().solve(A_.middleCols(b.offset, b.size).adjoint()).adjoint();
    Eigen::MatrixXcd K = Eigen::MatrixXcd::Identity(A_.rows(), A_.rows());
    K.selfadjointView<Eigen::Lower>().rankUpdate(G_);
    K_.compute(K);
    if (K_.info() != Eigen::Success)
      throw SolverFailure("penalized_solve: Woodbury capacitance matrix is not positive definite",
                          std::numeric_limits<double>::infinity());
  }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& r) const {
    // y = L^{-1} r blockwise; D^{-1} r = L^{-*} y, and A D^{-1} r = G y.
    Eigen::VectorXcd y(r.size());
    for (const auto& b : blocks_)
      y.segment(b.offset, b.size) = b.L.triangularView<Eigen::Lower>().solve(r.segment(b.offset, b.size));
    const Eigen::VectorXcd z = K_.solve(G_ * y);
    y -= G_.adjoint() * z;
    for (const auto& b : blocks_)
      y.segment(b.offset, b.size) =
          b.L.adjoint().triangularView<Eigen::Upper>().solve(y.segment(b.offset, b.size));
    return y;
  }

 private:
  struct Factor {
    Eigen::Index offset, size;
    Eigen::MatrixXcd L;
  };
  const Eigen::MatrixXcd& A_;
  std::vector<Factor> blocks_;
  Eigen::MatrixXcd G_;
  Eigen::LLT<Eigen::MatrixXcd> K_;
};


// LSQR on the stacked system [A; sqrt(lambda) W^{1/2}] dx ~ [f - A x0; -sqrt(lambda) W^{1/2} x0],
// i.e. the correction to x0. Its singular values are the square roots of the
// eigenvalues of A^*A + lambda W, so it resolves directions that CG on the
// normal equations loses to rounding. `check(x)` returns the true relative
// normal-equation residual of x0 + dx and keeps the best; refinement stops
// when it returns a value <= tol or after max_it iterations. bnorm = ||A^*f||.
template <class Check, class Record>
long lsqr_refine(const FeatureMatrix& F, const Eigen::VectorXcd& fc, const PenaltyBlocks& P, double lambda,
                 const Eigen::VectorXcd& x0, double bnorm, double tol, long max_it, Check&& check,
                 Record&& record) {
  const Eigen::Index N = F.cols();
  const double sl = std::sqrt(lambda);
  auto K = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y1, Eigen::VectorXcd& y2) {
    y1 = F.A * x;
    y2 = Eigen::VectorXcd::Zero(N);
    for (const auto& b : P.blocks)
      y2.segment(b.offset, b.W.rows()) = sl * (b.sqrtW * x.segment(b.offset, b.W.rows()));
  };
  auto Kt = [&](const Eigen::VectorXcd& y1, const Eigen::VectorXcd& y2) {
    Eigen::VectorXcd x = F.A.adjoint() * y1;
    for (const auto& b : P.blocks)
      x.segment(b.offset, b.W.rows()) += sl * (b.sqrtW.adjoint() * y2.segment(b.offset, b.W.rows()));
    return x;
  };
  Eigen::VectorXcd u1, u2;
  K(x0, u1, u2);
  u1 = fc - u1;
  u2 = -u2;
  double beta = std::sqrt(u1.squaredNorm() + u2.squaredNorm());
  if (beta == 0.0) return 0;
  u1 /= beta;
  u2 /= beta;
  Eigen::VectorXcd v = Kt(u1, u2);
  double alpha = v.norm();
  if (alpha == 0.0) return 0;
  v /= alpha;
  Eigen::VectorXcd w = v, dx = Eigen::VectorXcd::Zero(N);
  double phibar = beta, rhobar = alpha;
  Eigen::VectorXcd t1, t2;
  long it = 0;
  while (it < max_it) {
    ++it;
    K(v, t1, t2);
    u1 = t1 - alpha * u1;
    u2 = t2 - alpha * u2;
    beta = std::sqrt(u1.squaredNorm() + u2.squaredNorm());
    if (beta > 0) {
      u1 /= beta;
      u2 /= beta;
    }
    v = Kt(u1, u2) - beta * v;
    alpha = v.norm();
    if (alpha > 0) v /= alpha;
    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho, sn = beta / rho;
    const double theta = sn * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = sn * phibar;
    dx += (phi / rho) * w;
    w = v - (theta / rho) * w;
    record(x0 + dx);
    // phibar * alpha * |c| estimates ||K^* r||; confirm with the true residual.
    const bool exhausted = alpha == 0.0 || beta == 0.0;
    if (exhausted || phibar * alpha * std::abs(c) <= tol * bnorm || it % 25 == 0) {
      if (check(x0 + dx) <= tol || exhausted) break;
    }
  }
  return it;
}

}  // namespace detail

/// argmin ||Aa - f||^2 + lambda a^* W a, i.e. the normal equations
/// (A^*A + lambda W) a = A^*f, by conjugate gradients from a = 0.
/// With opts.precondition the shifted inverse above is used; either way the
/// iterates stay in range(A^*A + lambda W), so a singular W still yields the
/// minimum-norm minimizer. If CG stops short of tol (near-singular systems
/// whose residual floors above it), the remaining iteration budget goes to
/// LSQR on the stacked form, started from the best CG iterate.
inline PenalizedSolveResult penalized_solve(const FeatureMatrix& F, const Eigen::VectorXd& f,
                                            const PenaltyBlocks& P, const SolverOptions& opts) {
  const double lambda = opts.lambda;
  detail::require(F.rows() == f.size(), "penalized_solve: label length mismatch");
  detail::require(P.layout == F.layout, "penalized_solve: penalty blocks do not match features");
  detail::require(std::isfinite(lambda) && lambda > 0, "penalized_solve: lambda must be > 0");
  detail::require(opts.tol > 0, "penalized_solve: tol must be > 0");
  const Eigen::Index N = F.cols(), M = F.rows();
  const long max_it = opts.max_iterations > 0 ? opts.max_iterations : 10 * static_cast<long>(N + M);
  const Eigen::VectorXcd fc = f.cast<cplx>();

  auto H = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return F.A.adjoint() * (F.A * x) + lambda * P.apply(x);
  };
  auto objective = [&](const Eigen::VectorXcd& x) {
    return (F.A * x - fc).squaredNorm() + lambda * P.apply(x).dot(x).real();
  };

  PenalizedSolveResult res;
  res.a = CoefficientVector::zeros(F.layout);
  Eigen::VectorXcd& x = res.a.values;
  const Eigen::VectorXcd b = F.A.adjoint() * fc;
  const double bnorm = b.norm();
  if (opts.record_objective) res.objective.push_back(objective(x));
  if (bnorm == 0.0) return res;

  std::optional<detail::ShiftedInverse> pre;
  if (opts.precondition) {
    const double scale = (F.A.cwiseAbs2().colwise().sum().sum() +
                          lambda * [&] {
                            double t = 0;
                            for (const auto& pb : P.blocks) t += pb.W.diagonal().real().sum();
                            return t;
                          }()) /
                         static_cast<double>(N);
    pre.emplace(F, P, lambda, opts.shift * scale);
  }
  auto precond = [&](const Eigen::VectorXcd& r) -> Eigen::VectorXcd {
    return pre ? pre->apply(r) : r;
  };

  // When H is singular the shifted inverse amplifies rounding in its null
  // space by 1/delta and the recurrence residual drifts away from the true
  // one, or CG stalls. The true residual is checked whenever convergence is
  // claimed and every `check_every` iterations; CG restarts from the best true
  // iterate on drift or when `patience` checks pass without a 10% gain. Two
  // restarts in a row without a new best mean the run is cycling, so it stops.
  Eigen::VectorXcd r = b;
  Eigen::VectorXcd z = precond(r);
  Eigen::VectorXcd p = z;
  double rz = r.dot(z).real();
  Eigen::VectorXcd best = x;
  double best_res = 1.0;
  auto true_residual = [&] {
    const double tr = (b - H(x)).norm() / bnorm;
    if (tr < best_res) {
      best_res = tr;
      best = x;
    }
    return tr;
  };
  double restarted_at = std::numeric_limits<double>::infinity();
  int idle_restarts = 0;
  auto restart = [&] {
    idle_restarts = best_res < restarted_at ? 0 : idle_restarts + 1;
    restarted_at = best_res;
    x = best;
    r = b - H(x);
    z = precond(r);
    p = z;
    rz = r.dot(z).real();
    return idle_restarts < 2;
  };
  const long check_every = 25;
  const int patience = 8;
  int stalled = 0;
  double mark = 1.0;
  for (long it = 1; it <= max_it; ++it) {
    const Eigen::VectorXcd Hp = H(p);
    const double pHp = p.dot(Hp).real();
    res.iterations = it;
    if (!(pHp > 0)) {
      if (true_residual() <= opts.tol || !restart()) break;
      continue;
    }
    const double alpha = rz / pHp;
    x += alpha * p;
    r -= alpha * Hp;
    if (opts.record_objective) res.objective.push_back(objective(x));
    const double rec = r.norm() / bnorm;
    if (rec <= opts.tol || it % check_every == 0) {
      const double tr = true_residual();
      if (tr <= opts.tol) break;
      if (best_res < 0.9 * mark) {
        mark = best_res;
        stalled = 0;
      } else {
        ++stalled;
      }
      if (rec <= opts.tol || tr > 2.0 * rec || stalled >= patience) {
        stalled = 0;
        if (!restart()) break;
        continue;
      }
    }
    z = precond(r);
    const double rz_new = r.dot(z).real();
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  true_residual();
  if (best_res > opts.tol && res.iterations < max_it) {
    const Eigen::VectorXcd x0 = best;
    res.lsqr_iterations = detail::lsqr_refine(
        F, fc, P, lambda, x0, bnorm, opts.tol, max_it - res.iterations,
        [&](const Eigen::VectorXcd& y) {
          x = y;
          return true_residual();
        },
        [&](const Eigen::VectorXcd& y) {
          if (opts.record_objective) res.objective.push_back(objective(y));
        });
    res.iterations += res.lsqr_iterations;
  }
  x = best;
  res.residual = best_res;
  if (res.residual <= opts.tol) return res;
  std::ostringstream msg;
  msg << "penalized_solve: no convergence after " << res.iterations << " iterations (relative residual "
      << std::setprecision(3) << res.residual << ")";
  throw SolverFailure(msg.str(), res.residual);
}

}  // namespace anova_rff
