#pragma once

#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "lqteam/errors.hpp"
#include "lqteam/linalg.hpp"

namespace lqteam {

struct RiccatiStep {
  Matrix P;
  Matrix K;
};

struct DareSolution {
  Matrix P;
  Matrix K;
  double residual = 0.0;
  int iterations = 0;
};

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

namespace detail {

inline Matrix solve_spd(const Matrix& H, const Matrix& rhs, const char* who) {
  Eigen::LLT<Matrix> llt(linalg::symmetrized(H));
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  Eigen::FullPivLU<Matrix> lu(H);
  if (!lu.isInvertible()) {
    throw NumericalError(std::string(who) + ": inner matrix R + B'PB is singular");
  }
  return lu.solve(rhs);
}

}  // namespace detail

/// One backward step with cross term S (cost x'Qx + 2x'Su + u'Ru):
///   K = -(R + B'PB)^{-1} (S' + B'PA)
///   P = Q + A'PA - K'(R + B'PB)K
inline RiccatiStep riccati_step(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                                const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R,
                                const Eigen::Ref<const Matrix>& S,
                                const Eigen::Ref<const Matrix>& P_next) {
  const Matrix H = R + B.transpose() * P_next * B;
  const Matrix rhs = S.transpose() + B.transpose() * P_next * A;
  RiccatiStep out;
  out.K = -detail::solve_spd(H, rhs, "riccati.riccati_step");
  out.P = linalg::symmetrized(Q + A.transpose() * P_next * A - out.K.transpose() * H * out.K);
  return out;
}

inline RiccatiStep riccati_step(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                                const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R,
                                const Eigen::Ref<const Matrix>& P_next) {
  return riccati_step(A, B, Q, R, Matrix::Zero(A.rows(), B.cols()), P_next);
}

inline double spectral_radius(const Eigen::Ref<const Matrix>& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// PBH test: rank [A - lambda I, B] = n for every eigenvalue with
/// |lambda| >= 1 - 1e-10.
inline bool is_stabilizable(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B) {
  const auto n = A.rows();
  if (n == 0) return true;
  Eigen::EigenSolver<Matrix> es(A, false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> lambda = es.eigenvalues()(k);
    if (std::abs(lambda) < 1.0 - 1e-10) continue;
    ComplexMatrix pbh(n, n + B.cols());
    pbh.leftCols(n) = A.cast<std::complex<double>>() - lambda * ComplexMatrix::Identity(n, n);
    pbh.rightCols(B.cols()) = B.cast<std::complex<double>>();
    if (linalg::numerical_rank(pbh) < n) return false;
  }
  return true;
}

inline bool is_detectable(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& C) {
  return is_stabilizable(A.transpose(), C.transpose());
}

/// Stabilizing DARE solution by fixed-point iteration of riccati_step from
/// P = 0. Requires (A, B) stabilizable and (A, Q^{1/2}) detectable.
inline DareSolution dare_solve(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                               const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R,
                               const DareOptions& opts = {}) {
  if (!is_stabilizable(A, B))
    throw ValidationError("riccati.dare_solve: precondition failed: (A, B) is not stabilizable");
  if (!is_detectable(A, linalg::psd_sqrt(Q)))
    throw ValidationError("riccati.dare_solve: precondition failed: (A, Q^1/2) is not detectable");

  Matrix P = Matrix::Zero(A.rows(), A.rows());
  double diff = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    RiccatiStep step = riccati_step(A, B, Q, R, P);
    diff = linalg::max_abs(step.P - P);
    P = std::move(step.P);
    if (diff < opts.tol) {
      DareSolution out;
      RiccatiStep fixed = riccati_step(A, B, Q, R, P);
      out.P = P;
      out.K = fixed.K;
      out.residual = linalg::max_abs(fixed.P - P);
      out.iterations = it;
      return out;
    }
  }
  std::ostringstream os;
  os << "riccati.dare_solve: no convergence after " << opts.max_iter
     << " iterations (last successive-iterate difference " << diff << ")";
  throw NumericalError(os.str(), diff);
}

/// DARE with cross term S, via u = v - R^{-1} S' x. Returned K acts on x
/// directly (u = K x).
inline DareSolution dare_solve(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                               const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& R,
                               const Eigen::Ref<const Matrix>& S, const DareOptions& opts) {
  if (linalg::max_abs(S) == 0.0) return dare_solve(A, B, Q, R, opts);
  const Matrix RinvSt = detail::solve_spd(R, S.transpose(), "riccati.dare_solve");
  const Matrix A_bar = A - B * RinvSt;
  const Matrix Q_bar = linalg::symmetrized(Q - S * RinvSt);
  DareSolution out = dare_solve(A_bar, B, Q_bar, R, opts);
  out.K -= RinvSt;
  out.residual = linalg::max_abs(riccati_step(A, B, Q, R, S, out.P).P - out.P);
  return out;
}

}  // namespace lqteam
