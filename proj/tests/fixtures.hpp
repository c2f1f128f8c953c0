#pragma once

#include <random>

#include "lqteam/lqteam.hpp"
#include "oracles.hpp"

namespace fixtures {

using lqteam::Matrix;

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// A=B=Q=R=1 two-DM tree instance with pair weight rt on controls.
inline lqteam::TeamSpec scalar_tree(double rt, double sd, double so, int T, int N = 2) {
  lqteam::TeamSpec s;
  s.n_dm = N;
  s.horizon = T;
  s.dynamics = lqteam::HomogeneousDynamics{scalar(1), scalar(1)};
  s.cost.Q = scalar(1);
  s.cost.R = scalar(1);
  if (rt != 0.0) s.cost.R_tilde = scalar(rt);
  s.noise.sigma_w = scalar(1);
  s.noise.init_diag = scalar(sd);
  s.noise.init_offdiag = scalar(so);
  s.info.kind = lqteam::InfoKind::tree;
  return s;
}

inline lqteam::TeamSpec scalar_meanfield(double rt, double qt, double so, int T, int N) {
  lqteam::TeamSpec s = scalar_tree(rt, 1.0, so, T, N);
  s.info.kind = lqteam::InfoKind::meanfield;
  if (qt != 0.0) s.cost.Q_tilde = scalar(qt);
  return s;
}

/// Random exchangeable tree instance whose joint weights are positive definite.
inline lqteam::TeamSpec random_tree(std::mt19937_64& gen, int N, int n, int m, int T) {
  lqteam::TeamSpec s;
  s.n_dm = N;
  s.horizon = T;
  s.dynamics = lqteam::HomogeneousDynamics{oracle::random_matrix(gen, n, n, 1.0), oracle::random_matrix(gen, n, m, 1.0)};
  s.cost.Q = oracle::random_spd(gen, n);
  s.cost.R = oracle::random_spd(gen, m, 0.5);
  // Pair weights below lambda_min / (N - 1) keep the joint weights positive definite.
  auto pair = [&](const Matrix& base, Eigen::Index d) {
    const Matrix V = oracle::random_spd(gen, d, 0.1);
    const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(base).eigenvalues().minCoeff();
    const double hi = Eigen::SelfAdjointEigenSolver<Matrix>(V).eigenvalues().maxCoeff();
    const Matrix out = 0.6 * lo / (std::max(1, N - 1) * hi) * V;
    return Matrix(0.5 * (out + out.transpose()));
  };
  s.cost.R_tilde = pair(s.cost.R, m);
  s.cost.Q_tilde = pair(s.cost.Q, n);
  s.noise.sigma_w = oracle::random_spd(gen, n, 0.1);
  const Matrix So = 0.5 * oracle::random_spd(gen, n, 0.1);
  s.noise.init_offdiag = So;
  s.noise.init_diag = So + oracle::random_spd(gen, n, 0.3);
  s.info.kind = lqteam::InfoKind::tree;
  return s;
}

/// Oracle view of a homogeneous spec.
inline oracle::Team team_of(const lqteam::TeamSpec& s) {
  oracle::Team p;
  p.N = s.n_dm;
  p.A = s.homogeneous().A;
  p.B = s.homogeneous().B;
  p.Q = s.cost.Q;
  p.R = s.cost.R;
  const auto n = p.A.rows();
  const auto m = p.B.cols();
  const double w = s.info.kind == lqteam::InfoKind::meanfield ? 1.0 / (s.n_dm - 1) : 1.0;
  p.Qt = s.cost.Q_tilde.size() ? Matrix(w * s.cost.Q_tilde) : Matrix::Zero(n, n);
  p.Rt = s.cost.R_tilde.size() ? Matrix(w * s.cost.R_tilde) : Matrix::Zero(m, m);
  p.Sd = s.noise.init_diag;
  p.So = s.noise.init_offdiag.size() ? s.noise.init_offdiag : Matrix::Zero(n, n);
  p.W = s.noise.sigma_w;
  p.per_dm = s.info.kind == lqteam::InfoKind::meanfield;
  return p;
}

/// Two-DM delayed instance with scalar blocks and delay-1 links.
inline lqteam::TeamSpec delayed_pair(double a12, double a21, int T) {
  lqteam::TeamSpec s;
  s.n_dm = 2;
  s.horizon = T;
  lqteam::BlockedDynamics b;
  b.A_blocks = {{scalar(0.9), scalar(a12)}, {scalar(a21), scalar(0.8)}};
  b.B_blocks = {{scalar(1), scalar(0)}, {scalar(0), scalar(1)}};
  s.dynamics = b;
  s.cost.Q = (Matrix(2, 2) << 1.0, 0.2, 0.2, 1.0).finished();
  s.cost.R = Matrix::Identity(2, 2);
  s.noise.sigma_w = scalar(1);
  s.noise.init_diag = scalar(1);
  s.noise.init_offdiag = scalar(0);
  s.info.kind = lqteam::InfoKind::delayed;
  s.info.delays = {{0, 1}, {1, 0}};
  return s;
}

/// Single-DM delayed spec: a centralized LQR problem with cross term S.
inline lqteam::TeamSpec centralized(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                                    const Matrix& S, const Matrix& W, const Matrix& X0, int T) {
  lqteam::TeamSpec s;
  s.n_dm = 1;
  s.horizon = T;
  lqteam::BlockedDynamics b;
  b.A_blocks = {{A}};
  b.B_blocks = {{B}};
  s.dynamics = b;
  s.cost.Q = Q;
  s.cost.R = R;
  s.cost.S = S;
  s.noise.sigma_w = W;
  s.noise.init_diag = X0;
  s.info.kind = lqteam::InfoKind::delayed;
  s.info.delays = {{0}};
  return s;
}

/// Random centralized instance with [Q S; S' R] positive semidefinite and R PD.
inline lqteam::TeamSpec random_centralized(std::mt19937_64& gen, int n, int m, int T) {
  const Matrix Mfull = oracle::random_spd(gen, n + m, 0.3);
  return centralized(oracle::random_matrix(gen, n, n, 1.2), oracle::random_matrix(gen, n, m), Mfull.topLeftCorner(n, n),
                     Mfull.bottomRightCorner(m, m), Mfull.topRightCorner(n, m), oracle::random_spd(gen, n, 0.1),
                     oracle::random_spd(gen, n, 0.2), T);
}

}  // namespace fixtures
