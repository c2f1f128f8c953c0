#pragma once

#include <vector>

#include "lqteam/linalg.hpp"
#include "lqteam/policy.hpp"
#include "lqteam/team_model.hpp"

namespace lqteam {

/// Stacked quadratic stage cost x'Qx + 2x'Su + u'Ru of the whole team, the
/// terminal weight (delayed-sharing problems carry x_T'Q x_T) and the
/// reporting scale (1/T, and 1/N for mean-field problems).
struct CostForm {
  Matrix Q, R, S;
  bool terminal = false;
  double per_dm_scale = 1.0;
};

inline CostForm cost_form(const TeamSpec& spec) {
  CostForm f;
  const int N = spec.n_dm;
  if (spec.is_blocked()) {
    f.Q = spec.cost.Q;
    f.R = spec.cost.R;
    f.S = spec.cost.S.size() ? spec.cost.S : Matrix::Zero(f.Q.rows(), f.R.rows());
    f.terminal = true;
    return f;
  }
  const auto n = spec.n_state();
  const auto m = spec.n_input();
  const double s = pair_weight(spec);
  const Matrix I = Matrix::Identity(N, N);
  const Matrix off = Matrix::Ones(N, N) - I;
  f.Q = linalg::kron(I, spec.cost.Q);
  f.R = linalg::kron(I, spec.cost.R);
  if (has_matrix(spec.cost.Q_tilde)) f.Q += s * linalg::kron(off, spec.cost.Q_tilde);
  if (has_matrix(spec.cost.R_tilde)) f.R += s * linalg::kron(off, spec.cost.R_tilde);
  f.S = Matrix::Zero(N * n, N * m);
  f.per_dm_scale = spec.info.kind == InfoKind::meanfield ? 1.0 / N : 1.0;
  return f;
}

inline void stacked_dynamics(const TeamSpec& spec, Matrix& A, Matrix& B) {
  if (spec.is_blocked()) {
    A = spec.blocked().full_A();
    B = spec.blocked().full_B();
    return;
  }
  const Matrix I = Matrix::Identity(spec.n_dm, spec.n_dm);
  A = linalg::kron(I, spec.homogeneous().A);
  B = linalg::kron(I, spec.homogeneous().B);
}

/// Primitive vector xi = [x_0; w_0; ...; w_{T-1}; 1], each block stacked over DMs.
struct PrimitiveLayout {
  int n_dm = 0;
  int horizon = 0;
  Eigen::Index n_state = 0;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(n_dm) * n_state * (horizon + 1) + 1; }
  Eigen::Index col(int source, int tau) const {
    return (static_cast<Eigen::Index>(tau) * n_dm + source) * n_state;
  }
  Eigen::Index constant() const { return dim() - 1; }
};

inline Matrix joint_initial_covariance(const TeamSpec& spec) {
  const int N = spec.n_dm;
  const Matrix So = init_offdiag_or_zero(spec);
  return linalg::kron(Matrix::Identity(N, N), spec.noise.init_diag - So) +
         linalg::kron(Matrix::Ones(N, N), So);
}

inline Matrix primitive_second_moment(const TeamSpec& spec, const PrimitiveLayout& lay) {
  const int N = spec.n_dm;
  const auto n = spec.n_state();
  Matrix C = Matrix::Zero(lay.dim(), lay.dim());
  C.topLeftCorner(N * n, N * n) = joint_initial_covariance(spec);
  const Matrix Wb = linalg::kron(Matrix::Identity(N, N), spec.noise.sigma_w);
  for (int t = 0; t < lay.horizon; ++t) C.block(lay.col(0, t + 1), lay.col(0, t + 1), N * n, N * n) = Wb;
  C(lay.constant(), lay.constant()) = 1.0;
  return C;
}

/// Exact expected cost of a linear policy by propagating the state as a
/// linear map of the primitives: E[xi' M xi] = Tr(M E[xi xi']).
inline double exact_cost(const TeamSpec& spec, const LinearPolicySet& p) {
  check_measurable(spec, p);
  const int N = spec.n_dm;
  const int T = p.horizon;
  const auto n = spec.n_state();
  const auto m = spec.n_input();
  const PrimitiveLayout lay{N, T, n};
  const Matrix C = primitive_second_moment(spec, lay);
  const CostForm f = cost_form(spec);
  Matrix A, B;
  stacked_dynamics(spec, A, B);

  Matrix X = Matrix::Zero(N * n, lay.dim());
  X.leftCols(N * n).setIdentity();
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    Matrix U = Matrix::Zero(N * m, lay.dim());
    for (int i = 0; i < N; ++i) {
      const StageMap& s = p.maps[i][t];
      for (const auto& term : s.terms) U.block(i * m, lay.col(term.source, term.tau), m, n) += term.gain;
      U.block(i * m, lay.constant(), m, 1) += s.offset;
    }
    const Matrix XC = X * C;
    const Matrix UC = U * C;
    acc += (f.Q * XC * X.transpose()).trace() + 2.0 * (f.S * UC * X.transpose()).trace() +
           (f.R * UC * U.transpose()).trace();
    X = A * X + B * U;
    X.middleCols(lay.col(0, t + 1), N * n) += Matrix::Identity(N * n, N * n);
  }
  if (f.terminal) acc += (f.Q * X * C * X.transpose()).trace();
  return f.per_dm_scale * acc / T;
}

}  // namespace lqteam
