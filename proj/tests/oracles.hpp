#pragma once

// Reference computations that share no code with the library beyond the
// Matrix typedefs. Each solves its problem by a different route: batch
// least squares instead of backward recursion, covariance propagation of an
// augmented state instead of primitive moments, polarization instead of the
// stationarity system.

#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct LqrSchedule {
  std::vector<Matrix> K;  // T
  std::vector<Matrix> P;  // T + 1, cost-to-go x'P_t x under zero noise
};

/// Finite-horizon LQR with cross term S and terminal weight Qf, by minimizing
/// the whole remaining quadratic over stacked controls at every stage.
inline LqrSchedule batch_lqr(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& S,
                             const Matrix& Qf, int T) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  LqrSchedule out;
  out.K.resize(T);
  out.P.resize(T + 1);
  out.P[T] = Qf;
  for (int t = 0; t < T; ++t) {
    const int H = T - t;
    // Stacked X = Phi x + Gam U over x_t..x_T.
    Matrix Phi = Matrix::Zero((H + 1) * n, n);
    Matrix Gam = Matrix::Zero((H + 1) * n, H * m);
    Matrix Ak = Matrix::Identity(n, n);
    for (int k = 0; k <= H; ++k) {
      Phi.block(k * n, 0, n, n) = Ak;
      Ak = A * Ak;
    }
    for (int k = 1; k <= H; ++k) {
      for (int j = 0; j < k; ++j) {
        Matrix Ap = Matrix::Identity(n, n);
        for (int p = 0; p < k - 1 - j; ++p) Ap = A * Ap;
        Gam.block(k * n, j * m, n, m) = Ap * B;
      }
    }
    Matrix QQ = Matrix::Zero((H + 1) * n, (H + 1) * n);
    Matrix SS = Matrix::Zero((H + 1) * n, H * m);
    Matrix RR = Matrix::Zero(H * m, H * m);
    for (int k = 0; k < H; ++k) {
      QQ.block(k * n, k * n, n, n) = Q;
      SS.block(k * n, k * m, n, m) = S;
      RR.block(k * m, k * m, m, m) = R;
    }
    QQ.block(H * n, H * n, n, n) = Qf;
    // cost = [x;U]' M [x;U]
    const Matrix Mxx = Phi.transpose() * QQ * Phi;
    const Matrix Mxu = Phi.transpose() * QQ * Gam + Phi.transpose() * SS;
    Matrix Muu = Gam.transpose() * QQ * Gam + Gam.transpose() * SS + SS.transpose() * Gam + RR;
    Muu = 0.5 * (Muu + Muu.transpose());
    const Matrix sol = Muu.ldlt().solve(Mxu.transpose());
    out.K[t] = -sol.topRows(m);
    Matrix P = Mxx - Mxu * sol;
    out.P[t] = 0.5 * (P + P.transpose());
  }
  return out;
}

/// (1/T) E[sum_t x'Qx + 2x'Su + u'Ru + x_T'Qf x_T] under u_t = K_t x_t.
inline double feedback_cost(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& S,
                            const Matrix& Qf, const std::vector<Matrix>& K, const Matrix& X0, const Matrix& W) {
  const int T = static_cast<int>(K.size());
  Matrix X = X0;
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    const Matrix stage = Q + S * K[t] + K[t].transpose() * S.transpose() + K[t].transpose() * R * K[t];
    acc += (stage * X).trace();
    const Matrix Acl = A + B * K[t];
    X = Acl * X * Acl.transpose() + W;
  }
  acc += (Qf * X).trace();
  return acc / T;
}

/// Exchangeable N-DM problem data in plain form.
struct Team {
  int N = 2;
  Matrix A, B, Q, R, Qt, Rt;  // Qt, Rt are the pair weights (already scaled)
  Matrix Sd, So, W;
  bool per_dm = false;  // divide the cost by N
};

inline Matrix joint_init(const Team& p) {
  const Eigen::Index n = p.A.rows();
  Matrix C(p.N * n, p.N * n);
  for (int i = 0; i < p.N; ++i)
    for (int j = 0; j < p.N; ++j) C.block(i * n, j * n, n, n) = i == j ? p.Sd : p.So;
  return C;
}

/// Per-DM own-information feedback u_t^i = K[i][t] x_t^i + F[i][t] x_0^i + c[i][t].
struct Profile {
  std::vector<std::vector<Matrix>> K, F;
  std::vector<std::vector<Vector>> c;
};

/// Symmetric profile with feedforward F_t = beta L_t Sigma.
inline Profile symmetric_profile(int N, const std::vector<Matrix>& K, const std::vector<Matrix>& L,
                                 const Matrix& Sigma, double beta) {
  Profile p;
  const int T = static_cast<int>(K.size());
  p.K.assign(N, K);
  p.F.assign(N, std::vector<Matrix>(T));
  p.c.assign(N, std::vector<Vector>(T));
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < T; ++t) {
      p.F[i][t] = beta * L[t] * Sigma;
      p.c[i][t] = Vector::Zero(K[t].rows());
    }
  return p;
}

/// Exact cost by propagating the second moment of z = [x; x_0; 1].
inline double team_cost(const Team& p, const Profile& prof) {
  const int N = p.N;
  const Eigen::Index n = p.A.rows();
  const Eigen::Index m = p.B.cols();
  const int T = static_cast<int>(prof.K[0].size());
  const Eigen::Index nz = 2 * N * n + 1;
  Matrix QQ = Matrix::Zero(N * n, N * n);
  Matrix RR = Matrix::Zero(N * m, N * m);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      QQ.block(i * n, j * n, n, n) = i == j ? p.Q : p.Qt;
      RR.block(i * m, j * m, m, m) = i == j ? p.R : p.Rt;
    }
  Matrix Z = Matrix::Zero(nz, nz);
  const Matrix C0 = joint_init(p);
  Z.block(0, 0, N * n, N * n) = C0;
  Z.block(0, N * n, N * n, N * n) = C0;
  Z.block(N * n, 0, N * n, N * n) = C0;
  Z.block(N * n, N * n, N * n, N * n) = C0;
  Z(nz - 1, nz - 1) = 1.0;
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    Matrix Ug = Matrix::Zero(N * m, nz);
    for (int i = 0; i < N; ++i) {
      Ug.block(i * m, i * n, m, n) = prof.K[i][t];
      Ug.block(i * m, N * n + i * n, m, n) = prof.F[i][t];
      Ug.block(i * m, nz - 1, m, 1) = prof.c[i][t];
    }
    Matrix Xg = Matrix::Zero(N * n, nz);
    Xg.leftCols(N * n).setIdentity();
    acc += (QQ * Xg * Z * Xg.transpose()).trace() + (RR * Ug * Z * Ug.transpose()).trace();
    Matrix F = Matrix::Identity(nz, nz);
    Matrix Abig = Matrix::Zero(N * n, N * n);
    Matrix Bbig = Matrix::Zero(N * n, N * m);
    for (int i = 0; i < N; ++i) {
      Abig.block(i * n, i * n, n, n) = p.A;
      Bbig.block(i * n, i * m, n, m) = p.B;
    }
    F.topRows(N * n) = Abig * Xg + Bbig * Ug;
    Z = F * Z * F.transpose();
    for (int i = 0; i < N; ++i) Z.block(i * n, i * n, n, n) += p.W;
  }
  return (p.per_dm ? acc / N : acc) / T;
}

/// Minimizer over stacked symmetric coupling gains (L_0..L_{T-1}) of the
/// exact cost with K fixed. The cost is quadratic in the entries, so its
/// Hessian and gradient follow from finitely many evaluations by polarization.
inline std::vector<Matrix> minimize_coupling(const Team& p, const std::vector<Matrix>& K, const Matrix& Sigma,
                                             double beta) {
  const int T = static_cast<int>(K.size());
  const Eigen::Index m = p.B.cols();
  const Eigen::Index n = p.A.rows();
  const Eigen::Index d = T * m * n;
  auto unpack = [&](const Vector& v) {
    std::vector<Matrix> L(T, Matrix::Zero(m, n));
    for (int t = 0; t < T; ++t)
      for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < n; ++b) L[t](a, b) = v((t * m + a) * n + b);
    return L;
  };
  auto J = [&](const Vector& v) { return team_cost(p, symmetric_profile(p.N, K, unpack(v), Sigma, beta)); };
  const double J0 = J(Vector::Zero(d));
  std::vector<double> Je(d);
  for (Eigen::Index k = 0; k < d; ++k) Je[k] = J(Vector::Unit(d, k));
  // J(v) = J0 + g'v + v'Hv
  Matrix H(d, d);
  Vector g(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double Jm = J(-Vector::Unit(d, k));
    H(k, k) = 0.5 * (Je[k] + Jm) - J0;
    g(k) = 0.5 * (Je[k] - Jm);
  }
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index l = k + 1; l < d; ++l) {
      const double Jkl = J(Vector::Unit(d, k) + Vector::Unit(d, l));
      H(k, l) = H(l, k) = 0.5 * (Jkl - Je[k] - Je[l] + J0);
    }
  const Vector v = H.ldlt().solve(-0.5 * g);
  return unpack(v);
}

/// Central finite difference of f at x along every coordinate.
template <typename F>
Vector gradient(F f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> U(-scale, scale);
  Matrix M(r, c);
  for (Eigen::Index a = 0; a < r; ++a)
    for (Eigen::Index b = 0; b < c; ++b) M(a, b) = U(gen);
  return M;
}

/// Random symmetric positive definite matrix with eigenvalues >= floor.
inline Matrix random_spd(std::mt19937_64& gen, Eigen::Index n, double floor = 0.2) {
  const Matrix G = random_matrix(gen, n, n);
  return G * G.transpose() + floor * Matrix::Identity(n, n);
}

}  // namespace oracle
