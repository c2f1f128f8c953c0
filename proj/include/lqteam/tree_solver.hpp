#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lqteam/errors.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/riccati.hpp"
#include "lqteam/team_model.hpp"

namespace lqteam {

// Symmetric decentralized policies on a tree: every DM applies
//   u_t^i = K_t x_t^i + L_t c^i,   c^i = beta * Sigma x_0^i,
// where c^i is the DM's conditional statistic of the other initial states:
//   two_dm          c^i = E(x_0^j | x_0^i)                      beta = 1
//   n_dm(N)         c^i = sum_{j != i} E(x_0^j | x_0^i)         beta = N - 1
//   mean_field_N(N) c^i = (1/(N-1)) sum_{j != i} E(x_0^j | x_0^i)  beta = 1
//   mean_field_limit c^i = Sigma x_0^i                          beta = 1

enum class PopulationMode { two_dm, n_dm, mean_field_n, mean_field_limit };

struct Population {
  PopulationMode mode = PopulationMode::two_dm;
  int n = 2;  // ignored for mean_field_limit

  double beta() const {
    return mode == PopulationMode::n_dm ? static_cast<double>(n - 1) : 1.0;
  }
  /// (N-1) s: weight of the averaged pair terms in one DM's share of the cost.
  double pair_factor() const {
    return mode == PopulationMode::n_dm ? static_cast<double>(n - 1) : 1.0;
  }
  bool mean_field() const {
    return mode == PopulationMode::mean_field_n || mode == PopulationMode::mean_field_limit;
  }
  bool operator==(const Population&) const = default;
};

inline const char* to_string(PopulationMode m) {
  switch (m) {
    case PopulationMode::two_dm: return "two_dm";
    case PopulationMode::n_dm: return "n_dm";
    case PopulationMode::mean_field_n: return "mean_field_N";
    case PopulationMode::mean_field_limit: return "mean_field_limit";
  }
  return "?";
}

inline Population population_of(const TeamSpec& spec) {
  if (spec.info.kind == InfoKind::meanfield) return {PopulationMode::mean_field_n, spec.n_dm};
  if (spec.info.kind == InfoKind::tree) {
    return spec.n_dm == 2 ? Population{PopulationMode::two_dm, 2}
                          : Population{PopulationMode::n_dm, spec.n_dm};
  }
  throw ValidationError("tree_solver: delayed information is not a tree problem");
}

struct TreePolicy {
  Population population;
  int horizon = 0;
  std::vector<Matrix> K;  // T gains, m x n
  std::vector<Matrix> L;  // T coupling gains, m x n
  std::vector<Matrix> P;  // T + 1 value matrices, P[T] = 0
  std::vector<Matrix> G;  // T matrices: E(x_t^j | x_0^j) = G_t x_0^j
  Matrix Sigma;

  /// Gain on the DM's own initial state: beta L_t Sigma.
  Matrix feedforward(int t) const { return population.beta() * L[t] * Sigma; }
};

struct KpSchedule {
  std::vector<Matrix> K;  // size T
  std::vector<Matrix> P;  // size T + 1
};

struct CouplingGains {
  std::vector<Matrix> L;
  std::vector<Matrix> G;
};

namespace detail {

inline Matrix coupling_or_zero(const Matrix& m, Eigen::Index dim) {
  return m.size() ? m : Matrix::Zero(dim, dim);
}

inline void require_tree_spec(const TeamSpec& spec, const char* who) {
  if (spec.info.kind == InfoKind::delayed || spec.is_blocked())
    throw ValidationError(std::string(who) + ": tree / mean-field spec with homogeneous dynamics required");
}

/// G_t = Phi(t,0) + beta sum_{r<t} Phi(t,r+1) B L_r Sigma.
inline std::vector<Matrix> mean_propagation(const Matrix& A, const Matrix& B,
                                            const std::vector<Matrix>& K,
                                            const std::vector<Matrix>& L, const Matrix& Sigma,
                                            double beta) {
  const auto T = K.size();
  std::vector<Matrix> G(T);
  if (T == 0) return G;
  G[0] = Matrix::Identity(A.rows(), A.rows());
  for (std::size_t t = 1; t < T; ++t) {
    G[t] = (A + B * K[t - 1]) * G[t - 1] + beta * B * L[t - 1] * Sigma;
  }
  return G;
}

}  // namespace detail

/// Backward recursion from P_T = 0. The gains depend only on (A, B, Q, R).
inline KpSchedule solve_k_p(const TeamSpec& spec, int T) {
  detail::require_tree_spec(spec, "tree_solver.solve_k_p");
  if (T < 1) throw ValidationError("tree_solver.solve_k_p: horizon must be >= 1");
  const auto& dyn = spec.homogeneous();
  const auto n = dyn.A.rows();
  KpSchedule out;
  out.K.resize(T);
  out.P.resize(T + 1);
  out.P[T] = Matrix::Zero(n, n);
  for (int t = T - 1; t >= 0; --t) {
    RiccatiStep step = riccati_step(dyn.A, dyn.B, spec.cost.Q, spec.cost.R, out.P[t + 1]);
    out.K[t] = std::move(step.K);
    out.P[t] = std::move(step.P);
  }
  return out;
}

/// Solves the coupled person-by-person stationarity conditions for the
/// coupling gains L_0..L_{T-1} as one linear system. For every t:
///
///   H_t L_t + R~ K_t G_t + beta R~ L_t Sigma
///     + sum_{s>t} B'(A')^{s-t-1} [ Q~ G_s + A' P_{s+1} B L_s ] = 0,
///
/// with H_t = R + B'P_{t+1}B and G_t affine in L_0..L_{t-1}. With beta = 1
/// and Q~ = 0 this is the two-DM recursion for L_t.
inline CouplingGains solve_coupling_gains(const TeamSpec& spec, int T, const Population& pop,
                                          const KpSchedule& kp, const Matrix& Sigma) {
  detail::require_tree_spec(spec, "tree_solver.solve_coupling_gains");
  const auto& dyn = spec.homogeneous();
  const Matrix& A = dyn.A;
  const Matrix& B = dyn.B;
  const auto n = A.rows();
  const auto m = B.cols();
  const Matrix Rt = detail::coupling_or_zero(spec.cost.R_tilde, m);
  const Matrix Qt = detail::coupling_or_zero(spec.cost.Q_tilde, n);
  const double beta = pop.beta();

  CouplingGains out;
  out.L.assign(T, Matrix::Zero(m, n));
  const bool no_coupling = (!has_matrix(Rt) && !has_matrix(Qt)) || beta == 0.0 ||
                           (pop.mode == PopulationMode::n_dm && pop.n < 2);
  if (no_coupling) {
    out.G = detail::mean_propagation(A, B, kp.K, out.L, Sigma, beta);
    return out;
  }

  const Eigen::Index d = m * n;
  const Eigen::Index dim = static_cast<Eigen::Index>(T) * d;
  const Matrix In = Matrix::Identity(n, n);
  const Matrix SigmaT = Sigma.transpose();
  Matrix M = Matrix::Zero(dim, dim);
  Vector c = Vector::Zero(dim);
  auto block = [&](int row, int col) { return M.block(row * d, col * d, d, d); };

  std::vector<Matrix> Acl(T);
  for (int t = 0; t < T; ++t) Acl[t] = A + B * kp.K[t];

  // Own-gain diagonal terms: H_t L_t + beta R~ L_t Sigma.
  for (int t = 0; t < T; ++t) {
    const Matrix H = spec.cost.R + B.transpose() * kp.P[t + 1] * B;
    block(t, t) += linalg::kron(In, H) + beta * linalg::kron(SigmaT, Rt);
  }
  // Future terms: B'(A')^{s-t} P_{s+1} B L_s for s > t.
  for (int s = 1; s < T; ++s) {
    Matrix V = A.transpose() * kp.P[s + 1] * B;  // (A')^{s-t} P_{s+1} B at t = s-1
    for (int t = s - 1; t >= 0; --t) {
      block(t, s) += linalg::kron(In, B.transpose() * V);
      V = A.transpose() * V;
    }
  }
  // Past terms through G_t: R~ K_t Phi(t, r+1) B L_r beta Sigma, plus the
  // constant R~ K_t Phi(t, 0).
  {
    Matrix Phi = Matrix::Identity(n, n);  // Phi(t, 0)
    for (int t = 0; t < T; ++t) {
      c.segment(t * d, d) += linalg::vec(Rt * kp.K[t] * Phi);
      Phi = Acl[t] * Phi;
    }
    for (int r = 0; r < T; ++r) {
      Matrix PhiR = Matrix::Identity(n, n);  // Phi(t, r+1), starting at t = r+1
      for (int t = r + 1; t < T; ++t) {
        block(t, r) += beta * linalg::kron(SigmaT, Rt * kp.K[t] * PhiR * B);
        PhiR = Acl[t] * PhiR;
      }
    }
  }
  // State coupling: B' Y_{t,r} with Y_{t,r} = sum_{s > max(t,r)} (A')^{s-t-1} Q~ Phi(s, r+1);
  // r = -1 gives the constant term.
  if (has_matrix(Qt)) {
    std::vector<Matrix> PhiFrom(T);
    for (int r = -1; r < T - 1; ++r) {
      // PhiFrom[s] = Phi(s, r+1) for s >= r+1.
      PhiFrom[r + 1] = Matrix::Identity(n, n);
      for (int s = r + 2; s < T; ++s) PhiFrom[s] = Acl[s - 1] * PhiFrom[s - 1];
      Matrix Y = Matrix::Zero(n, n);  // Y_{T-1, r}
      for (int t = T - 2; t >= 0; --t) {
        Y = A.transpose() * Y;
        if (t >= r) Y += Qt * PhiFrom[t + 1];
        if (r < 0) {
          c.segment(t * d, d) += linalg::vec(B.transpose() * Y);
        } else {
          block(t, r) += beta * linalg::kron(SigmaT, B.transpose() * Y * B);
        }
      }
    }
  }

  Eigen::PartialPivLU<Matrix> lu(M);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    std::ostringstream os;
    os << "tree_solver.solve_coupling_gains: coupling system singular (rcond " << rcond
       << "); check Sigma / R_tilde";
    throw NumericalError(os.str());
  }
  const Vector v = lu.solve(-c);
  for (int t = 0; t < T; ++t) out.L[t] = linalg::unvec(v.segment(t * d, d), m, n);
  out.G = detail::mean_propagation(A, B, kp.K, out.L, Sigma, beta);
  return out;
}

/// Full finite-horizon synthesis for the given population mode.
inline TreePolicy solve_tree(const TeamSpec& spec, int T, const Population& pop) {
  detail::require_tree_spec(spec, "tree_solver.solve_tree");
  TreePolicy out;
  out.population = pop;
  out.horizon = T;
  out.Sigma = conditional_gain(spec.noise);
  KpSchedule kp = solve_k_p(spec, T);
  CouplingGains cg = solve_coupling_gains(spec, T, pop, kp, out.Sigma);
  out.K = std::move(kp.K);
  out.P = std::move(kp.P);
  out.L = std::move(cg.L);
  out.G = std::move(cg.G);
  return out;
}

inline TreePolicy solve_tree(const TeamSpec& spec, int T) { return solve_tree(spec, T, population_of(spec)); }
inline TreePolicy solve_tree(const TeamSpec& spec) { return solve_tree(spec, spec.horizon); }

/// Closed-form expected cost of a symmetric tree policy (completion of
/// squares per DM plus exact cross-DM moments):
///   per DM:  Tr(P_0 Sd) + sum_t Tr(P_{t+1} W) + sum_t Tr(F_t' H_t F_t Sd)
///            + (N-1)s sum_t [Tr(R~ U_t So U_t') + Tr(Q~ G_t So G_t')]
/// with F_t = beta L_t Sigma and U_t = K_t G_t + F_t, all divided by T.
/// Tree and N-DM problems report the sum over DMs; mean-field problems report
/// the per-DM cost.
inline double predicted_cost(const TeamSpec& spec, const TreePolicy& policy) {
  detail::require_tree_spec(spec, "tree_solver.predicted_cost");
  const Population& pop = policy.population;
  if (pop.mode != PopulationMode::mean_field_limit) {
    const Population expected = population_of(spec);
    if (!(expected == pop) && !(pop.mode == PopulationMode::n_dm && expected.mode == PopulationMode::two_dm &&
                                pop.n == 2)) {
      throw ValidationError("tree_solver.predicted_cost: population mode mismatch between policy (" +
                            std::string(to_string(pop.mode)) + ") and spec (" +
                            to_string(expected.mode) + ")");
    }
  } else if (spec.info.kind != InfoKind::meanfield) {
    throw ValidationError("tree_solver.predicted_cost: mean_field_limit policy needs a meanfield spec");
  }
  const int T = policy.horizon;
  const auto& dyn = spec.homogeneous();
  const auto n = dyn.A.rows();
  const auto m = dyn.B.cols();
  const Matrix& Sd = spec.noise.init_diag;
  const Matrix So = init_offdiag_or_zero(spec);
  const Matrix& W = spec.noise.sigma_w;
  const Matrix Rt = detail::coupling_or_zero(spec.cost.R_tilde, m);
  const Matrix Qt = detail::coupling_or_zero(spec.cost.Q_tilde, n);

  double own = (policy.P[0] * Sd).trace();
  double pairs = 0.0;
  for (int t = 0; t < T; ++t) {
    own += (policy.P[t + 1] * W).trace();
    const Matrix H = spec.cost.R + dyn.B.transpose() * policy.P[t + 1] * dyn.B;
    const Matrix F = policy.feedforward(t);
    own += (F.transpose() * H * F * Sd).trace();
    const Matrix U = policy.K[t] * policy.G[t] + F;
    pairs += (Rt * U * So * U.transpose()).trace() + (Qt * policy.G[t] * So * policy.G[t].transpose()).trace();
  }
  const double per_dm = (own + pop.pair_factor() * pairs) / T;
  if (pop.mean_field()) return per_dm;
  const int N = pop.n;
  return N * per_dm;
}

/// The two literal readings of the published closed-form optimal cost for
/// the two-DM problem, differing in the power of A' in the cross term.
struct OptcostVariants {
  double exact = 0.0;          // predicted_cost
  double power_t = 0.0;        // (A')^t
  double power_t_minus_1 = 0.0;  // (A')^{t-1}
  double diff_power_t = 0.0;
  double diff_power_t_minus_1 = 0.0;
  bool power_t_matches = false;
  bool power_t_minus_1_matches = false;
};

inline OptcostVariants literal_optcost_variants(const TeamSpec& spec, const TreePolicy& policy,
                                                double match_tol = 1e-8) {
  if (policy.population.mode != PopulationMode::two_dm)
    throw ValidationError("tree_solver.literal_optcost_variants: two_dm policy required");
  const int T = policy.horizon;
  const auto& dyn = spec.homogeneous();
  const Matrix& Sd = spec.noise.init_diag;
  const Matrix& W = spec.noise.sigma_w;
  const Matrix& Sg = policy.Sigma;
  const Matrix Ecc = Sg * Sd * Sg.transpose();

  double base = (policy.P[0] * Sd).trace();
  for (int t = 0; t < T; ++t) {
    base += (policy.P[t] * W).trace();
    base += (policy.L[t].transpose() * dyn.B.transpose() * policy.P[t + 1] * dyn.B * policy.L[t] * Ecc).trace();
  }
  auto cross = [&](int shift) {
    double acc = 0.0;
    for (int t = 1; t < T; ++t) {
      const int power = t - shift;
      Matrix Ap = Matrix::Identity(dyn.A.rows(), dyn.A.rows());
      for (int k = 0; k < power; ++k) Ap = dyn.A.transpose() * Ap;
      acc += (Ap * policy.P[t + 1] * dyn.B * policy.L[t] * Sg * Sd).trace();
    }
    return acc;
  };
  OptcostVariants out;
  out.exact = predicted_cost(spec, policy);
  out.power_t = 2.0 / T * (base + cross(0));
  out.power_t_minus_1 = 2.0 / T * (base + cross(1));
  out.diff_power_t = out.power_t - out.exact;
  out.diff_power_t_minus_1 = out.power_t_minus_1 - out.exact;
  out.power_t_matches = std::abs(out.diff_power_t) <= match_tol * (1.0 + std::abs(out.exact));
  out.power_t_minus_1_matches = std::abs(out.diff_power_t_minus_1) <= match_tol * (1.0 + std::abs(out.exact));
  return out;
}

// ---------------------------------------------------------------------------
// Infinite horizon (average cost).

struct InfiniteTreeOptions {
  double tol = 1e-7;        // prefix disagreement under horizon doubling
  double decay_tol = 1e-8;  // |L_t| threshold for the reported decay horizon
  int start_horizon = 8;
  int horizon_cap = 4096;
  DareOptions dare{};
};

struct InfiniteTreeSolution {
  Population population;
  Matrix K;
  Matrix P;
  DareSolution dare;
  double closed_loop_radius = 0.0;
  std::vector<Matrix> L;  // L_t^(inf) for t < converged_horizon / 2; zero beyond
  int converged_horizon = 0;
  int decay_horizon = 0;  // first t with |L_s| < decay_tol for all s >= t
  std::vector<std::pair<int, double>> disagreement;  // (T, prefix disagreement vs 2T)
  double average_cost = 0.0;
  Matrix Sigma;
};

/// Stationary K from the DARE and L_t^(inf) as the pointwise limit of the
/// finite-horizon coupling gains, detected by horizon doubling.
inline InfiniteTreeSolution solve_infinite_tree(const TeamSpec& spec, const InfiniteTreeOptions& opts = {}) {
  detail::require_tree_spec(spec, "tree_solver.solve_infinite_tree");
  const Population pop = population_of(spec);
  const auto& dyn = spec.homogeneous();
  InfiniteTreeSolution out;
  out.population = pop;
  out.dare = dare_solve(dyn.A, dyn.B, spec.cost.Q, spec.cost.R, opts.dare);
  out.K = out.dare.K;
  out.P = out.dare.P;
  out.closed_loop_radius = spectral_radius(dyn.A + dyn.B * out.K);
  if (!(out.closed_loop_radius < 1.0)) {
    std::ostringstream os;
    os << "tree_solver.solve_infinite_tree: closed loop not stable (spectral radius "
       << out.closed_loop_radius << ")";
    throw NumericalError(os.str(), out.closed_loop_radius);
  }
  out.Sigma = conditional_gain(spec.noise);

  int T = std::max(1, opts.start_horizon);
  TreePolicy prev = solve_tree(spec, T, pop);
  double last = 0.0;
  std::vector<double> series;
  while (true) {
    const int T2 = 2 * T;
    if (T2 > opts.horizon_cap) {
      std::ostringstream os;
      os << "tree_solver.solve_infinite_tree: L_t did not converge under horizon doubling up to "
         << opts.horizon_cap << " (last prefix disagreement " << last << ")";
      throw NumericalError(os.str(), last, series);
    }
    TreePolicy next = solve_tree(spec, T2, pop);
    double d = 0.0;
    for (int t = 0; t < T; ++t) d = std::max(d, linalg::max_abs(prev.L[t] - next.L[t]));
    out.disagreement.emplace_back(T, d);
    series.push_back(d);
    last = d;
    if (d < opts.tol) {
      out.converged_horizon = T2;
      out.L.assign(next.L.begin(), next.L.begin() + T);
      break;
    }
    prev = std::move(next);
    T = T2;
  }
  out.decay_horizon = static_cast<int>(out.L.size());
  for (int t = static_cast<int>(out.L.size()) - 1; t >= 0; --t) {
    if (linalg::max_abs(out.L[t]) >= opts.decay_tol) break;
    out.decay_horizon = t;
  }
  const double per_dm = (out.P * spec.noise.sigma_w).trace();
  out.average_cost = pop.mean_field() ? per_dm : pop.n * per_dm;
  return out;
}

/// (1/T) sum_t |P_t^(T) - P| for the Cesaro-mean argument.
inline double cesaro_gap(const TeamSpec& spec, int T, const Matrix& P_inf) {
  const KpSchedule kp = solve_k_p(spec, T);
  double acc = 0.0;
  for (int t = 0; t < T; ++t) acc += (kp.P[t] - P_inf).norm();
  return acc / T;
}

// ---------------------------------------------------------------------------
// Mean-field limit.

struct MeanFieldLimitOptions {
  int n_start = 2;
  int n_cap = 512;
  double tol = 1e-7;
};

struct MeanFieldLimit {
  TreePolicy policy;  // mean_field_limit mode
  std::vector<int> schedule;
  std::vector<std::vector<Matrix>> L_series;  // per N in schedule
  std::vector<double> successive_diff;        // |L^(N_k) - L^(N_{k-1})|, k >= 1
};

inline TeamSpec with_population(const TeamSpec& spec, int N) {
  TeamSpec out = spec;
  out.n_dm = N;
  return out;
}

/// Runs the mean_field_N solver over a doubling N schedule and returns the
/// limit gains when the schedule is Cauchy to tol at its end.
inline MeanFieldLimit meanfield_limit_policy(const TeamSpec& spec, int T, const MeanFieldLimitOptions& opts = {}) {
  if (spec.info.kind != InfoKind::meanfield)
    throw ValidationError("tree_solver.meanfield_limit_policy: meanfield spec required");
  MeanFieldLimit out;
  for (int N = std::max(2, opts.n_start); N <= opts.n_cap; N *= 2) {
    const TeamSpec sN = with_population(spec, N);
    require_valid(sN, "tree_solver.meanfield_limit_policy");
    TreePolicy pol = solve_tree(sN, T, {PopulationMode::mean_field_n, N});
    if (!out.L_series.empty()) {
      double d = 0.0;
      for (int t = 0; t < T; ++t) d = std::max(d, linalg::max_abs(pol.L[t] - out.L_series.back()[t]));
      out.successive_diff.push_back(d);
    }
    out.schedule.push_back(N);
    out.L_series.push_back(pol.L);
    out.policy = std::move(pol);
  }
  if (out.schedule.size() < 2 || out.successive_diff.back() >= opts.tol) {
    std::ostringstream os;
    os << "tree_solver.meanfield_limit_policy: no Cauchy behaviour over the N schedule (last difference "
       << (out.successive_diff.empty() ? 0.0 : out.successive_diff.back()) << ")";
    throw NumericalError(os.str(), out.successive_diff.empty() ? 0.0 : out.successive_diff.back(),
                         out.successive_diff);
  }
  TreePolicy& lim = out.policy;
  lim.population = {PopulationMode::mean_field_limit, 0};
  const auto& dyn = spec.homogeneous();
  lim.G = detail::mean_propagation(dyn.A, dyn.B, lim.K, lim.L, lim.Sigma, 1.0);
  return out;
}

}  // namespace lqteam
