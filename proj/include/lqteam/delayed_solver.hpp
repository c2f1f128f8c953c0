#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "lqteam/errors.hpp"
#include "lqteam/info_graph.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/riccati.hpp"
#include "lqteam/team_model.hpp"

namespace lqteam {

/// Controller u_t^i = sum_{r containing i} I^{{i},r} K_t^r zeta_t^r built on
/// the information graph. Stationary policies store a single stage.
struct GraphPolicy {
  InfoGraph graph;
  int horizon = 0;
  bool stationary = false;
  std::vector<std::vector<Matrix>> K;  // [t][node], |r|m x |r|n
  std::vector<std::vector<Matrix>> X;  // [t][node], |r|n x |r|n; t = 0..T (finite)

  const Matrix& gain(int t, int r) const { return stationary ? K[0][r] : K.at(t).at(r); }
  const Matrix& value(int t, int r) const { return stationary ? X[0][r] : X.at(t).at(r); }
};

/// Node-partitioned problem data.
struct NodeData {
  std::vector<Matrix> A_sr, B_sr;  // indexed by r, with s = successor(r)
  std::vector<Matrix> Q_rr, R_rr, S_rr;
};

namespace detail {

inline void require_delayed(const TeamSpec& spec, const char* who) {
  if (spec.info.kind != InfoKind::delayed)
    throw ValidationError(std::string(who) + ": delayed information structure required");
  require_valid(spec, who);
  const auto rep = validate_sparsity(spec.info.delays, spec.blocked());
  if (!rep.ok()) {
    std::string msg = std::string(who) + ": sparsity validation failed:";
    for (const auto& f : rep.failures()) msg += " [" + f + "]";
    throw ValidationError(msg);
  }
}

inline Matrix full_S(const TeamSpec& spec) {
  const auto N = spec.n_dm;
  return spec.cost.S.size() ? spec.cost.S
                            : Matrix::Zero(N * spec.n_state(), N * spec.n_input());
}

inline std::string stage_label(int r, int t, const InfoGraph& g) {
  return "node " + node_label(g.nodes[r]) + " stage " + std::to_string(t);
}

}  // namespace detail

inline NodeData node_data(const TeamSpec& spec, const InfoGraph& g) {
  const auto& dyn = spec.blocked();
  const Matrix A = dyn.full_A();
  const Matrix B = dyn.full_B();
  const Matrix S = detail::full_S(spec);
  const auto n = spec.n_state();
  const auto m = spec.n_input();
  NodeData d;
  for (int r = 0; r < g.size(); ++r) {
    const DmSet& rs = g.nodes[r];
    const DmSet& ss = g.nodes[g.successor[r]];
    d.A_sr.push_back(partition(A, ss, rs, n, n));
    d.B_sr.push_back(partition(B, ss, rs, n, m));
    d.Q_rr.push_back(partition(spec.cost.Q, rs, rs, n, n));
    d.R_rr.push_back(partition(spec.cost.R, rs, rs, m, m));
    d.S_rr.push_back(partition(S, rs, rs, n, m));
  }
  return d;
}

/// One backward step at node r from the successor's value X_next:
///   K = -(R^rr + B'X B)^{-1} (S^rr' + B'X A),  X = Q^rr + A'X A - K'(R^rr + B'X B)K.
inline RiccatiStep node_step(const NodeData& d, int r, const Matrix& X_next, const InfoGraph& g, int t) {
  const Matrix H = d.R_rr[r] + d.B_sr[r].transpose() * X_next * d.B_sr[r];
  if (!linalg::is_pd(H)) {
    throw NumericalError("delayed_solver: inner matrix R^rr + B'XB not positive definite at " +
                         detail::stage_label(r, t, g));
  }
  return riccati_step(d.A_sr[r], d.B_sr[r], d.Q_rr[r], d.R_rr[r], d.S_rr[r], X_next);
}

struct DelayedSolution {
  GraphPolicy policy;
  double predicted_cost = 0.0;
};

/// Expected cost (1/T) E[sum_t stage + x_T'Q x_T] from the node values:
///   (1/T)[sum_i Tr((X_0^{s_0^i})^{ii} Sd) + sum_t sum_i Tr((X_{t+1}^{s_0^i})^{ii} W)].
inline double delayed_predicted_cost(const TeamSpec& spec, const GraphPolicy& policy) {
  const auto& g = policy.graph;
  const auto n = spec.n_state();
  auto ii_block = [&](const Matrix& X, int r, int i) {
    const int p = g.position(r, i);
    return X.block(p * n, p * n, n, n);
  };
  const int T = policy.horizon;
  double acc = 0.0;
  for (int i = 0; i < spec.n_dm; ++i) {
    const int r = g.root[i];
    acc += (ii_block(policy.value(0, r), r, i) * spec.noise.init_diag).trace();
    for (int t = 0; t < T; ++t) acc += (ii_block(policy.value(t + 1, r), r, i) * spec.noise.sigma_w).trace();
  }
  return acc / T;
}

inline DelayedSolution solve_delayed_finite(const TeamSpec& spec, int T) {
  detail::require_delayed(spec, "delayed_solver.solve_delayed_finite");
  if (T < 1) throw ValidationError("delayed_solver.solve_delayed_finite: horizon must be >= 1");
  DelayedSolution out;
  GraphPolicy& pol = out.policy;
  pol.graph = build_info_graph(spec.info.delays);
  pol.horizon = T;
  const NodeData d = node_data(spec, pol.graph);
  const int M = pol.graph.size();
  pol.X.assign(T + 1, std::vector<Matrix>(M));
  pol.K.assign(T, std::vector<Matrix>(M));
  for (int r = 0; r < M; ++r) pol.X[T][r] = d.Q_rr[r];
  for (int t = T - 1; t >= 0; --t) {
    for (int r = 0; r < M; ++r) {
      RiccatiStep step = node_step(d, r, pol.X[t + 1][pol.graph.successor[r]], pol.graph, t);
      pol.K[t][r] = std::move(step.K);
      pol.X[t][r] = std::move(step.P);
    }
  }
  out.predicted_cost = delayed_predicted_cost(spec, pol);
  return out;
}

inline DelayedSolution solve_delayed_finite(const TeamSpec& spec) {
  return solve_delayed_finite(spec, spec.horizon);
}

// ---------------------------------------------------------------------------
// Estimator.

struct EstimatorTrace {
  std::vector<std::vector<Vector>> zeta;  // [t][node], t = 0..T
  std::vector<Vector> u;                  // [t] stacked inputs, t = 0..T-1
  std::vector<Vector> x;                  // [t] stacked states from the true dynamics, t = 0..T
};

/// Runs the zeta recursion
///   zeta_{t+1}^s = sum_{r -> s} (A^sr + B^sr K_t^r) zeta_t^r + sum_{i: s = s_0^i} I^{s,{i}} w_t^i,
///   zeta_0^s = sum_{i: s = s_0^i} I^{s,{i}} x_0^i,
/// and the true closed loop alongside it. x0 is the stacked initial state and
/// w[t] the stacked disturbance.
inline EstimatorTrace simulate_estimator(const TeamSpec& spec, const GraphPolicy& policy, const Vector& x0,
                                         const std::vector<Vector>& w) {
  const auto& g = policy.graph;
  const int N = spec.n_dm;
  const auto n = spec.n_state();
  const auto m = spec.n_input();
  const int T = static_cast<int>(w.size());
  if (!policy.stationary && T > policy.horizon)
    throw ValidationError("delayed_solver.simulate_estimator: more stages than policy gains");
  for (int t = 0; t < (policy.stationary ? 1 : T); ++t) {
    for (int r = 0; r < g.size(); ++r) {
      if (policy.gain(t, r).size() == 0)
        throw ValidationError("delayed_solver.simulate_estimator: missing gain at " + detail::stage_label(r, t, g));
    }
  }
  const NodeData d = node_data(spec, g);
  const auto& dyn = spec.blocked();
  const Matrix A = dyn.full_A();
  const Matrix B = dyn.full_B();

  auto inject = [&](std::vector<Vector>& z, const Vector& v) {
    for (int i = 0; i < N; ++i) {
      const int r = g.root[i];
      z[r].segment(g.position(r, i) * n, n) += v.segment(i * n, n);
    }
  };
  auto zeros = [&]() {
    std::vector<Vector> z(g.size());
    for (int r = 0; r < g.size(); ++r) z[r] = Vector::Zero(static_cast<Eigen::Index>(g.nodes[r].size()) * n);
    return z;
  };

  EstimatorTrace tr;
  tr.zeta.push_back(zeros());
  inject(tr.zeta[0], x0);
  tr.x.push_back(x0);
  for (int t = 0; t < T; ++t) {
    Vector u = Vector::Zero(N * m);
    std::vector<Vector> next = zeros();
    for (int r = 0; r < g.size(); ++r) {
      const Vector ur = policy.gain(t, r) * tr.zeta[t][r];
      const auto& nodes = g.nodes[r];
      for (std::size_t p = 0; p < nodes.size(); ++p) u.segment(nodes[p] * m, m) += ur.segment(p * m, m);
      next[g.successor[r]] += d.A_sr[r] * tr.zeta[t][r] + d.B_sr[r] * ur;
    }
    inject(next, w[t]);
    tr.u.push_back(u);
    tr.x.push_back(A * tr.x[t] + B * u + w[t]);
    tr.zeta.push_back(std::move(next));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Infinite horizon.

struct RankConditionResult {
  bool passed = true;
  bool marginal = false;
  double min_relative_sv = 0.0;
  double worst_theta = 0.0;
  /// Same grid with R^ss in place of the D factor; evaluated only when the
  /// blocks conform (state and input dimensions of the node agree).
  bool literal_evaluated = false;
  bool literal_passed = false;
  double literal_min_relative_sv = 0.0;
};

struct DelayedInfiniteOptions {
  int theta_grid = 720;
  double rank_threshold = 1e-10;
  double marginal_threshold = 1e-8;
  DareOptions dare{};
};

/// Full-column-rank test of [A - e^{i theta} I, B; C, D] over a uniform theta
/// grid, with [C D]'[C D] = [Q S; S' R].
inline RankConditionResult unit_circle_rank_condition(const Matrix& A, const Matrix& B, const Matrix& Q,
                                                      const Matrix& R, const Matrix& S,
                                                      const DelayedInfiniteOptions& opts = {}) {
  using cd = std::complex<double>;
  const auto n = A.rows();
  const auto m = B.cols();
  Matrix J(n + m, n + m);
  J << Q, S, S.transpose(), R;
  const Matrix CD = linalg::psd_factor(J).transpose();  // (n+m) x (n+m), CD'CD = J
  const Matrix C = CD.leftCols(n);
  const Matrix D = CD.rightCols(m);
  const Matrix Cq = linalg::psd_sqrt(Q);

  RankConditionResult res;
  res.min_relative_sv = std::numeric_limits<double>::infinity();
  res.literal_evaluated = n == m;
  res.literal_min_relative_sv = std::numeric_limits<double>::infinity();
  for (int k = 0; k < opts.theta_grid; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / opts.theta_grid;
    const cd z = std::polar(1.0, theta);
    ComplexMatrix M(n + C.rows(), n + m);
    M.topLeftCorner(n, n) = A.cast<cd>() - z * ComplexMatrix::Identity(n, n);
    M.topRightCorner(n, m) = B.cast<cd>();
    M.bottomLeftCorner(C.rows(), n) = C.cast<cd>();
    M.bottomRightCorner(C.rows(), m) = D.cast<cd>();
    const double sv = linalg::relative_min_singular_value(M);
    if (sv < res.min_relative_sv) {
      res.min_relative_sv = sv;
      res.worst_theta = theta;
    }
    if (res.literal_evaluated) {
      ComplexMatrix L(2 * n, n + m);
      L.topLeftCorner(n, n) = M.topLeftCorner(n, n);
      L.topRightCorner(n, m) = B.cast<cd>();
      L.bottomLeftCorner(n, n) = Cq.cast<cd>();
      L.bottomRightCorner(m, m) = R.cast<cd>();
      res.literal_min_relative_sv = std::min(res.literal_min_relative_sv, linalg::relative_min_singular_value(L));
    }
  }
  res.passed = res.min_relative_sv > opts.rank_threshold;
  res.marginal = res.passed && res.min_relative_sv < opts.marginal_threshold;
  res.literal_passed = res.literal_evaluated && res.literal_min_relative_sv > opts.rank_threshold;
  return res;
}

struct DelayedInfiniteSolution {
  GraphPolicy policy;  // stationary
  std::vector<RankConditionResult> rank_checks;  // per node; only self-loop nodes are filled
  double closed_loop_radius = 0.0;
  double average_cost = 0.0;
};

/// Closed-loop transition of the stacked zeta state under stationary gains.
inline Matrix zeta_closed_loop(const TeamSpec& spec, const GraphPolicy& policy) {
  const auto& g = policy.graph;
  const NodeData d = node_data(spec, g);
  const auto n = spec.n_state();
  std::vector<Eigen::Index> offset(g.size() + 1, 0);
  for (int r = 0; r < g.size(); ++r) offset[r + 1] = offset[r] + static_cast<Eigen::Index>(g.nodes[r].size()) * n;
  Matrix Z = Matrix::Zero(offset.back(), offset.back());
  for (int r = 0; r < g.size(); ++r) {
    const int s = g.successor[r];
    Z.block(offset[s], offset[r], d.A_sr[r].rows(), d.A_sr[r].cols()) += d.A_sr[r] + d.B_sr[r] * policy.gain(0, r);
  }
  return Z;
}

inline DelayedInfiniteSolution solve_delayed_infinite(const TeamSpec& spec, const DelayedInfiniteOptions& opts = {}) {
  detail::require_delayed(spec, "delayed_solver.solve_delayed_infinite");
  DelayedInfiniteSolution out;
  GraphPolicy& pol = out.policy;
  pol.graph = build_info_graph(spec.info.delays);
  pol.stationary = true;
  const auto& g = pol.graph;
  const NodeData d = node_data(spec, g);
  const int M = g.size();
  pol.K.assign(1, std::vector<Matrix>(M));
  pol.X.assign(1, std::vector<Matrix>(M));
  out.rank_checks.resize(M);

  std::vector<bool> done(M, false);
  for (int s = 0; s < M; ++s) {
    if (!g.self_loop(s)) continue;
    const std::string where = "node " + node_label(g.nodes[s]);
    if (!is_stabilizable(d.A_sr[s], d.B_sr[s])) {
      throw ValidationError("delayed_solver.solve_delayed_infinite: precondition failed at " + where +
                            ": (A^ss, B^ss) is not stabilizable");
    }
    out.rank_checks[s] = unit_circle_rank_condition(d.A_sr[s], d.B_sr[s], d.Q_rr[s], d.R_rr[s], d.S_rr[s], opts);
    if (!out.rank_checks[s].passed) {
      std::ostringstream os;
      os << "delayed_solver.solve_delayed_infinite: precondition failed at " << where
         << ": rank condition fails at theta = " << out.rank_checks[s].worst_theta
         << " (relative singular value " << out.rank_checks[s].min_relative_sv << ")";
      throw ValidationError(os.str());
    }
    DareSolution sol = dare_solve(d.A_sr[s], d.B_sr[s], d.Q_rr[s], d.R_rr[s], d.S_rr[s], opts.dare);
    pol.X[0][s] = sol.P;
    pol.K[0][s] = sol.K;
    done[s] = true;
  }
  // Remaining nodes reach a self-loop within N steps; resolve them from their successors.
  for (int pass = 0; pass <= spec.n_dm + 1; ++pass) {
    for (int r = 0; r < M; ++r) {
      if (done[r] || !done[g.successor[r]]) continue;
      RiccatiStep step = node_step(d, r, pol.X[0][g.successor[r]], g, 0);
      pol.K[0][r] = std::move(step.K);
      pol.X[0][r] = std::move(step.P);
      done[r] = true;
    }
  }
  for (int r = 0; r < M; ++r) {
    if (!done[r]) throw NumericalError("delayed_solver.solve_delayed_infinite: node " + node_label(g.nodes[r]) +
                                       " does not reach a self-loop");
  }
  out.closed_loop_radius = spectral_radius(zeta_closed_loop(spec, pol));
  if (!(out.closed_loop_radius < 1.0)) {
    std::ostringstream os;
    os << "delayed_solver.solve_delayed_infinite: zeta closed loop not stable (spectral radius "
       << out.closed_loop_radius << ")";
    throw NumericalError(os.str(), out.closed_loop_radius);
  }
  const auto n = spec.n_state();
  for (int i = 0; i < spec.n_dm; ++i) {
    const int r = g.root[i];
    const int p = g.position(r, i);
    out.average_cost += (pol.X[0][r].block(p * n, p * n, n, n) * spec.noise.sigma_w).trace();
  }
  return out;
}

}  // namespace lqteam
