#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "lqteam/errors.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/moments.hpp"
#include "lqteam/policy.hpp"
#include "lqteam/rng.hpp"
#include "lqteam/team_model.hpp"

namespace lqteam {

struct Trajectory {
  std::vector<std::vector<Vector>> x;  // [t][i], t = 0..T
  std::vector<std::vector<Vector>> u;  // [t][i], t = 0..T-1
  double cost = 0.0;
};

/// Closed-loop rollouts of disturbance-feedback policies, accumulating the
/// team cost of the problem (structured O(N) evaluation for exchangeable costs).
class RolloutEngine {
 public:
  RolloutEngine(const TeamSpec& spec, int T) : spec_(spec), T_(T), form_(cost_form(spec)) {
    stacked_dynamics(spec, A_, B_);
    if (!spec.is_blocked()) {
      const auto& c = spec.cost;
      s_ = pair_weight(spec);
      Rt_ = has_matrix(c.R_tilde) ? c.R_tilde : Matrix::Zero(c.R.rows(), c.R.rows());
      Qt_ = has_matrix(c.Q_tilde) ? c.Q_tilde : Matrix::Zero(c.Q.rows(), c.Q.rows());
      coupled_u_ = has_matrix(c.R_tilde) && spec.n_dm > 1;
      coupled_x_ = has_matrix(c.Q_tilde) && spec.n_dm > 1;
    }
  }

  int horizon() const { return T_; }

  double run(const LinearPolicySet& p, const Primitives& prim, Trajectory* traj = nullptr) const {
    const int N = spec_.n_dm;
    const auto m = spec_.n_input();
    auto xi = [&](int j, int tau) -> const Vector& { return tau == 0 ? prim.x0[j] : prim.w[tau - 1][j]; };

    std::vector<Vector> x = prim.x0;
    std::vector<Vector> u(N, Vector::Zero(m));
    if (traj) {
      traj->x.assign(1, x);
      traj->u.clear();
    }
    double acc = 0.0;
    for (int t = 0; t < T_; ++t) {
      for (int i = 0; i < N; ++i) {
        const StageMap& s = p.maps[i][t];
        u[i] = s.offset;
        for (const auto& term : s.terms) u[i].noalias() += term.gain * xi(term.source, term.tau);
      }
      acc += stage_cost(x, u);
      if (traj) traj->u.push_back(u);
      advance(x, u, prim.w[t]);
      if (traj) traj->x.push_back(x);
    }
    if (form_.terminal) acc += terminal_cost(x);
    const double cost = form_.per_dm_scale * acc / T_;
    if (traj) traj->cost = cost;
    return cost;
  }

 private:
  double stage_cost(const std::vector<Vector>& x, const std::vector<Vector>& u) const {
    const int N = spec_.n_dm;
    if (spec_.is_blocked()) {
      const Vector X = stack(x);
      const Vector U = stack(u);
      return X.dot(form_.Q * X) + 2.0 * X.dot(form_.S * U) + U.dot(form_.R * U);
    }
    const auto& c = spec_.cost;
    double acc = 0.0;
    for (int i = 0; i < N; ++i) acc += x[i].dot(c.Q * x[i]) + u[i].dot(c.R * u[i]);
    if (coupled_u_) acc += s_ * pair_sum(u, Rt_);
    if (coupled_x_) acc += s_ * pair_sum(x, Qt_);
    return acc;
  }

  // sum_{i != j} v_i' M v_j = (sum v)' M (sum v) - sum v_i' M v_i
  static double pair_sum(const std::vector<Vector>& v, const Matrix& M) {
    Vector total = Vector::Zero(v[0].size());
    double diag = 0.0;
    for (const auto& vi : v) {
      total += vi;
      diag += vi.dot(M * vi);
    }
    return total.dot(M * total) - diag;
  }

  double terminal_cost(const std::vector<Vector>& x) const {
    const Vector X = stack(x);
    return X.dot(form_.Q * X);
  }

  void advance(std::vector<Vector>& x, const std::vector<Vector>& u, const std::vector<Vector>& w) const {
    const int N = spec_.n_dm;
    if (spec_.is_blocked()) {
      const auto n = spec_.n_state();
      const Vector X = A_ * stack(x) + B_ * stack(u);
      for (int i = 0; i < N; ++i) x[i] = X.segment(i * n, n) + w[i];
      return;
    }
    const auto& dyn = spec_.homogeneous();
    for (int i = 0; i < N; ++i) x[i] = dyn.A * x[i] + dyn.B * u[i] + w[i];
  }

  static Vector stack(const std::vector<Vector>& v) {
    const auto k = v[0].size();
    Vector out(k * static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out.segment(static_cast<Eigen::Index>(i) * k, k) = v[i];
    return out;
  }

  const TeamSpec& spec_;
  int T_;
  CostForm form_;
  Matrix A_, B_;
  double s_ = 1.0;
  Matrix Rt_, Qt_;
  bool coupled_u_ = false;
  bool coupled_x_ = false;
};

struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error (sample std / sqrt(n)) with compensated sums.
inline SampleStats sample_stats(const std::vector<double>& v) {
  SampleStats s;
  if (v.empty()) return s;
  linalg::CompensatedSum sum;
  for (double x : v) sum.add(x);
  s.mean = sum.value() / static_cast<double>(v.size());
  if (v.size() < 2) return s;
  linalg::CompensatedSum sq;
  for (double x : v) sq.add((x - s.mean) * (x - s.mean));
  s.std_error = std::sqrt(sq.value() / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return s;
}

struct RunOptions {
  std::int64_t n_rollouts = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::int64_t index_offset = 0;  // first rollout index; disjoint ranges give independent estimates
};

/// Per-rollout costs of several policies under common random numbers:
/// out[p][k] is the cost of policy p on rollout k.
inline std::vector<std::vector<double>> rollout_costs(const TeamSpec& spec,
                                                      const std::vector<const LinearPolicySet*>& policies,
                                                      const RunOptions& opts) {
  if (policies.empty()) return {};
  const int T = policies[0]->horizon;
  for (const auto* p : policies) {
    if (p->horizon != T) throw ValidationError("simulator: policies must share the horizon");
    check_measurable(spec, *p);
  }
  if (opts.n_rollouts < 1) throw ValidationError("simulator: n_rollouts must be positive");
  const RolloutEngine engine(spec, T);
  const PrimitiveSampler sampler(spec, T);
  std::vector<std::vector<double>> out(policies.size(), std::vector<double>(opts.n_rollouts));
  auto work = [&](int worker, int n_workers) {
    Primitives prim;
    for (std::int64_t k = worker; k < opts.n_rollouts; k += n_workers) {
      auto gen = rollout_stream(opts.seed, static_cast<std::uint64_t>(opts.index_offset + k));
      sampler.sample(gen, prim);
      for (std::size_t p = 0; p < policies.size(); ++p) out[p][k] = engine.run(*policies[p], prim);
    }
  };
  const int n_workers = std::max(1, opts.threads);
  if (n_workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
    for (auto& th : pool) th.join();
  }
  return out;
}

struct SimReport {
  double mean_cost = 0.0;
  double std_error = 0.0;
  std::int64_t n_rollouts = 0;
  std::uint64_t seed = 0;
  int horizon = 0;
  NoiseFamily family = NoiseFamily::gaussian;
};

inline SimReport simulate(const TeamSpec& spec, const LinearPolicySet& policy, const RunOptions& opts) {
  const auto costs = rollout_costs(spec, {&policy}, opts);
  const SampleStats st = sample_stats(costs[0]);
  SimReport r;
  r.mean_cost = st.mean;
  r.std_error = st.std_error;
  r.n_rollouts = opts.n_rollouts;
  r.seed = opts.seed;
  r.horizon = policy.horizon;
  r.family = spec.noise.family;
  return r;
}

inline bool within_sigmas(double delta, double se, double k = 3.0) { return std::abs(delta) <= k * se; }

// ---------------------------------------------------------------------------
// Structural checks.

struct DeltaReport {
  double delta = 0.0;      // mean of the paired differences
  double std_error = 0.0;  // of the paired differences
  double base_cost = 0.0;
  double other_cost = 0.0;
  bool within = true;      // |delta| <= 3 SE
  bool spec_exchangeable = true;
};

namespace detail {

inline std::vector<double> paired_difference(const std::vector<double>& a, const std::vector<double>& b,
                                             double wa = 1.0, double wb = -1.0) {
  std::vector<double> d(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) d[k] = wa * a[k] + wb * b[k];
  return d;
}

inline bool delays_invariant(const TeamSpec& spec, const std::vector<int>& sigma) {
  if (spec.info.kind != InfoKind::delayed) return true;
  const auto& D = spec.info.delays;
  for (int i = 0; i < spec.n_dm; ++i)
    for (int j = 0; j < spec.n_dm; ++j)
      if (D[i][j] != D[sigma[i]][sigma[j]]) return false;
  return true;
}

}  // namespace detail

/// Estimates J(gamma^sigma) - J(gamma) with common random numbers.
inline DeltaReport exchangeability_check(const TeamSpec& spec, const LinearPolicySet& policy,
                                         const std::vector<int>& sigma, const RunOptions& opts) {
  const LinearPolicySet perm = permuted(policy, sigma);
  DeltaReport r;
  const auto rep = validate(spec);
  const Check* ex = rep.find("exchangeable structure");
  r.spec_exchangeable = (ex == nullptr || ex->passed) && detail::delays_invariant(spec, sigma);
  const auto costs = rollout_costs(spec, {&policy, &perm}, opts);
  const SampleStats d = sample_stats(detail::paired_difference(costs[1], costs[0]));
  r.delta = d.mean;
  r.std_error = d.std_error;
  r.base_cost = sample_stats(costs[0]).mean;
  r.other_cost = sample_stats(costs[1]).mean;
  r.within = within_sigmas(r.delta, r.std_error);
  return r;
}

struct SymmetrizationReport {
  double cost_orig = 0.0;
  double cost_sym = 0.0;
  double delta = 0.0;      // cost_sym - cost_orig, paired
  double std_error = 0.0;  // of the paired difference
  int n_permutations = 0;
  bool sampled = false;
  bool passed = false;     // cost_sym <= cost_orig + 3 SE
};

inline SymmetrizationReport symmetrization_check(const TeamSpec& spec, const LinearPolicySet& policy,
                                                 const RunOptions& opts) {
  const SymmetrizedPolicy sym = symmetrize(policy, 720, opts.seed);
  const auto costs = rollout_costs(spec, {&policy, &sym.policy}, opts);
  const SampleStats d = sample_stats(detail::paired_difference(costs[1], costs[0]));
  SymmetrizationReport r;
  r.cost_orig = sample_stats(costs[0]).mean;
  r.cost_sym = sample_stats(costs[1]).mean;
  r.delta = d.mean;
  r.std_error = d.std_error;
  r.n_permutations = sym.n_permutations;
  r.sampled = sym.sampled;
  r.passed = r.delta <= 3.0 * r.std_error;
  return r;
}

struct ConvexityReport {
  double alpha = 0.0;
  double lhs = 0.0;  // J(alpha g1 + (1 - alpha) g2)
  double rhs = 0.0;  // alpha J(g1) + (1 - alpha) J(g2)
  double delta = 0.0;
  double std_error = 0.0;
  bool passed = false;  // lhs <= rhs + 3 SE
};

inline ConvexityReport convex_combination_check(const TeamSpec& spec, const LinearPolicySet& g1,
                                                const LinearPolicySet& g2, double alpha, const RunOptions& opts) {
  const LinearPolicySet mix = combine({&g1, &g2}, {alpha, 1.0 - alpha});
  const auto costs = rollout_costs(spec, {&mix, &g1, &g2}, opts);
  std::vector<double> d(costs[0].size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = costs[0][k] - alpha * costs[1][k] - (1.0 - alpha) * costs[2][k];
  const SampleStats st = sample_stats(d);
  ConvexityReport r;
  r.alpha = alpha;
  r.lhs = sample_stats(costs[0]).mean;
  r.rhs = alpha * sample_stats(costs[1]).mean + (1.0 - alpha) * sample_stats(costs[2]).mean;
  r.delta = st.mean;
  r.std_error = st.std_error;
  r.passed = r.delta <= 3.0 * r.std_error;
  return r;
}

struct PbpReport {
  double base_cost = 0.0;
  double max_decrease = 0.0;  // largest J(base) - J(perturbed) seen; <= 0 at an optimum up to rounding
  double threshold = 0.0;
  std::string worst;          // which entry gave max_decrease
  int evaluations = 0;
  bool passed = false;
};

namespace detail {

inline void pbp_record(PbpReport& r, double cost, const std::string& where) {
  ++r.evaluations;
  const double dec = r.base_cost - cost;
  if (r.evaluations == 1 || dec > r.max_decrease) {
    r.max_decrease = dec;
    r.worst = where;
  }
}

}  // namespace detail

/// Perturbs every per-DM gain entry by +/- step and evaluates the exact cost.
inline PbpReport pbp_check(const TeamSpec& spec, const FeedbackProfile& prof, double step = 1e-4,
                           double tol = 1e-7) {
  PbpReport r;
  r.base_cost = exact_cost(spec, from_feedback_profile(spec, prof));
  r.threshold = tol * std::max(1.0, std::abs(r.base_cost));
  FeedbackProfile work = prof;
  for (int i = 0; i < prof.n_dm(); ++i) {
    for (int t = 0; t < prof.horizon(); ++t) {
      for (int which = 0; which < 2; ++which) {
        Matrix& G = which == 0 ? work.K[i][t] : work.F[i][t];
        for (Eigen::Index a = 0; a < G.rows(); ++a) {
          for (Eigen::Index b = 0; b < G.cols(); ++b) {
            const double orig = G(a, b);
            for (double sgn : {1.0, -1.0}) {
              G(a, b) = orig + sgn * step;
              const std::string where = std::string(which == 0 ? "K" : "F") + " DM " + std::to_string(i + 1) +
                                        " t " + std::to_string(t) + " (" + std::to_string(a) + "," +
                                        std::to_string(b) + ")";
              detail::pbp_record(r, exact_cost(spec, from_feedback_profile(spec, work)), where);
            }
            G(a, b) = orig;
          }
        }
      }
    }
  }
  r.passed = r.max_decrease < r.threshold;
  return r;
}

inline PbpReport pbp_check(const TeamSpec& spec, const TreePolicy& pol, double step = 1e-4, double tol = 1e-7) {
  return pbp_check(spec, tree_profile(spec, pol), step, tol);
}

/// Perturbs every entry of every node gain K_t^r (each row block belongs to one DM).
inline PbpReport pbp_check(const TeamSpec& spec, const GraphPolicy& pol, double step = 1e-4, double tol = 1e-7,
                           int horizon = -1) {
  const int T = horizon < 0 ? pol.horizon : horizon;
  PbpReport r;
  r.base_cost = exact_cost(spec, from_graph_policy(spec, pol, T));
  r.threshold = tol * std::max(1.0, std::abs(r.base_cost));
  GraphPolicy work = pol;
  for (std::size_t t = 0; t < work.K.size(); ++t) {
    for (int node = 0; node < work.graph.size(); ++node) {
      Matrix& G = work.K[t][node];
      for (Eigen::Index a = 0; a < G.rows(); ++a) {
        for (Eigen::Index b = 0; b < G.cols(); ++b) {
          const double orig = G(a, b);
          for (double sgn : {1.0, -1.0}) {
            G(a, b) = orig + sgn * step;
            const std::string where = "K node " + node_label(work.graph.nodes[node]) + " t " + std::to_string(t) +
                                      " (" + std::to_string(a) + "," + std::to_string(b) + ")";
            detail::pbp_record(r, exact_cost(spec, from_graph_policy(spec, work, T)), where);
          }
          G(a, b) = orig;
        }
      }
    }
  }
  r.passed = r.max_decrease < r.threshold;
  return r;
}

struct CertaintyEquivalenceReport {
  bool gains_equal = false;
  PbpReport pbp;
  SimReport mc;
  double predicted_cost = 0.0;
  bool mc_within = false;
  bool passed = false;
};

inline bool same_gains(const TreePolicy& a, const TreePolicy& b) {
  if (a.horizon != b.horizon) return false;
  for (int t = 0; t < a.horizon; ++t) {
    if (a.K[t] != b.K[t] || a.L[t] != b.L[t]) return false;
  }
  return true;
}

/// Solves under the gaussian reference and under an alternative spec (by
/// default the same moments with uniform primitives), and checks (a) equal
/// gain schedules, (b) stationarity of the reference gains under the
/// alternative, (c) Monte Carlo cost under the alternative within 3 SE of
/// the reference prediction.
inline CertaintyEquivalenceReport certainty_equivalence_check(const TeamSpec& spec, const RunOptions& opts,
                                                              const TeamSpec* alternative = nullptr) {
  TeamSpec ref = spec;
  ref.noise.family = NoiseFamily::gaussian;
  TeamSpec alt = alternative ? *alternative : spec;
  if (!alternative) alt.noise.family = NoiseFamily::uniform;
  require_valid(ref, "simulator.certainty_equivalence_check");
  require_valid(alt, "simulator.certainty_equivalence_check");
  const TreePolicy pr = solve_tree(ref);
  const TreePolicy pa = solve_tree(alt);
  CertaintyEquivalenceReport r;
  r.gains_equal = same_gains(pr, pa);
  r.pbp = pbp_check(alt, pr);
  r.mc = simulate(alt, from_tree_policy(alt, pr), opts);
  r.predicted_cost = predicted_cost(ref, pr);
  r.mc_within = within_sigmas(r.mc.mean_cost - r.predicted_cost, r.mc.std_error);
  r.passed = r.gains_equal && r.pbp.passed && r.mc_within;
  return r;
}

// ---------------------------------------------------------------------------
// Mean-field sweep.

struct MftRow {
  int n = 0;
  double L_diff = 0.0;          // max |L^(N) - L^(previous N)|, 0 for the first row
  double L_limit_diff = 0.0;    // max |L^(N) - L^(inf)|
  double predicted_cost = 0.0;  // J^N(gamma^{*,N})
  double cost_diff = 0.0;       // predicted J^N - J^(previous N)
  double mc_cost = 0.0;
  double mc_se = 0.0;
  double mc_limit_cost = 0.0;   // J^N(gamma^{*,inf}) on an independent stream
  double mc_limit_se = 0.0;
  double gap = 0.0;             // mc_cost - mc_limit_cost
  double gap_se = 0.0;
  double first_moment_distance = 0.0;
  double second_moment_distance = 0.0;
  double ui_surrogate = 0.0;    // E|u^N - u^inf|^2 per DM and stage
};

struct MftTable {
  std::vector<MftRow> rows;
  std::vector<Matrix> L_limit;
  bool L_diff_monotone = true;
  double ui_sup = 0.0;
};

namespace detail {

// Per-DM sample z_i = (u_0..u_{T-1}, x_0..x_T) and its empirical moments.
inline void empirical_moments(const Trajectory& tr, int N, Vector& m1, Matrix& m2) {
  const int T = static_cast<int>(tr.u.size());
  const auto m = tr.u.empty() ? 0 : tr.u[0][0].size();
  const auto n = tr.x[0][0].size();
  const Eigen::Index dim = T * m + (T + 1) * n;
  m1 = Vector::Zero(dim);
  m2 = Matrix::Zero(dim, dim);
  Vector z(dim);
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) z.segment(t * m, m) = tr.u[t][i];
    for (int t = 0; t <= T; ++t) z.segment(T * m + t * n, n) = tr.x[t][i];
    m1 += z;
    m2 += z * z.transpose();
  }
  m1 /= N;
  m2 /= N;
}

// Successive differences may stall at rounding level once the series has converged.
inline constexpr double kMonotoneFloor = 1e-12;

}  // namespace detail

inline MftTable mft_sweep(const TeamSpec& spec, int T, const std::vector<int>& schedule, const RunOptions& opts) {
  if (spec.info.kind != InfoKind::meanfield) throw ValidationError("simulator.mft_sweep: meanfield spec required");
  if (schedule.size() < 3) throw ValidationError("simulator.mft_sweep: schedule needs at least 3 points");
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (schedule[k] < 2 || (k > 0 && schedule[k] <= schedule[k - 1]))
      throw ValidationError("simulator.mft_sweep: schedule must be increasing with N >= 2");
  }
  const MeanFieldLimit lim = meanfield_limit_policy(spec, T);
  MftTable table;
  table.L_limit = lim.policy.L;
  std::vector<Matrix> prev_L;
  double prev_cost = 0.0;
  for (int N : schedule) {
    const TeamSpec sN = with_population(spec, N);
    require_valid(sN, "simulator.mft_sweep");
    const TreePolicy pN = solve_tree(sN, T, {PopulationMode::mean_field_n, N});
    const LinearPolicySet gN = from_tree_policy(sN, pN);
    const LinearPolicySet gInf = from_tree_policy(sN, lim.policy);
    MftRow row;
    row.n = N;
    for (int t = 0; t < T; ++t) {
      if (!prev_L.empty()) row.L_diff = std::max(row.L_diff, linalg::max_abs(pN.L[t] - prev_L[t]));
      row.L_limit_diff = std::max(row.L_limit_diff, linalg::max_abs(pN.L[t] - lim.policy.L[t]));
    }
    row.predicted_cost = predicted_cost(sN, pN);
    row.cost_diff = prev_L.empty() ? 0.0 : row.predicted_cost - prev_cost;

    // Common random numbers for the empirical-measure diagnostics.
    const RolloutEngine engine(sN, T);
    const PrimitiveSampler sampler(sN, T);
    std::vector<double> cN(opts.n_rollouts), d1(opts.n_rollouts), d2(opts.n_rollouts), ui(opts.n_rollouts);
    auto work = [&](int worker, int n_workers) {
      Primitives prim;
      Trajectory a, b;
      Vector m1a, m1b;
      Matrix m2a, m2b;
      for (std::int64_t k = worker; k < opts.n_rollouts; k += n_workers) {
        auto gen = rollout_stream(opts.seed, static_cast<std::uint64_t>(opts.index_offset + k));
        sampler.sample(gen, prim);
        cN[k] = engine.run(gN, prim, &a);
        engine.run(gInf, prim, &b);
        detail::empirical_moments(a, N, m1a, m2a);
        detail::empirical_moments(b, N, m1b, m2b);
        d1[k] = linalg::max_abs(m1a - m1b);
        d2[k] = linalg::max_abs(m2a - m2b);
        double acc = 0.0;
        for (int t = 0; t < T; ++t)
          for (int i = 0; i < N; ++i) acc += (a.u[t][i] - b.u[t][i]).squaredNorm();
        ui[k] = acc / (static_cast<double>(N) * T);
      }
    };
    const int n_workers = std::max(1, opts.threads);
    if (n_workers == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
      for (auto& th : pool) th.join();
    }
    const SampleStats sN_stats = sample_stats(cN);
    row.mc_cost = sN_stats.mean;
    row.mc_se = sN_stats.std_error;
    row.first_moment_distance = sample_stats(d1).mean;
    row.second_moment_distance = sample_stats(d2).mean;
    row.ui_surrogate = sample_stats(ui).mean;

    // The limit policy's cost on a disjoint block of rollout indices.
    RunOptions indep = opts;
    indep.index_offset = opts.index_offset + opts.n_rollouts;
    const SimReport lim_rep = simulate(sN, gInf, indep);
    row.mc_limit_cost = lim_rep.mean_cost;
    row.mc_limit_se = lim_rep.std_error;
    row.gap = row.mc_cost - row.mc_limit_cost;
    row.gap_se = std::sqrt(row.mc_se * row.mc_se + row.mc_limit_se * row.mc_limit_se);

    table.ui_sup = std::max(table.ui_sup, row.ui_surrogate);
    if (table.rows.size() >= 2) {
      const double before = table.rows.back().L_diff;
      if (row.L_diff > std::max(before, detail::kMonotoneFloor)) table.L_diff_monotone = false;
    }
    table.rows.push_back(row);
    prev_L = pN.L;
    prev_cost = row.predicted_cost;
  }
  return table;
}

}  // namespace lqteam
