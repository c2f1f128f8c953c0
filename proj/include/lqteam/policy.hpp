#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lqteam/delayed_solver.hpp"
#include "lqteam/errors.hpp"
#include "lqteam/info_graph.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/team_model.hpp"
#include "lqteam/tree_solver.hpp"

namespace lqteam {

// Every policy the simulator runs is stored in disturbance-feedback form:
//   u_t^i = offset_t^i + sum_terms gain * xi(source, tau),
// with xi(j, 0) = x_0^j and xi(j, tau) = w_{tau-1}^j for tau >= 1. Affine
// state-feedback laws on partially nested structures map to this form
// exactly, and convex combinations of policies stay in it.

struct PolicyTerm {
  int source = 0;
  int tau = 0;
  Matrix gain;  // m x n
};

struct StageMap {
  std::vector<PolicyTerm> terms;
  Vector offset;  // m
};

struct LinearPolicySet {
  int n_dm = 0;
  int horizon = 0;
  Eigen::Index n_state = 0;
  Eigen::Index n_input = 0;
  std::vector<std::vector<StageMap>> maps;  // [i][t]
};

/// Per-DM affine state feedback on own information for tree and mean-field
/// problems: u_t^i = K_t^i x_t^i + F_t^i x_0^i + offset_t^i.
struct FeedbackProfile {
  std::vector<std::vector<Matrix>> K;       // [i][t]
  std::vector<std::vector<Matrix>> F;       // [i][t]
  std::vector<std::vector<Vector>> offset;  // [i][t]

  int n_dm() const { return static_cast<int>(K.size()); }
  int horizon() const { return K.empty() ? 0 : static_cast<int>(K[0].size()); }
};

/// Delay with which DM i can use primitives of DM j.
inline std::vector<std::vector<int>> information_delays(const TeamSpec& spec) {
  const int N = spec.n_dm;
  if (spec.info.kind == InfoKind::delayed) return shortest_delays(spec.info.delays);
  std::vector<std::vector<int>> D(N, std::vector<int>(N, kInfiniteDelay));
  for (int i = 0; i < N; ++i) D[i][i] = 0;
  return D;
}

inline LinearPolicySet zero_policy(const TeamSpec& spec, int T) {
  LinearPolicySet p;
  p.n_dm = spec.n_dm;
  p.horizon = T;
  p.n_state = spec.n_state();
  p.n_input = spec.n_input();
  p.maps.assign(p.n_dm, std::vector<StageMap>(T));
  for (auto& row : p.maps)
    for (auto& s : row) s.offset = Vector::Zero(p.n_input);
  return p;
}

/// Throws ValidationError when a map reads a primitive outside the DM's
/// information set, i.e. tau + D_ij > t, or when dimensions are inconsistent.
inline void check_measurable(const TeamSpec& spec, const LinearPolicySet& p) {
  const int N = spec.n_dm;
  if (p.n_dm != N || p.n_state != spec.n_state() || p.n_input != spec.n_input() ||
      static_cast<int>(p.maps.size()) != N) {
    throw ValidationError("simulator: policy dimensions do not match the problem");
  }
  const auto D = information_delays(spec);
  for (int i = 0; i < N; ++i) {
    if (static_cast<int>(p.maps[i].size()) != p.horizon)
      throw ValidationError("simulator: policy has inconsistent stage count");
    for (int t = 0; t < p.horizon; ++t) {
      const StageMap& s = p.maps[i][t];
      if (s.offset.size() != p.n_input) throw ValidationError("simulator: policy offset has wrong size");
      for (const auto& term : s.terms) {
        if (term.source < 0 || term.source >= N || term.tau < 0 || term.tau > t ||
            term.gain.rows() != p.n_input || term.gain.cols() != p.n_state) {
          throw ValidationError("simulator: malformed policy term for DM " + std::to_string(i + 1) +
                                " at stage " + std::to_string(t));
        }
        const int d = D[i][term.source];
        if (d == kInfiniteDelay || term.tau + d > t) {
          std::ostringstream os;
          os << "simulator: non-measurable policy: DM " << i + 1 << " at stage " << t << " reads "
             << (term.tau == 0 ? std::string("x_0") : "w_" + std::to_string(term.tau - 1)) << " of DM "
             << term.source + 1;
          throw ValidationError(os.str());
        }
      }
    }
  }
}

namespace detail {

/// Sorts terms by (source, tau), merges duplicates and drops exact zeros.
inline void canonicalize(StageMap& s) {
  std::map<std::pair<int, int>, Matrix> merged;
  for (auto& term : s.terms) {
    auto key = std::make_pair(term.source, term.tau);
    auto it = merged.find(key);
    if (it == merged.end()) {
      merged.emplace(key, std::move(term.gain));
    } else {
      it->second += term.gain;
    }
  }
  s.terms.clear();
  for (auto& [key, gain] : merged) {
    if (linalg::max_abs(gain) == 0.0) continue;
    s.terms.push_back({key.first, key.second, std::move(gain)});
  }
}

}  // namespace detail

inline void canonicalize(LinearPolicySet& p) {
  for (auto& row : p.maps)
    for (auto& s : row) detail::canonicalize(s);
}

/// Symbolic closed loop of each DM's own state under its feedback law.
inline LinearPolicySet from_feedback_profile(const TeamSpec& spec, const FeedbackProfile& prof) {
  const auto& dyn = spec.homogeneous();
  const int N = spec.n_dm;
  const int T = prof.horizon();
  if (prof.n_dm() != N) throw ValidationError("simulator: feedback profile has wrong DM count");
  const auto n = dyn.A.rows();
  const auto m = dyn.B.cols();
  LinearPolicySet p = zero_policy(spec, T);
  for (int i = 0; i < N; ++i) {
    // x_t^i = coef * [x_0; w_0; ...; w_{T-1}] + c.
    Matrix coef = Matrix::Zero(n, n * (T + 1));
    coef.leftCols(n).setIdentity();
    Vector c = Vector::Zero(n);
    for (int t = 0; t < T; ++t) {
      const Matrix& K = prof.K[i][t];
      const Matrix& F = prof.F[i][t];
      const Vector off = prof.offset.empty() || prof.offset[i].empty() ? Vector::Zero(m) : prof.offset[i][t];
      Matrix ucoef = K * coef;
      ucoef.leftCols(n) += F;
      const Vector uc = K * c + off;
      StageMap& s = p.maps[i][t];
      for (int tau = 0; tau <= t; ++tau) s.terms.push_back({i, tau, ucoef.middleCols(tau * n, n)});
      s.offset = uc;
      detail::canonicalize(s);
      coef = dyn.A * coef + dyn.B * ucoef;
      coef.middleCols((t + 1) * n, n) += Matrix::Identity(n, n);
      c = dyn.A * c + dyn.B * uc;
    }
  }
  return p;
}

inline FeedbackProfile tree_profile(const TeamSpec& spec, const TreePolicy& pol) {
  FeedbackProfile prof;
  const int N = spec.n_dm;
  const auto m = spec.n_input();
  prof.K.assign(N, pol.K);
  std::vector<Matrix> F(pol.horizon);
  for (int t = 0; t < pol.horizon; ++t) F[t] = pol.feedforward(t);
  prof.F.assign(N, F);
  prof.offset.assign(N, std::vector<Vector>(pol.horizon, Vector::Zero(m)));
  return prof;
}

inline LinearPolicySet from_tree_policy(const TeamSpec& spec, const TreePolicy& pol) {
  return from_feedback_profile(spec, tree_profile(spec, pol));
}

/// Propagates the zeta estimator symbolically over the primitives. T is the
/// number of stages to expand (defaults to the policy horizon).
inline LinearPolicySet from_graph_policy(const TeamSpec& spec, const GraphPolicy& pol, int T = -1) {
  if (T < 0) T = pol.horizon;
  if (T < 1) throw ValidationError("simulator: stationary graph policy needs an explicit horizon");
  const auto& g = pol.graph;
  const int N = spec.n_dm;
  const auto n = spec.n_state();
  const auto m = spec.n_input();
  const Eigen::Index dim = static_cast<Eigen::Index>(N) * n * (T + 1);
  auto col = [&](int j, int tau) { return (static_cast<Eigen::Index>(tau) * N + j) * n; };
  const NodeData d = node_data(spec, g);

  std::vector<Matrix> zeta(g.size());
  for (int r = 0; r < g.size(); ++r) zeta[r] = Matrix::Zero(static_cast<Eigen::Index>(g.nodes[r].size()) * n, dim);
  auto inject = [&](std::vector<Matrix>& z, int tau) {
    for (int i = 0; i < N; ++i) {
      const int r = g.root[i];
      z[r].block(g.position(r, i) * n, col(i, tau), n, n) += Matrix::Identity(n, n);
    }
  };
  inject(zeta, 0);

  LinearPolicySet p = zero_policy(spec, T);
  for (int t = 0; t < T; ++t) {
    Matrix U = Matrix::Zero(N * m, dim);
    std::vector<Matrix> next(g.size());
    for (int r = 0; r < g.size(); ++r) next[r] = Matrix::Zero(zeta[r].rows(), dim);
    for (int r = 0; r < g.size(); ++r) {
      const Matrix ur = pol.gain(t, r) * zeta[r];
      const auto& nodes = g.nodes[r];
      for (std::size_t q = 0; q < nodes.size(); ++q) U.middleRows(nodes[q] * m, m) += ur.middleRows(q * m, m);
      next[g.successor[r]] += d.A_sr[r] * zeta[r] + d.B_sr[r] * ur;
    }
    inject(next, t + 1);
    for (int i = 0; i < N; ++i) {
      StageMap& s = p.maps[i][t];
      for (int tau = 0; tau <= t; ++tau)
        for (int j = 0; j < N; ++j) s.terms.push_back({j, tau, U.block(i * m, col(j, tau), m, n)});
      detail::canonicalize(s);
    }
    zeta = std::move(next);
  }
  return p;
}

/// gamma^sigma: DM i applies the map of DM sigma[i], reading the primitives
/// relabelled into its own frame (source j of DM sigma[i] becomes sigma^{-1}(j)).
inline LinearPolicySet permuted(const LinearPolicySet& p, const std::vector<int>& sigma) {
  const int N = p.n_dm;
  if (static_cast<int>(sigma.size()) != N) throw ValidationError("simulator: permutation has wrong length");
  std::vector<int> inv(N, -1);
  for (int i = 0; i < N; ++i) {
    if (sigma[i] < 0 || sigma[i] >= N || inv[sigma[i]] != -1)
      throw ValidationError("simulator: not a permutation");
    inv[sigma[i]] = i;
  }
  LinearPolicySet out = p;
  for (int i = 0; i < N; ++i) {
    out.maps[i] = p.maps[sigma[i]];
    for (auto& s : out.maps[i]) {
      for (auto& term : s.terms) term.source = inv[term.source];
      detail::canonicalize(s);
    }
  }
  return out;
}

/// Convex combination sum_k w_k p_k of policies with the same shape.
inline LinearPolicySet combine(const std::vector<const LinearPolicySet*>& ps, const std::vector<double>& weights) {
  if (ps.empty() || ps.size() != weights.size()) throw ValidationError("simulator: combine needs matching weights");
  LinearPolicySet out = *ps[0];
  for (int i = 0; i < out.n_dm; ++i) {
    for (int t = 0; t < out.horizon; ++t) {
      StageMap& s = out.maps[i][t];
      s.terms.clear();
      s.offset.setZero();
      for (std::size_t k = 0; k < ps.size(); ++k) {
        const StageMap& src = ps[k]->maps[i][t];
        for (const auto& term : src.terms) s.terms.push_back({term.source, term.tau, weights[k] * term.gain});
        s.offset += weights[k] * src.offset;
      }
      detail::canonicalize(s);
    }
  }
  return out;
}

inline double policy_distance(const LinearPolicySet& a, const LinearPolicySet& b) {
  const LinearPolicySet d = combine({&a, &b}, {1.0, -1.0});
  double out = 0.0;
  for (const auto& row : d.maps)
    for (const auto& s : row) {
      out = std::max(out, linalg::max_abs(s.offset));
      for (const auto& term : s.terms) out = std::max(out, linalg::max_abs(term.gain));
    }
  return out;
}

/// A policy is symmetric when every DM applies the same map in its own frame.
inline bool is_symmetric(const LinearPolicySet& p, double tol = 0.0) {
  for (int i = 0; i + 1 < p.n_dm; ++i) {
    std::vector<int> swap(p.n_dm);
    for (int k = 0; k < p.n_dm; ++k) swap[k] = k;
    std::swap(swap[i], swap[i + 1]);
    if (policy_distance(permuted(p, swap), p) > tol) return false;
  }
  return true;
}

struct SymmetrizedPolicy {
  LinearPolicySet policy;
  int n_permutations = 0;
  bool sampled = false;  // true when a random subset of permutations was used
};

/// Equal-weight average of gamma^sigma over all permutations (N <= 6) or over
/// max_permutations uniformly sampled ones.
inline SymmetrizedPolicy symmetrize(const LinearPolicySet& p, int max_permutations = 720, std::uint64_t seed = 0) {
  const int N = p.n_dm;
  std::vector<std::vector<int>> perms;
  std::vector<int> sigma(N);
  for (int k = 0; k < N; ++k) sigma[k] = k;
  SymmetrizedPolicy out;
  if (N <= 6) {
    do perms.push_back(sigma);
    while (std::next_permutation(sigma.begin(), sigma.end()));
  } else {
    std::mt19937_64 gen(seed);
    for (int k = 0; k < max_permutations; ++k) {
      std::shuffle(sigma.begin(), sigma.end(), gen);
      perms.push_back(sigma);
    }
    out.sampled = true;
  }
  std::vector<LinearPolicySet> permuted_sets;
  permuted_sets.reserve(perms.size());
  for (const auto& s : perms) permuted_sets.push_back(permuted(p, s));
  std::vector<const LinearPolicySet*> ptrs;
  for (const auto& q : permuted_sets) ptrs.push_back(&q);
  out.policy = combine(ptrs, std::vector<double>(ptrs.size(), 1.0 / static_cast<double>(ptrs.size())));
  out.n_permutations = static_cast<int>(perms.size());
  return out;
}

// ---------------------------------------------------------------------------
// Random policies for property checks.

/// Random per-DM affine feedback on own information; gains are drawn
/// uniformly in [-scale, scale] around the base gains when given.
inline FeedbackProfile random_feedback_profile(const TeamSpec& spec, int T, std::mt19937_64& gen,
                                               double scale = 0.3, const TreePolicy* base = nullptr) {
  std::uniform_real_distribution<double> U(-scale, scale);
  const int N = spec.n_dm;
  const auto n = spec.n_state();
  const auto m = spec.n_input();
  auto rnd = [&](Eigen::Index r, Eigen::Index c) {
    Matrix M(r, c);
    for (Eigen::Index a = 0; a < r; ++a)
      for (Eigen::Index b = 0; b < c; ++b) M(a, b) = U(gen);
    return M;
  };
  FeedbackProfile prof;
  prof.K.assign(N, std::vector<Matrix>(T));
  prof.F.assign(N, std::vector<Matrix>(T));
  prof.offset.assign(N, std::vector<Vector>(T));
  for (int i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      prof.K[i][t] = rnd(m, n) + (base ? base->K[t] : Matrix::Zero(m, n));
      prof.F[i][t] = rnd(m, n) + (base ? base->feedforward(t) : Matrix::Zero(m, n));
      prof.offset[i][t] = rnd(m, 1);
    }
  }
  return prof;
}

/// Random affine policy on the full information set allowed by the delays.
inline LinearPolicySet random_measurable_policy(const TeamSpec& spec, int T, std::mt19937_64& gen,
                                                double scale = 0.3) {
  std::uniform_real_distribution<double> U(-scale, scale);
  const auto D = information_delays(spec);
  LinearPolicySet p = zero_policy(spec, T);
  const auto n = spec.n_state();
  const auto m = spec.n_input();
  for (int i = 0; i < spec.n_dm; ++i) {
    for (int t = 0; t < T; ++t) {
      StageMap& s = p.maps[i][t];
      for (int j = 0; j < spec.n_dm; ++j) {
        if (D[i][j] == kInfiniteDelay) continue;
        for (int tau = 0; tau + D[i][j] <= t; ++tau) {
          Matrix G(m, n);
          for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < n; ++b) G(a, b) = U(gen);
          s.terms.push_back({j, tau, G});
        }
      }
      for (Eigen::Index a = 0; a < m; ++a) s.offset(a) = U(gen);
      detail::canonicalize(s);
    }
  }
  return p;
}

}  // namespace lqteam
