#pragma once

#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lqteam/errors.hpp"
#include "lqteam/linalg.hpp"

namespace lqteam {

/// x_{t+1}^i = A x_t^i + B u_t^i + w_t^i, identical for every DM.
struct HomogeneousDynamics {
  Matrix A;
  Matrix B;
};

/// x_{t+1}^i = sum_j A^{ij} x_t^j + B^{ij} u_t^j + w_t^i. Blocks are indexed
/// [i][j], each A block n x n and each B block n x m.
struct BlockedDynamics {
  std::vector<std::vector<Matrix>> A_blocks;
  std::vector<std::vector<Matrix>> B_blocks;

  Matrix full_A() const;
  Matrix full_B() const;
};

using Dynamics = std::variant<HomogeneousDynamics, BlockedDynamics>;

/// Quadratic cost blocks. For homogeneous dynamics Q, R, R_tilde, Q_tilde are
/// per-DM (n x n, m x m); an empty R_tilde / Q_tilde means no coupling. For
/// blocked dynamics Q (Nn x Nn), R (Nm x Nm) and S (Nn x Nm) act on the
/// stacked state and input.
struct CostSpec {
  Matrix Q;
  Matrix R;
  Matrix R_tilde;
  Matrix Q_tilde;
  Matrix S;
};

enum class NoiseFamily { gaussian, uniform };

/// Zero-mean primitives. Disturbances are i.i.d. across DMs and time with
/// covariance sigma_w; initial states are exchangeable with
/// E[x0^i x0^i'] = init_diag and E[x0^i x0^j'] = init_offdiag (i != j).
struct NoiseSpec {
  Matrix sigma_w;
  Matrix init_diag;
  Matrix init_offdiag;
  NoiseFamily family = NoiseFamily::gaussian;
};

inline constexpr int kInfiniteDelay = std::numeric_limits<int>::max();

/// delays[i][j]: delay with which DM i learns the state of DM j.
using DelayMatrix = std::vector<std::vector<int>>;

enum class InfoKind { tree, meanfield, delayed };

struct InfoStructure {
  InfoKind kind = InfoKind::tree;
  DelayMatrix delays;  // only for InfoKind::delayed
};

struct TeamSpec {
  int n_dm = 1;
  int horizon = 1;
  Dynamics dynamics;
  CostSpec cost;
  NoiseSpec noise;
  InfoStructure info;

  bool is_blocked() const { return std::holds_alternative<BlockedDynamics>(dynamics); }
  const HomogeneousDynamics& homogeneous() const;
  const BlockedDynamics& blocked() const;
  /// Per-DM state dimension n.
  int n_state() const;
  /// Per-DM input dimension m.
  int n_input() const;
};

struct Check {
  std::string name;
  bool passed = true;
  std::string message;
  /// Informational checks are reported but do not fail validation.
  bool required = true;
};

struct ValidationReport {
  std::vector<Check> checks;

  bool ok() const {
    for (const auto& c : checks) {
      if (c.required && !c.passed) return false;
    }
    return true;
  }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (c.required && !c.passed) out.push_back(c.name);
    }
    return out;
  }
  void add(std::string name, bool passed, std::string message = {}, bool required = true) {
    checks.push_back({std::move(name), passed, std::move(message), required});
  }
  void append(const ValidationReport& other) {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
  }
};

inline const char* to_string(InfoKind k) {
  switch (k) {
    case InfoKind::tree: return "tree";
    case InfoKind::meanfield: return "meanfield";
    case InfoKind::delayed: return "delayed";
  }
  return "?";
}

inline const char* to_string(NoiseFamily f) {
  return f == NoiseFamily::gaussian ? "gaussian" : "uniform";
}

// ---------------------------------------------------------------------------

inline Matrix BlockedDynamics::full_A() const {
  const auto N = static_cast<Eigen::Index>(A_blocks.size());
  if (N == 0) return Matrix();
  const auto n = A_blocks[0][0].rows();
  Matrix out(N * n, N * n);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) out.block(i * n, j * n, n, n) = A_blocks[i][j];
  return out;
}

inline Matrix BlockedDynamics::full_B() const {
  const auto N = static_cast<Eigen::Index>(B_blocks.size());
  if (N == 0) return Matrix();
  const auto n = B_blocks[0][0].rows();
  const auto m = B_blocks[0][0].cols();
  Matrix out(N * n, N * m);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) out.block(i * n, j * m, n, m) = B_blocks[i][j];
  return out;
}

inline const HomogeneousDynamics& TeamSpec::homogeneous() const {
  if (const auto* h = std::get_if<HomogeneousDynamics>(&dynamics)) return *h;
  throw ValidationError("team_model: spec has blocked dynamics, homogeneous required");
}

inline const BlockedDynamics& TeamSpec::blocked() const {
  if (const auto* b = std::get_if<BlockedDynamics>(&dynamics)) return *b;
  throw ValidationError("team_model: spec has homogeneous dynamics, blocked required");
}

inline int TeamSpec::n_state() const {
  if (const auto* h = std::get_if<HomogeneousDynamics>(&dynamics))
    return static_cast<int>(h->A.rows());
  const auto& b = std::get<BlockedDynamics>(dynamics);
  return b.A_blocks.empty() ? 0 : static_cast<int>(b.A_blocks[0][0].rows());
}

inline int TeamSpec::n_input() const {
  if (const auto* h = std::get_if<HomogeneousDynamics>(&dynamics))
    return static_cast<int>(h->B.cols());
  const auto& b = std::get<BlockedDynamics>(dynamics);
  return b.B_blocks.empty() ? 0 : static_cast<int>(b.B_blocks[0][0].cols());
}

/// Ordered-pair weight s of the coupling terms in the team stage cost
/// sum_i (x'Qx + u'Ru) + s sum_{i != j} (u^i' R~ u^j + x^i' Q~ x^j).
inline double pair_weight(const TeamSpec& spec) {
  if (spec.info.kind == InfoKind::meanfield && spec.n_dm > 1) return 1.0 / (spec.n_dm - 1);
  return 1.0;
}

inline bool has_matrix(const Matrix& m) { return m.size() > 0 && linalg::max_abs(m) > 0.0; }

namespace detail {

inline std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

inline void require_dims(const Matrix& m, Eigen::Index r, Eigen::Index c, const std::string& name) {
  if (m.rows() != r || m.cols() != c) {
    std::ostringstream os;
    os << "team_model.validate: dimension mismatch for " << name << ": expected " << r << "x"
       << c << ", got " << dims(m);
    throw ValidationError(os.str());
  }
}

// Optional matrices may be empty.
inline void require_dims_or_empty(const Matrix& m, Eigen::Index r, Eigen::Index c,
                                  const std::string& name) {
  if (m.size() == 0) return;
  require_dims(m, r, c, name);
}

inline void check_symmetric(ValidationReport& rep, const Matrix& m, const std::string& name) {
  if (m.size() == 0) return;
  const double a = linalg::asymmetry(m);
  std::ostringstream os;
  os << "relative asymmetry " << a;
  rep.add(name + " symmetric", a <= 1e-10, os.str());
}

inline void check_psd(ValidationReport& rep, const Matrix& m, const std::string& check_name) {
  const Vector ev = linalg::sym_eigenvalues(m);
  std::ostringstream os;
  os << "smallest eigenvalue " << (ev.size() ? ev(0) : 0.0);
  rep.add(check_name, linalg::is_psd(m), os.str());
}

inline void check_pd(ValidationReport& rep, const Matrix& m, const std::string& check_name) {
  const Vector ev = linalg::sym_eigenvalues(m);
  std::ostringstream os;
  os << "smallest eigenvalue " << (ev.size() ? ev(0) : 0.0);
  rep.add(check_name, linalg::is_pd(m), os.str());
}

inline void check_dimensions(const TeamSpec& spec) {
  if (spec.n_dm < 1) throw ValidationError("team_model.validate: n_dm must be >= 1");
  const int N = spec.n_dm;
  if (const auto* h = std::get_if<HomogeneousDynamics>(&spec.dynamics)) {
    const auto n = h->A.rows();
    if (n == 0) throw ValidationError("team_model.validate: empty A");
    require_dims(h->A, n, n, "A");
    if (h->B.rows() != n || h->B.cols() == 0)
      throw ValidationError("team_model.validate: dimension mismatch for B: expected " +
                            std::to_string(n) + "xm, got " + dims(h->B));
    const auto m = h->B.cols();
    require_dims(spec.cost.Q, n, n, "Q");
    require_dims(spec.cost.R, m, m, "R");
    require_dims_or_empty(spec.cost.R_tilde, m, m, "R_tilde");
    require_dims_or_empty(spec.cost.Q_tilde, n, n, "Q_tilde");
    if (spec.cost.S.size() != 0)
      throw ValidationError("team_model.validate: cross term S only allowed with blocked dynamics");
  } else {
    const auto& b = std::get<BlockedDynamics>(spec.dynamics);
    if (static_cast<int>(b.A_blocks.size()) != N || static_cast<int>(b.B_blocks.size()) != N)
      throw ValidationError("team_model.validate: dimension mismatch: blocked dynamics need " +
                            std::to_string(N) + "x" + std::to_string(N) + " blocks");
    if (b.A_blocks[0].empty() || b.B_blocks[0].empty())
      throw ValidationError("team_model.validate: empty blocked dynamics");
    const auto n = b.A_blocks[0][0].rows();
    const auto m = b.B_blocks[0][0].cols();
    if (n == 0 || m == 0) throw ValidationError("team_model.validate: empty blocks");
    for (int i = 0; i < N; ++i) {
      if (static_cast<int>(b.A_blocks[i].size()) != N || static_cast<int>(b.B_blocks[i].size()) != N)
        throw ValidationError("team_model.validate: dimension mismatch: ragged block rows");
      for (int j = 0; j < N; ++j) {
        require_dims(b.A_blocks[i][j], n, n, "A_blocks[" + std::to_string(i) + "][" + std::to_string(j) + "]");
        require_dims(b.B_blocks[i][j], n, m, "B_blocks[" + std::to_string(i) + "][" + std::to_string(j) + "]");
      }
    }
    require_dims(spec.cost.Q, N * n, N * n, "Q");
    require_dims(spec.cost.R, N * m, N * m, "R");
    require_dims_or_empty(spec.cost.S, N * n, N * m, "S");
    if (spec.cost.R_tilde.size() != 0 || spec.cost.Q_tilde.size() != 0)
      throw ValidationError("team_model.validate: R_tilde / Q_tilde only allowed with homogeneous dynamics");
  }
  const auto n = spec.n_state();
  require_dims(spec.noise.sigma_w, n, n, "sigma_w");
  require_dims(spec.noise.init_diag, n, n, "init_diag");
  require_dims_or_empty(spec.noise.init_offdiag, n, n, "init_offdiag");
  if (spec.info.kind == InfoKind::delayed) {
    if (!spec.is_blocked())
      throw ValidationError("team_model.validate: delayed information requires blocked dynamics");
    if (static_cast<int>(spec.info.delays.size()) != N)
      throw ValidationError("team_model.validate: dimension mismatch: delays must be NxN");
    for (const auto& row : spec.info.delays)
      if (static_cast<int>(row.size()) != N)
        throw ValidationError("team_model.validate: dimension mismatch: delays must be NxN");
  } else if (spec.is_blocked()) {
    throw ValidationError(std::string("team_model.validate: ") + to_string(spec.info.kind) +
                          " information requires homogeneous dynamics");
  }
}

}  // namespace detail

inline Matrix init_offdiag_or_zero(const TeamSpec& spec) {
  const auto n = spec.n_state();
  return spec.noise.init_offdiag.size() ? spec.noise.init_offdiag : Matrix::Zero(n, n);
}

/// Checks every structural invariant of the problem. Dimension mismatches throw
/// ValidationError; every other violation is a named failed check.
inline ValidationReport validate(const TeamSpec& spec) {
  detail::check_dimensions(spec);
  ValidationReport rep;
  const int N = spec.n_dm;
  rep.add("horizon positive", spec.horizon >= 1, "horizon " + std::to_string(spec.horizon));

  const auto& c = spec.cost;
  detail::check_symmetric(rep, c.Q, "Q");
  detail::check_symmetric(rep, c.R, "R");
  detail::check_symmetric(rep, c.R_tilde, "R_tilde");
  detail::check_symmetric(rep, c.Q_tilde, "Q_tilde");
  detail::check_psd(rep, c.Q, "Q positive semidefinite");
  detail::check_pd(rep, c.R, "R positive definite");

  if (!spec.is_blocked()) {
    const double s = pair_weight(spec);
    if (has_matrix(c.R_tilde)) detail::check_pd(rep, c.R_tilde, "R_tilde positive definite");
    if (has_matrix(c.Q_tilde)) detail::check_psd(rep, c.Q_tilde, "Q_tilde positive semidefinite");
    if (N > 1) {
      // Eigen-decomposition of I (x) R + s (11' - I) (x) R~ over the population.
      const auto m = c.R.rows();
      const auto n = c.Q.rows();
      const Matrix Rt = has_matrix(c.R_tilde) ? c.R_tilde : Matrix::Zero(m, m);
      const Matrix Qt = has_matrix(c.Q_tilde) ? c.Q_tilde : Matrix::Zero(n, n);
      const bool ctrl = linalg::is_pd(c.R - s * Rt) && linalg::is_pd(c.R + s * (N - 1) * Rt);
      const bool state = linalg::is_psd(c.Q - s * Qt) && linalg::is_psd(c.Q + s * (N - 1) * Qt);
      rep.add("joint control weight positive definite", ctrl,
              "R - s R_tilde and R + s(N-1) R_tilde must be positive definite");
      rep.add("joint state weight positive semidefinite", state,
              "Q - s Q_tilde and Q + s(N-1) Q_tilde must be positive semidefinite");
    }
    rep.add("exchangeable structure", true, "homogeneous per-DM blocks", false);
  } else {
    const auto n = spec.n_state();
    const auto m = spec.n_input();
    const Matrix S = c.S.size() ? c.S : Matrix::Zero(N * n, N * m);
    Matrix joint(N * (n + m), N * (n + m));
    joint << c.Q, S, S.transpose(), c.R;
    detail::check_psd(rep, joint, "[Q S; S' R] positive semidefinite");
    const auto& b = spec.blocked();
    bool exch = true;
    for (int i = 0; i < N && exch; ++i) {
      for (int j = 0; j < N; ++j) {
        const bool diag = i == j;
        const Matrix& refA = diag ? b.A_blocks[0][0] : (N > 1 ? b.A_blocks[0][1] : b.A_blocks[0][0]);
        const Matrix& refB = diag ? b.B_blocks[0][0] : (N > 1 ? b.B_blocks[0][1] : b.B_blocks[0][0]);
        if (!b.A_blocks[i][j].isApprox(refA, 1e-12) && !(b.A_blocks[i][j].isZero() && refA.isZero()))
          exch = false;
        if (!b.B_blocks[i][j].isApprox(refB, 1e-12) && !(b.B_blocks[i][j].isZero() && refB.isZero()))
          exch = false;
      }
    }
    rep.add("exchangeable structure", exch,
            exch ? "identical diagonal and off-diagonal blocks" : "blocks differ across DMs", false);
    const auto& D = spec.info.delays;
    bool diag_zero = true;
    for (int i = 0; i < N; ++i) diag_zero = diag_zero && D[i][i] == 0;
    rep.add("delay diagonal zero", diag_zero, "D[i][i] must be 0");
    rep.add("initial states independent", !has_matrix(spec.noise.init_offdiag),
            "delayed sharing requires init_offdiag = 0");
  }

  const auto& nz = spec.noise;
  const Matrix So = init_offdiag_or_zero(spec);
  detail::check_symmetric(rep, nz.sigma_w, "sigma_w");
  detail::check_symmetric(rep, nz.init_diag, "init_diag");
  detail::check_symmetric(rep, So, "init_offdiag");
  detail::check_psd(rep, nz.sigma_w, "sigma_w positive semidefinite");
  detail::check_psd(rep, nz.init_diag, "init_diag positive semidefinite");
  {
    const bool lower = linalg::is_psd(nz.init_diag - So);
    const bool upper = linalg::is_psd(nz.init_diag + (N - 1) * So);
    std::ostringstream os;
    os << "min eig(init_diag - init_offdiag) = " << linalg::sym_eigenvalues(nz.init_diag - So)(0)
       << ", min eig(init_diag + (N-1) init_offdiag) = "
       << linalg::sym_eigenvalues(nz.init_diag + (N - 1) * So)(0);
    rep.add("joint initial covariance PSD", lower && upper, os.str());
  }
  return rep;
}

/// Throws ValidationError listing the failed checks when the problem is invalid.
inline void require_valid(const TeamSpec& spec, const std::string& who) {
  const auto rep = validate(spec);
  if (rep.ok()) return;
  std::string msg = who + ": spec failed validation:";
  for (const auto& f : rep.failures()) msg += " [" + f + "]";
  throw ValidationError(msg);
}

/// Sigma = init_offdiag * init_diag^{-1}, so that E(x0^j | x0^i) = Sigma x0^i.
inline Matrix conditional_gain(const NoiseSpec& noise) {
  const auto n = noise.init_diag.rows();
  const Matrix So = noise.init_offdiag.size() ? noise.init_offdiag : Matrix::Zero(n, n);
  const Matrix Sd = linalg::symmetrized(noise.init_diag);
  const Vector ev = linalg::sym_eigenvalues(Sd);
  if (n == 0 || ev(0) <= 1e-12 * std::max(1.0, ev(n - 1))) {
    throw ValidationError(
        "team_model.conditional_gain: init_diag is singular; add a ridge (init_diag + eps*I) to "
        "regularise the initial-state covariance");
  }
  // Sigma Sd = So  <=>  Sd Sigma' = So'.
  return Sd.ldlt().solve(So.transpose()).transpose();
}

}  // namespace lqteam
