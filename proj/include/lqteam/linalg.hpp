#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

namespace lqteam {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

namespace linalg {

// Scale-relative eigenvalue tolerance shared by every PSD / PD test.
inline constexpr double kEigTolerance = 1e-9;
// Relative threshold for numerical rank: sigma > max(dim) * sigma_max * kRankTolerance.
inline constexpr double kRankTolerance = 1e-12;

inline Matrix symmetrized(const Eigen::Ref<const Matrix>& m) {
  return 0.5 * (m + m.transpose());
}

/// Largest absolute entry of m - m', relative to 1 + max|m|.
inline double asymmetry(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return 0.0;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

/// Eigenvalues of the symmetric part of m, ascending.
inline Vector sym_eigenvalues(const Eigen::Ref<const Matrix>& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline bool is_psd(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return true;
  const Vector ev = sym_eigenvalues(m);
  return ev(0) >= -kEigTolerance * (1.0 + std::max(ev(ev.size() - 1), 0.0));
}

inline bool is_pd(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return true;
  const Vector ev = sym_eigenvalues(m);
  return ev(0) > kEigTolerance * (1.0 + std::max(ev(ev.size() - 1), 0.0));
}

/// F with F F' = m for a symmetric PSD m; negative rounding eigenvalues are
/// clamped to zero.
inline Matrix psd_factor(const Eigen::Ref<const Matrix>& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

/// Symmetric square root of a PSD matrix.
inline Matrix psd_sqrt(const Eigen::Ref<const Matrix>& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

template <typename Derived>
int numerical_rank(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.size() == 0) return 0;
  const Dense dense = m;
  Eigen::JacobiSVD<Dense> svd(dense);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  if (smax == 0.0) return 0;
  const double threshold =
      static_cast<double>(std::max(m.rows(), m.cols())) * smax * kRankTolerance;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > threshold) ++rank;
  }
  return rank;
}

/// Smallest singular value divided by the largest (0 for a zero matrix).
template <typename Derived>
double relative_min_singular_value(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Dense dense = m;
  Eigen::JacobiSVD<Dense> svd(dense);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0.0;
  // Column rank deficiency shows up as missing singular values when rows < cols.
  if (m.rows() < m.cols()) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

inline Matrix kron(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

/// Column-major vectorisation.
inline Vector vec(const Eigen::Ref<const Matrix>& m) {
  Matrix copy = m;
  return Eigen::Map<const Vector>(copy.data(), copy.size());
}

inline Matrix unvec(const Eigen::Ref<const Vector>& v, Eigen::Index rows, Eigen::Index cols) {
  Vector copy = v;
  return Eigen::Map<const Matrix>(copy.data(), rows, cols);
}

inline double max_abs(const Eigen::Ref<const Matrix>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Neumaier-compensated running sum; makes reductions insensitive to
/// summation order at the 1e-12 level.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace linalg
}  // namespace lqteam
