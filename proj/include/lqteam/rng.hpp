#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lqteam/linalg.hpp"
#include "lqteam/moments.hpp"
#include "lqteam/team_model.hpp"

namespace lqteam {

/// Independent generator for rollout `index` of run `seed`. The stream
/// depends only on the pair, never on scheduling.
inline std::mt19937_64 rollout_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// One rollout's primitives: x0[i] and w[t][i].
struct Primitives {
  std::vector<Vector> x0;
  std::vector<std::vector<Vector>> w;
};

/// Draws exchangeable initial states and i.i.d. disturbances with the
/// declared second moments from unit-variance gaussian or uniform variates.
class PrimitiveSampler {
 public:
  PrimitiveSampler(const TeamSpec& spec, int T)
      : N_(spec.n_dm), T_(T), n_(spec.n_state()), family_(spec.noise.family) {
    const Matrix So = init_offdiag_or_zero(spec);
    if (linalg::is_psd(So)) {
      // x_0^i = A_d z_i + A_c z_c.
      A_d_ = linalg::psd_factor(spec.noise.init_diag - So);
      A_c_ = linalg::psd_factor(So);
      common_ = true;
    } else {
      joint_ = linalg::psd_factor(joint_initial_covariance(spec));
      common_ = false;
    }
    A_w_ = linalg::psd_factor(spec.noise.sigma_w);
  }

  void sample(std::mt19937_64& gen, Primitives& out) const {
    out.x0.resize(N_);
    out.w.resize(T_);
    if (common_) {
      const Vector zc = draw(gen, n_);
      const Vector common = A_c_ * zc;
      for (int i = 0; i < N_; ++i) out.x0[i] = A_d_ * draw(gen, n_) + common;
    } else {
      const Vector x = joint_ * draw(gen, N_ * n_);
      for (int i = 0; i < N_; ++i) out.x0[i] = x.segment(i * n_, n_);
    }
    for (int t = 0; t < T_; ++t) {
      out.w[t].resize(N_);
      for (int i = 0; i < N_; ++i) out.w[t][i] = A_w_ * draw(gen, n_);
    }
  }

  bool uses_common_factor() const { return common_; }

 private:
  Vector draw(std::mt19937_64& gen, Eigen::Index k) const {
    Vector z(k);
    if (family_ == NoiseFamily::gaussian) {
      std::normal_distribution<double> d(0.0, 1.0);
      for (Eigen::Index a = 0; a < k; ++a) z(a) = d(gen);
    } else {
      const double h = std::sqrt(3.0);
      std::uniform_real_distribution<double> d(-h, h);
      for (Eigen::Index a = 0; a < k; ++a) z(a) = d(gen);
    }
    return z;
  }

  int N_;
  int T_;
  Eigen::Index n_;
  NoiseFamily family_;
  bool common_ = true;
  Matrix A_d_, A_c_, A_w_, joint_;
};

}  // namespace lqteam
