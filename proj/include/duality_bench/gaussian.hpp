#ifndef DUALITY_BENCH_GAUSSIAN_HPP
#define DUALITY_BENCH_GAUSSIAN_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "duality_bench/block.hpp"
#include "duality_bench/quadrature.hpp"
#include "duality_bench/rng.hpp"

namespace duality_bench {

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m,
                                               std::string_view what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument(std::string(what) + " must be square");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + " has non-finite entries");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument(std::string(what) + " is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) +
                                " is not positive definite");
  }
  return llt;
}

}  // namespace detail

/// Multivariate normal density on one block. Validated SPD at construction;
/// the Cholesky factor is cached so evaluation and sampling are cheap.
class GaussianFactor {
 public:
  GaussianFactor() = default;
  GaussianFactor(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
      : mean_(std::move(mean)), cov_(std::move(covariance)) {
    if (mean_.size() != cov_.rows()) {
      throw std::invalid_argument("Gaussian factor: mean/covariance mismatch");
    }
    if (!mean_.allFinite()) {
      throw std::invalid_argument("Gaussian factor: non-finite mean");
    }
    llt_ = detail::checked_llt(cov_, "factor covariance");
    log_det_ = detail::log_det_from_llt(llt_);
  }

  static GaussianFactor scalar(double mean, double variance) {
    return GaussianFactor(Eigen::VectorXd::Constant(1, mean),
                          Eigen::MatrixXd::Constant(1, 1, variance));
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  double log_det_covariance() const { return log_det_; }

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd z = llt_.matrixL().solve(x - mean_);
    return -0.5 * (static_cast<double>(dim()) * detail::kLog2Pi + log_det_ +
                   z.squaredNorm());
  }

  Eigen::VectorXd sample(Rng& rng) const {
    Eigen::VectorXd z(dim());
    for (Eigen::Index k = 0; k < dim(); ++k) z[k] = rng.normal();
    return mean_ + llt_.matrixL() * z;
  }

  /// Precision-weighted residual Σ⁻¹(x - μ).
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const { return llt_.solve(v); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& m) const { return llt_.solve(m); }

  friend bool operator==(const GaussianFactor& a, const GaussianFactor& b) {
    return a.mean_ == b.mean_ && a.cov_ == b.cov_;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
};

inline GaussianFactor sub_gaussian(const Eigen::VectorXd& mean,
                                   const Eigen::MatrixXd& cov,
                                   const std::vector<int>& idx) {
  return GaussianFactor(mean(idx), cov(idx, idx));
}

/// Multivariate Gaussian posterior with a block decomposition. The
/// precision matrix and every block's conditioning quantities are computed
/// once at construction.
class GaussianTarget {
 public:
  static constexpr bool has_analytic_marginals = true;
  static constexpr bool is_discrete = false;
  static constexpr double kMaxCondition = 1e8;
  static constexpr double kGridHalfWidth = 8.0;

  GaussianTarget(Eigen::VectorXd mean, Eigen::MatrixXd covariance,
                 BlockDecomposition decomposition)
      : mean_(std::move(mean)),
        cov_(std::move(covariance)),
        dec_(std::move(decomposition)) {
    const auto d = static_cast<Eigen::Index>(dec_.total_dim());
    if (mean_.size() != d || cov_.rows() != d || cov_.cols() != d) {
      throw std::invalid_argument(
          "Gaussian target: mean/covariance do not match block dims (total " +
          std::to_string(d) + ")");
    }
    if (!mean_.allFinite()) {
      throw std::invalid_argument("Gaussian target: non-finite mean");
    }
    const auto llt = detail::checked_llt(cov_, "covariance");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_,
                                                       Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 1e-10)) {
      throw std::invalid_argument("covariance has eigenvalue <= 1e-10");
    }
    if (hi / lo > kMaxCondition) {
      throw std::invalid_argument("covariance condition number exceeds 1e8");
    }
    precision_ = llt.solve(Eigen::MatrixXd::Identity(d, d));
    precision_ = 0.5 * (precision_ + precision_.transpose());
    if ((precision_ * cov_ - Eigen::MatrixXd::Identity(d, d))
            .cwiseAbs()
            .maxCoeff() > 1e-8) {
      throw std::invalid_argument("covariance inversion is inaccurate");
    }
    joint_ = GaussianFactor(mean_, cov_);

    const std::size_t k = dec_.num_blocks();
    blocks_.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      auto& b = blocks_[i];
      b.idx = dec_.block_indices(i);
      b.cidx = dec_.complement_indices(i);
      const Eigen::MatrixXd lam_ii = precision_(b.idx, b.idx);
      const auto lam_llt = detail::checked_llt(lam_ii, "precision block");
      Eigen::MatrixXd cond_cov = lam_llt.solve(
          Eigen::MatrixXd::Identity(lam_ii.rows(), lam_ii.cols()));
      b.cond_cov = 0.5 * (cond_cov + cond_cov.transpose());
      b.gain = lam_llt.solve(precision_(b.idx, b.cidx));
      b.marginal = sub_gaussian(mean_, cov_, b.idx);
      b.complement = sub_gaussian(mean_, cov_, b.cidx);
    }
  }

  const BlockDecomposition& decomposition() const { return dec_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& precision() const { return precision_; }

  double log_posterior_density(const ParamVector& theta) const {
    return joint_.log_density(theta);
  }
  double log_unnormalized_posterior(const ParamVector& theta) const {
    return log_posterior_density(theta);
  }

  /// π(θᵢ | θ₋ᵢ): mean μᵢ − Λᵢᵢ⁻¹Λᵢ,₋ᵢ(θ₋ᵢ − μ₋ᵢ), covariance Λᵢᵢ⁻¹.
  GaussianFactor full_conditional(std::size_t i,
                                  const Eigen::VectorXd& complement) const {
    const auto& b = block(i);
    if (complement.size() != static_cast<Eigen::Index>(b.cidx.size())) {
      throw std::invalid_argument("complement has wrong length");
    }
    return GaussianFactor(conditional_mean(i, complement), b.cond_cov);
  }

  Eigen::VectorXd conditional_mean(std::size_t i,
                                   const Eigen::VectorXd& complement) const {
    const auto& b = block(i);
    return mean_(b.idx) - b.gain * (complement - mean_(b.cidx));
  }

  const Eigen::MatrixXd& conditional_covariance(std::size_t i) const {
    return block(i).cond_cov;
  }
  /// Λᵢᵢ⁻¹Λᵢ,₋ᵢ
  const Eigen::MatrixXd& conditional_gain(std::size_t i) const {
    return block(i).gain;
  }

  const GaussianFactor& marginal(std::size_t i) const {
    return block(i).marginal;
  }
  const GaussianFactor& complement_marginal(std::size_t i) const {
    return block(i).complement;
  }

  double log_block_marginal(std::size_t i, const Eigen::VectorXd& x) const {
    return marginal(i).log_density(x);
  }
  double log_complement_marginal(std::size_t i,
                                 const Eigen::VectorXd& x) const {
    return complement_marginal(i).log_density(x);
  }

  /// Trapezoid tensor grid over [μ − 8σ, μ + 8σ] per coordinate of block i,
  /// with σ the marginal standard deviation.
  SupportGrid block_support(std::size_t i, std::size_t points) const {
    const auto& b = block(i);
    std::vector<SupportGrid> axes;
    for (int d : b.idx) {
      const double sd = std::sqrt(cov_(d, d));
      axes.push_back(trapezoid_grid(mean_[d] - kGridHalfWidth * sd,
                                    mean_[d] + kGridHalfWidth * sd, points));
    }
    return tensor_product(axes);
  }

  ParamVector initial_draw(Rng& rng) const {
    ParamVector theta(static_cast<Eigen::Index>(dec_.total_dim()));
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] = rng.normal();
    return theta;
  }
  std::string_view initializer_name() const { return "standard_normal"; }

  /// Exact joint draw, used by tests and control runs.
  ParamVector exact_draw(Rng& rng) const { return joint_.sample(rng); }

 private:
  struct BlockCache {
    std::vector<int> idx, cidx;
    Eigen::MatrixXd cond_cov;
    Eigen::MatrixXd gain;
    GaussianFactor marginal;
    GaussianFactor complement;
  };

  const BlockCache& block(std::size_t i) const {
    dec_.check_index(i);
    return blocks_[i];
  }

  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd precision_;
  BlockDecomposition dec_;
  GaussianFactor joint_;
  std::vector<BlockCache> blocks_;
};

/// Standard bivariate normal with correlation rho and two scalar blocks.
inline GaussianTarget standard_bivariate(double rho) {
  Eigen::Matrix2d cov;
  cov << 1.0, rho, rho, 1.0;
  return GaussianTarget(Eigen::Vector2d::Zero(), cov, BlockDecomposition({1, 1}));
}

inline GaussianFactor gaussian_full_conditional(
    const GaussianTarget& target, std::size_t i,
    const Eigen::VectorXd& complement) {
  return target.full_conditional(i, complement);
}

inline GaussianFactor gaussian_marginal(const GaussianTarget& target,
                                        std::size_t i) {
  return target.marginal(i);
}

/// KL(a ‖ b) in closed form.
inline double gaussian_kl(const GaussianFactor& a, const GaussianFactor& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  }
  const Eigen::VectorXd diff = b.mean() - a.mean();
  const double trace = b.solve(a.covariance()).trace();
  const double quad = diff.dot(b.solve(diff));
  const double kl = 0.5 * (trace + quad - static_cast<double>(a.dim()) +
                           b.log_det_covariance() - a.log_det_covariance());
  return std::max(0.0, kl);
}

inline double gaussian_entropy(const GaussianFactor& f) {
  return 0.5 * (static_cast<double>(f.dim()) * (detail::kLog2Pi + 1.0) +
                f.log_det_covariance());
}

/// I(θᵢ; θ₋ᵢ) = ½(log|Σᵢᵢ| + log|Σ₋ᵢ₋ᵢ| − log|Σ|).
inline double gaussian_mutual_information(const GaussianTarget& target,
                                          std::size_t i) {
  const Eigen::LLT<Eigen::MatrixXd> joint(target.covariance());
  const double mi = 0.5 * (target.marginal(i).log_det_covariance() +
                           target.complement_marginal(i).log_det_covariance() -
                           detail::log_det_from_llt(joint));
  return std::max(0.0, mi);
}

/// H(θ₋ᵢ | θᵢ): entropy of the Gaussian conditional of the complement,
/// whose covariance Σ₋ᵢ₋ᵢ − Σ₋ᵢ,ᵢΣᵢᵢ⁻¹Σᵢ,₋ᵢ does not depend on θᵢ.
inline double gaussian_complement_conditional_entropy(
    const GaussianTarget& target, std::size_t i) {
  const auto& dec = target.decomposition();
  const auto idx = dec.block_indices(i);
  const auto cidx = dec.complement_indices(i);
  const Eigen::MatrixXd& s = target.covariance();
  const Eigen::MatrixXd s_ii = s(idx, idx);
  const Eigen::MatrixXd schur =
      s(cidx, cidx) - s(cidx, idx) * s_ii.llt().solve(s(idx, cidx));
  return gaussian_entropy(GaussianFactor(Eigen::VectorXd::Zero(schur.rows()),
                                         0.5 * (schur + schur.transpose())));
}

/// Stationary point of the mean-field coordinate updates for block i.
/// Every block's update gives mᵢ = μᵢ − Λᵢᵢ⁻¹Λᵢ,₋ᵢ(m₋ᵢ − μ₋ᵢ); stacked,
/// these read Λ(m − μ) = 0, so the solution is m = μ with covariance Λᵢᵢ⁻¹.
inline GaussianFactor gaussian_cavi_fixed_point(const GaussianTarget& target,
                                                std::size_t i) {
  const auto idx = target.decomposition().block_indices(i);
  return GaussianFactor(target.mean()(idx), target.conditional_covariance(i));
}

/// Block-diagonal Gaussian formed by a product of independent factors.
inline GaussianFactor product_gaussian(
    const std::vector<const GaussianFactor*>& factors) {
  Eigen::Index dim = 0;
  for (const auto* f : factors) dim += f->dim();
  Eigen::VectorXd mean(dim);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::Index at = 0;
  for (const auto* f : factors) {
    mean.segment(at, f->dim()) = f->mean();
    cov.block(at, at, f->dim(), f->dim()) = f->covariance();
    at += f->dim();
  }
  return GaussianFactor(std::move(mean), std::move(cov));
}

/// Tabulate a factor's log density on a grid and renormalize there.
inline TabulatedFactor tabulate(const GaussianFactor& f,
                                const SupportGrid& grid) {
  std::vector<double> lv(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    lv[k] = f.log_density(grid.nodes.col(static_cast<Eigen::Index>(k)));
  }
  return TabulatedFactor::from_log_values(grid, std::move(lv));
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_GAUSSIAN_HPP
