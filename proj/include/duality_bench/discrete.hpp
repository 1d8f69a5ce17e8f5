#ifndef DUALITY_BENCH_DISCRETE_HPP
#define DUALITY_BENCH_DISCRETE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "duality_bench/block.hpp"
#include "duality_bench/quadrature.hpp"
#include "duality_bench/rng.hpp"

namespace duality_bench {

/// Probability mass function over one categorical block {0, ..., n-1}.
struct DiscreteFactor {
  std::vector<double> pmf;

  std::size_t size() const { return pmf.size(); }

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != 1) {
      throw std::invalid_argument("discrete factor evaluated at a non-scalar");
    }
    const double r = std::round(x[0]);
    if (std::abs(x[0] - r) > 1e-9 || r < 0.0 ||
        r >= static_cast<double>(pmf.size())) {
      return kNegInf;
    }
    const double p = pmf[static_cast<std::size_t>(r)];
    return p > 0.0 ? std::log(p) : kNegInf;
  }

  Eigen::VectorXd sample(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      if (pmf[k] <= 0.0) continue;
      acc += pmf[k];
      last = k;
      if (u < acc) return Eigen::VectorXd::Constant(1, static_cast<double>(k));
    }
    return Eigen::VectorXd::Constant(1, static_cast<double>(last));
  }

  /// Throws unless entries are nonnegative and sum to one within 1e-12.
  void validate() const {
    double s = 0.0;
    for (double p : pmf) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("pmf has a negative or non-finite entry");
      }
      s += p;
    }
    if (pmf.empty() || std::abs(s - 1.0) > 1e-12) {
      throw std::invalid_argument("pmf does not sum to 1");
    }
  }

  static DiscreteFactor uniform(std::size_t n) {
    return DiscreteFactor{std::vector<double>(n, 1.0 / static_cast<double>(n))};
  }

  /// Normalize exp(log_weights).
  static DiscreteFactor from_log_weights(const std::vector<double>& lw) {
    const double z = log_sum_exp(lw);
    if (!std::isfinite(z)) {
      throw std::domain_error("discrete factor is not normalizable");
    }
    DiscreteFactor f;
    f.pmf.resize(lw.size());
    for (std::size_t k = 0; k < lw.size(); ++k) f.pmf[k] = std::exp(lw[k] - z);
    return f;
  }

  friend bool operator==(const DiscreteFactor&, const DiscreteFactor&) = default;
};

inline TabulatedFactor tabulate(const DiscreteFactor& f,
                                const SupportGrid& grid) {
  if (!grid.counting || grid.size() != f.size()) {
    throw std::invalid_argument("discrete factor needs its counting grid");
  }
  std::vector<double> lv(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    lv[k] = f.pmf[k] > 0.0 ? std::log(f.pmf[k]) : kNegInf;
  }
  return TabulatedFactor{grid, std::move(lv)};
}

inline DiscreteFactor to_discrete(const TabulatedFactor& t) {
  DiscreteFactor f;
  f.pmf.resize(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) f.pmf[k] = t.density(k);
  return f;
}

/// Total variation distance ½ Σ |a − b|.
inline double total_variation(const DiscreteFactor& a, const DiscreteFactor& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("total variation of unequal supports");
  }
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += std::abs(a.pmf[k] - b.pmf[k]);
  return 0.5 * d;
}

/// Dense joint pmf over K scalar categorical blocks, stored row-major (the
/// last block varies fastest).
class DiscreteTarget {
 public:
  static constexpr bool has_analytic_marginals = true;
  static constexpr bool is_discrete = true;
  static constexpr std::size_t kMaxBlocks = 4;
  static constexpr std::size_t kMaxSupport = 16;

  DiscreteTarget(std::vector<std::size_t> support_sizes,
                 std::vector<double> joint_pmf)
      : sizes_(std::move(support_sizes)),
        pmf_(std::move(joint_pmf)),
        dec_(std::vector<std::size_t>(sizes_.size(), 1)) {
    if (sizes_.size() > kMaxBlocks) {
      throw std::invalid_argument("discrete target supports at most 4 blocks");
    }
    std::size_t total = 1;
    for (auto n : sizes_) {
      if (n < 1 || n > kMaxSupport) {
        throw std::invalid_argument("support sizes must lie in [1, 16]");
      }
      total *= n;
    }
    if (pmf_.size() != total) {
      throw std::invalid_argument("pmf has " + std::to_string(pmf_.size()) +
                                  " entries, shape implies " +
                                  std::to_string(total));
    }
    DiscreteFactor{pmf_}.validate();
    strides_.assign(sizes_.size(), 1);
    for (std::size_t j = sizes_.size() - 1; j-- > 0;) {
      strides_[j] = strides_[j + 1] * sizes_[j + 1];
    }
  }

  const BlockDecomposition& decomposition() const { return dec_; }
  const std::vector<std::size_t>& support_sizes() const { return sizes_; }
  const std::vector<double>& joint_pmf() const { return pmf_; }
  std::size_t num_states() const { return pmf_.size(); }
  std::size_t num_blocks() const { return sizes_.size(); }

  std::vector<std::size_t> decode(std::size_t flat) const {
    std::vector<std::size_t> s(sizes_.size());
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
      s[j] = (flat / strides_[j]) % sizes_[j];
    }
    return s;
  }

  std::size_t encode(const std::vector<std::size_t>& state) const {
    std::size_t flat = 0;
    for (std::size_t j = 0; j < sizes_.size(); ++j) flat += state[j] * strides_[j];
    return flat;
  }

  /// Integer state of a parameter vector; throws if any entry is not a
  /// valid category.
  std::vector<std::size_t> state_of(const ParamVector& theta) const {
    dec_.check_vector(theta);
    std::vector<std::size_t> s(sizes_.size());
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
      s[j] = category(theta[static_cast<Eigen::Index>(j)], j);
    }
    return s;
  }

  ParamVector vector_of(const std::vector<std::size_t>& state) const {
    ParamVector theta(static_cast<Eigen::Index>(state.size()));
    for (std::size_t j = 0; j < state.size(); ++j) {
      theta[static_cast<Eigen::Index>(j)] = static_cast<double>(state[j]);
    }
    return theta;
  }

  double prob(const std::vector<std::size_t>& state) const {
    return pmf_[encode(state)];
  }

  double log_posterior_density(const ParamVector& theta) const {
    const double p = pmf_[encode(state_of(theta))];
    return p > 0.0 ? std::log(p) : kNegInf;
  }
  double log_unnormalized_posterior(const ParamVector& theta) const {
    return log_posterior_density(theta);
  }

  /// Joint pmf slice at θ₋ᵢ renormalized over block i.
  DiscreteFactor full_conditional(std::size_t i,
                                  const Eigen::VectorXd& complement) const {
    dec_.check_index(i);
    const auto state = complement_state(i, complement);
    std::vector<double> slice(sizes_[i]);
    auto s = state;
    double mass = 0.0;
    for (std::size_t k = 0; k < sizes_[i]; ++k) {
      s[i] = k;
      slice[k] = pmf_[encode(s)];
      mass += slice[k];
    }
    if (!(mass > 0.0)) {
      throw std::domain_error("conditioning event for block " +
                              std::to_string(i + 1) + " has zero mass");
    }
    for (auto& v : slice) v /= mass;
    return DiscreteFactor{std::move(slice)};
  }

  DiscreteFactor marginal(std::size_t i) const {
    dec_.check_index(i);
    std::vector<double> m(sizes_[i], 0.0);
    for (std::size_t f = 0; f < pmf_.size(); ++f) {
      m[(f / strides_[i]) % sizes_[i]] += pmf_[f];
    }
    return DiscreteFactor{std::move(m)};
  }

  /// Number of complement states for block i.
  std::size_t complement_size(std::size_t i) const {
    return pmf_.size() / sizes_.at(i);
  }

  /// Flat complement index (other blocks in order, row-major) of a state.
  std::size_t complement_flat(std::size_t i,
                              const std::vector<std::size_t>& state) const {
    std::size_t flat = 0;
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
      if (j == i) continue;
      flat = flat * sizes_[j] + state[j];
    }
    return flat;
  }

  /// π(θ₋ᵢ) as a flat pmf over complement states.
  std::vector<double> complement_marginal(std::size_t i) const {
    dec_.check_index(i);
    std::vector<double> m(complement_size(i), 0.0);
    for (std::size_t f = 0; f < pmf_.size(); ++f) {
      m[complement_flat(i, decode(f))] += pmf_[f];
    }
    return m;
  }

  double log_block_marginal(std::size_t i, const Eigen::VectorXd& x) const {
    return marginal(i).log_density(x);
  }

  double log_complement_marginal(std::size_t i,
                                 const Eigen::VectorXd& complement) const {
    const auto state = complement_state(i, complement);
    double m = 0.0;
    auto s = state;
    for (std::size_t k = 0; k < sizes_[i]; ++k) {
      s[i] = k;
      m += pmf_[encode(s)];
    }
    return m > 0.0 ? std::log(m) : kNegInf;
  }

  SupportGrid block_support(std::size_t i, std::size_t /*points*/) const {
    dec_.check_index(i);
    return counting_grid(sizes_[i]);
  }

  /// Uniform draw over the product support.
  ParamVector initial_draw(Rng& rng) const {
    ParamVector theta(static_cast<Eigen::Index>(sizes_.size()));
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
      theta[static_cast<Eigen::Index>(j)] =
          static_cast<double>(rng.below(sizes_[j]));
    }
    return theta;
  }
  std::string_view initializer_name() const { return "uniform"; }

 private:
  std::size_t category(double v, std::size_t block) const {
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9 || r < 0.0 ||
        r >= static_cast<double>(sizes_[block])) {
      throw std::out_of_range("value " + std::to_string(v) +
                              " is not a category of block " +
                              std::to_string(block + 1));
    }
    return static_cast<std::size_t>(r);
  }

  /// Full state with block i set to 0 and the others from the complement.
  std::vector<std::size_t> complement_state(
      std::size_t i, const Eigen::VectorXd& complement) const {
    if (static_cast<std::size_t>(complement.size()) != sizes_.size() - 1) {
      throw std::invalid_argument("complement has wrong length");
    }
    std::vector<std::size_t> s(sizes_.size(), 0);
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
      if (j == i) continue;
      s[j] = category(complement[c++], j);
    }
    return s;
  }

  std::vector<std::size_t> sizes_;
  std::vector<double> pmf_;
  std::vector<std::size_t> strides_;
  BlockDecomposition dec_;
};

inline DiscreteFactor enum_full_conditional(const DiscreteTarget& t,
                                            std::size_t i,
                                            const Eigen::VectorXd& complement) {
  return t.full_conditional(i, complement);
}

inline DiscreteFactor enum_marginal(const DiscreteTarget& t, std::size_t i) {
  return t.marginal(i);
}

namespace detail {
inline double shannon(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}
}  // namespace detail

/// I(θᵢ; θ₋ᵢ) = Σ π(θ) log[π(θ) / (π(θᵢ) π(θ₋ᵢ))].
inline double enum_mi(const DiscreteTarget& t, std::size_t i) {
  const auto mi = t.marginal(i).pmf;
  const auto mc = t.complement_marginal(i);
  double acc = 0.0;
  for (std::size_t f = 0; f < t.num_states(); ++f) {
    const double p = t.joint_pmf()[f];
    if (p <= 0.0) continue;
    const auto s = t.decode(f);
    acc += p * std::log(p / (mi[s[i]] * mc[t.complement_flat(i, s)]));
  }
  return acc;
}

/// H(θᵢ)
inline double enum_block_entropy(const DiscreteTarget& t, std::size_t i) {
  return detail::shannon(t.marginal(i).pmf);
}

/// H(θ₋ᵢ)
inline double enum_complement_entropy(const DiscreteTarget& t, std::size_t i) {
  return detail::shannon(t.complement_marginal(i));
}

/// H(θ₋ᵢ | θᵢ) = −Σ π(θ) log π(θ₋ᵢ | θᵢ).
inline double enum_complement_conditional_entropy(const DiscreteTarget& t,
                                                  std::size_t i) {
  const auto mi = t.marginal(i).pmf;
  double acc = 0.0;
  for (std::size_t f = 0; f < t.num_states(); ++f) {
    const double p = t.joint_pmf()[f];
    if (p <= 0.0) continue;
    acc -= p * std::log(p / mi[t.decode(f)[i]]);
  }
  return acc;
}

/// H(θᵢ | θ₋ᵢ) = −Σ π(θ) log π(θᵢ | θ₋ᵢ).
inline double enum_block_conditional_entropy(const DiscreteTarget& t,
                                             std::size_t i) {
  const auto mc = t.complement_marginal(i);
  double acc = 0.0;
  for (std::size_t f = 0; f < t.num_states(); ++f) {
    const double p = t.joint_pmf()[f];
    if (p <= 0.0) continue;
    acc -= p * std::log(p / mc[t.complement_flat(i, t.decode(f))]);
  }
  return acc;
}

/// Mean-field coordinate update by direct table enumeration:
/// q(θᵢ) ∝ exp Σ_{θ₋ᵢ} q(θ₋ᵢ) log π(θᵢ | θ₋ᵢ).
inline DiscreteFactor enum_cavi_update(const DiscreteTarget& t,
                                       const std::vector<DiscreteFactor>& factors,
                                       std::size_t i) {
  t.decomposition().check_index(i);
  if (factors.size() != t.num_blocks()) {
    throw std::invalid_argument("need one factor per block");
  }
  for (std::size_t j = 0; j < factors.size(); ++j) {
    if (factors[j].size() != t.support_sizes()[j]) {
      throw std::invalid_argument("factor " + std::to_string(j + 1) +
                                  " has the wrong support size");
    }
    factors[j].validate();
  }
  const auto mc = t.complement_marginal(i);
  std::vector<double> lw(t.support_sizes()[i], 0.0);
  for (std::size_t f = 0; f < t.num_states(); ++f) {
    const auto s = t.decode(f);
    double w = 1.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i) w *= factors[j].pmf[s[j]];
    }
    if (w <= 0.0) continue;
    const double p = t.joint_pmf()[f];
    const double pc = mc[t.complement_flat(i, s)];
    if (p <= 0.0) {
      throw std::domain_error(
          "block " + std::to_string(i + 1) +
          ": log of zero conditional where the complement factor has mass");
    }
    lw[s[i]] += w * std::log(p / pc);
  }
  return DiscreteFactor::from_log_weights(lw);
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_DISCRETE_HPP
