#ifndef DUALITY_BENCH_CAVI_HPP
#define DUALITY_BENCH_CAVI_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "duality_bench/discrete.hpp"
#include "duality_bench/gaussian.hpp"
#include "duality_bench/model.hpp"
#include "duality_bench/quadrature.hpp"

namespace duality_bench {

/// Product-form approximation q(θ) = ∏ q(θᵢ), one factor per block.
template <class Factor>
struct MeanFieldState {
  std::vector<Factor> factors;
  std::size_t iterations = 0;
  /// KL(∏q ‖ π) at the start and after every single-block update, when the
  /// target's normalized density is available.
  std::vector<double> objective_history;
  bool converged = false;
  double last_change = std::numeric_limits<double>::infinity();
};

struct CaviConfig {
  std::size_t max_cycles = 100;
  /// Stop once a whole cycle changes no factor parameter (or tabulated
  /// density value) by more than this.
  double tolerance = 1e-10;

  void validate() const {
    if (max_cycles == 0) throw std::invalid_argument("max_cycles must be positive");
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  }
};

// ---------------------------------------------------------------------------
// Factor changes

inline double factor_change(const GaussianFactor& a, const GaussianFactor& b) {
  return std::max((a.mean() - b.mean()).cwiseAbs().maxCoeff(),
                  (a.covariance() - b.covariance()).cwiseAbs().maxCoeff());
}

inline double factor_change(const DiscreteFactor& a, const DiscreteFactor& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d = std::max(d, std::abs(a.pmf[k] - b.pmf[k]));
  }
  return d;
}

inline double factor_change(const TabulatedFactor& a, const TabulatedFactor& b) {
  return sup_distance(a, b);
}

// ---------------------------------------------------------------------------
// Coordinate updates

/// Closed-form update for a Gaussian target: the exponentiated expected log
/// full conditional is N(μᵢ − Λᵢᵢ⁻¹Λᵢ,₋ᵢ(E[θ₋ᵢ] − μ₋ᵢ), Λᵢᵢ⁻¹).
inline GaussianFactor cavi_update(const GaussianTarget& target,
                                  const MeanFieldState<GaussianFactor>& state,
                                  std::size_t i) {
  const auto& dec = target.decomposition();
  dec.check_index(i);
  if (state.factors.size() != dec.num_blocks()) {
    throw std::invalid_argument("state needs one factor per block");
  }
  Eigen::VectorXd complement_mean(
      static_cast<Eigen::Index>(dec.complement_dim(i)));
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < dec.num_blocks(); ++j) {
    if (j == i) continue;
    const auto& m = state.factors[j].mean();
    if (static_cast<std::size_t>(m.size()) != dec.block_dim(j)) {
      throw std::invalid_argument("factor " + std::to_string(j + 1) +
                                  " has the wrong dimension");
    }
    complement_mean.segment(at, m.size()) = m;
    at += m.size();
  }
  return GaussianFactor(target.conditional_mean(i, complement_mean),
                        target.conditional_covariance(i));
}

/// Coordinate update on tabulated factors for any grid model:
/// log q(θᵢ) = Σ_{θ₋ᵢ} w q(θ₋ᵢ) log π(θᵢ | θ₋ᵢ) + const, evaluated through
/// the model's full conditionals on the grid carried by the state.
template <GridModel M>
TabulatedFactor cavi_update(const M& model,
                            const MeanFieldState<TabulatedFactor>& state,
                            std::size_t i) {
  const auto& dec = model.decomposition();
  dec.check_index(i);
  if (state.factors.size() != dec.num_blocks()) {
    throw std::invalid_argument("state needs one factor per block");
  }
  std::vector<const TabulatedFactor*> others;
  for (std::size_t j = 0; j < dec.num_blocks(); ++j) {
    if (j != i) others.push_back(&state.factors[j]);
  }
  const TabulatedFactor comp = product_factor(others);

  const SupportGrid& block_grid = state.factors[i].grid;
  std::vector<double> acc(block_grid.size(), 0.0);
  for (std::size_t c = 0; c < comp.size(); ++c) {
    const double w = comp.grid.weights[c] * comp.density(c);
    if (w <= 0.0) continue;
    const Eigen::VectorXd complement = comp.grid.node(c);
    const auto conditional = [&] {
      try {
        return model.full_conditional(i, complement);
      } catch (const std::domain_error& e) {
        throw std::domain_error("block " + std::to_string(i + 1) +
                                ": divergent expectation (" + e.what() + ")");
      }
    }();
    for (std::size_t k = 0; k < block_grid.size(); ++k) {
      const double lp = conditional.log_density(
          block_grid.nodes.col(static_cast<Eigen::Index>(k)));
      if (!std::isfinite(lp)) {
        throw std::domain_error(
            "block " + std::to_string(i + 1) +
            ": log of zero conditional where the complement factor has mass");
      }
      acc[k] += w * lp;
    }
  }
  return TabulatedFactor::from_log_values(block_grid, std::move(acc));
}

/// Same update for finite models, carried in pmf form.
template <GridModel M>
  requires(M::is_discrete)
DiscreteFactor cavi_update(const M& model,
                           const MeanFieldState<DiscreteFactor>& state,
                           std::size_t i) {
  MeanFieldState<TabulatedFactor> tab;
  for (std::size_t j = 0; j < state.factors.size(); ++j) {
    tab.factors.push_back(tabulate(state.factors[j], model.block_support(j, 0)));
  }
  return to_discrete(cavi_update(model, tab, i));
}

// ---------------------------------------------------------------------------
// Objective KL(∏ q ‖ π)

inline double kl_objective(const GaussianTarget& target,
                           const MeanFieldState<GaussianFactor>& state) {
  std::vector<const GaussianFactor*> fs;
  for (const auto& f : state.factors) fs.push_back(&f);
  return gaussian_kl(product_gaussian(fs),
                     GaussianFactor(target.mean(), target.covariance()));
}

inline double kl_objective(const DiscreteTarget& target,
                           const MeanFieldState<DiscreteFactor>& state) {
  if (state.factors.size() != target.num_blocks()) {
    throw std::invalid_argument("state needs one factor per block");
  }
  double acc = 0.0;
  for (std::size_t f = 0; f < target.num_states(); ++f) {
    const auto s = target.decode(f);
    double q = 1.0;
    for (std::size_t j = 0; j < s.size(); ++j) q *= state.factors[j].pmf[s[j]];
    if (q <= 0.0) continue;
    const double p = target.joint_pmf()[f];
    if (p <= 0.0) return std::numeric_limits<double>::infinity();
    acc += q * std::log(q / p);
  }
  return std::max(0.0, acc);
}

/// Tensor quadrature over the factors' grids; needs a normalized target.
template <GridModel M>
double kl_objective(const M& model,
                    const MeanFieldState<TabulatedFactor>& state) {
  if constexpr (!requires(const ParamVector& t) {
                  model.log_posterior_density(t);
                }) {
    throw std::logic_error("objective requires normalized target");
  } else {
    std::vector<const TabulatedFactor*> fs;
    for (const auto& f : state.factors) fs.push_back(&f);
    const TabulatedFactor q = product_factor(fs);
    double acc = 0.0;
    for (std::size_t c = 0; c < q.size(); ++c) {
      const double lq = q.log_density[c];
      if (lq == kNegInf) continue;
      const double lp = model.log_posterior_density(q.grid.node(c));
      if (lp == kNegInf) return std::numeric_limits<double>::infinity();
      acc += q.grid.weights[c] * std::exp(lq) * (lq - lp);
    }
    return acc;
  }
}

namespace detail {
template <class M>
constexpr bool normalized_target() {
  return requires(const M& m, const ParamVector& t) {
    m.log_posterior_density(t);
  };
}
}  // namespace detail

/// Coordinate ascent: sweeps blocks 0..K-1 until a full cycle changes no
/// factor by more than cfg.tolerance or max_cycles is reached. Hitting
/// max_cycles leaves converged == false.
template <class M, class F>
MeanFieldState<F> cavi_run(const M& model, const CaviConfig& cfg,
                           MeanFieldState<F> state) {
  cfg.validate();
  const std::size_t k = model.decomposition().num_blocks();
  if (state.factors.size() != k) {
    throw std::invalid_argument("initial state needs one factor per block");
  }
  constexpr bool track = detail::normalized_target<M>();
  state.iterations = 0;
  state.converged = false;
  state.objective_history.clear();
  if constexpr (track) state.objective_history.push_back(kl_objective(model, state));

  for (std::size_t cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    double change = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      F next = cavi_update(model, state, i);
      change = std::max(change, factor_change(state.factors[i], next));
      state.factors[i] = std::move(next);
      if constexpr (track) {
        state.objective_history.push_back(kl_objective(model, state));
      }
    }
    state.iterations = cycle;
    state.last_change = change;
    if (change < cfg.tolerance) {
      state.converged = true;
      break;
    }
  }
  return state;
}

// ---------------------------------------------------------------------------
// Initial states

/// Exact marginals (the default for analytic Gaussian targets).
inline MeanFieldState<GaussianFactor> marginal_init(const GaussianTarget& t) {
  MeanFieldState<GaussianFactor> s;
  for (std::size_t i = 0; i < t.decomposition().num_blocks(); ++i) {
    s.factors.push_back(t.marginal(i));
  }
  return s;
}

inline MeanFieldState<GaussianFactor> standard_normal_init(
    const GaussianTarget& t) {
  MeanFieldState<GaussianFactor> s;
  for (auto d : t.decomposition().block_dims()) {
    const auto n = static_cast<Eigen::Index>(d);
    s.factors.emplace_back(Eigen::VectorXd::Zero(n),
                           Eigen::MatrixXd::Identity(n, n));
  }
  return s;
}

inline MeanFieldState<DiscreteFactor> uniform_init(const DiscreteTarget& t) {
  MeanFieldState<DiscreteFactor> s;
  for (auto n : t.support_sizes()) s.factors.push_back(DiscreteFactor::uniform(n));
  return s;
}

/// Standard normal tabulated on each block's declared grid.
template <GridModel M>
MeanFieldState<TabulatedFactor> tabulated_standard_normal_init(
    const M& model, std::size_t points) {
  MeanFieldState<TabulatedFactor> s;
  const auto& dec = model.decomposition();
  for (std::size_t i = 0; i < dec.num_blocks(); ++i) {
    const auto n = static_cast<Eigen::Index>(dec.block_dim(i));
    s.factors.push_back(
        tabulate(GaussianFactor(Eigen::VectorXd::Zero(n),
                                Eigen::MatrixXd::Identity(n, n)),
                 model.block_support(i, points)));
  }
  return s;
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_CAVI_HPP
