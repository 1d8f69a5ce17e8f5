#ifndef DUALITY_BENCH_DIAGNOSTICS_HPP
#define DUALITY_BENCH_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "duality_bench/cavi.hpp"
#include "duality_bench/discrete.hpp"
#include "duality_bench/gaussian.hpp"
#include "duality_bench/model.hpp"
#include "duality_bench/quadrature.hpp"
#include "duality_bench/rng.hpp"

namespace duality_bench {

// ===========================================================================
// Duality formula: log E_p[exp h] = sup_{q ≪ p} { E_q[h] − KL(q ‖ p) }

/// Base density p, test function h and candidate q tabulated on a common
/// grid. log_p and log_q are normalized against the grid measure.
struct DualityProblem {
  SupportGrid grid;
  std::vector<double> log_p;
  std::vector<double> h;
  std::vector<double> log_q;

  void validate() const {
    const std::size_t n = grid.size();
    if (log_p.size() != n || h.size() != n || log_q.size() != n) {
      throw std::invalid_argument("duality problem: size mismatch");
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (log_q[k] != kNegInf && log_p[k] == kNegInf) {
        throw std::domain_error("duality problem: q is not dominated by p");
      }
      if (log_p[k] != kNegInf && !std::isfinite(h[k])) {
        throw std::domain_error("duality problem: h is not finite on supp p");
      }
    }
  }
};

struct DualitySides {
  double log_mgf = 0.0;    // log E_p[exp h]
  double expected_h = 0.0; // E_q[h]
  double kl = 0.0;         // KL(q ‖ p)
  double gap() const { return log_mgf - (expected_h - kl); }
};

inline DualitySides duality_sides(const DualityProblem& prob) {
  prob.validate();
  const std::size_t n = prob.grid.size();
  std::vector<double> terms(n);
  for (std::size_t k = 0; k < n; ++k) {
    terms[k] = prob.log_p[k] == kNegInf
                   ? kNegInf
                   : prob.grid.log_weights[k] + prob.log_p[k] + prob.h[k];
  }
  DualitySides s;
  s.log_mgf = log_sum_exp(terms);
  if (!std::isfinite(s.log_mgf)) {
    throw std::domain_error("exp h is not integrable against p on the grid");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (prob.log_q[k] == kNegInf) continue;
    const double wq = prob.grid.weights[k] * std::exp(prob.log_q[k]);
    s.expected_h += wq * prob.h[k];
    s.kl += wq * (prob.log_q[k] - prob.log_p[k]);
  }
  return s;
}

/// log E_p[exp h] − (E_q[h] − KL(q ‖ p)); nonnegative, zero exactly at the
/// exponential tilt of p by h.
inline double duality_gap(const DualityProblem& prob) {
  return duality_sides(prob).gap();
}

/// log of p·exp(h) / E_p[exp h] on the grid.
inline std::vector<double> exponential_tilt(const SupportGrid& grid,
                                            const std::vector<double>& log_p,
                                            const std::vector<double>& h) {
  std::vector<double> lv(grid.size());
  for (std::size_t k = 0; k < lv.size(); ++k) {
    lv[k] = log_p[k] == kNegInf ? kNegInf : log_p[k] + h[k];
  }
  return TabulatedFactor::from_log_values(grid, std::move(lv)).log_density;
}

/// Random continuous problem: p and q Gaussian (mean in [−2, 2], variance
/// in [0.25, 4]) and h(θ) = aθ − cθ² + d·sin θ, tabulated on a trapezoid
/// grid covering ±8 standard deviations of both densities.
inline DualityProblem random_gaussian_duality_problem(Rng& rng,
                                                      std::size_t points) {
  const double mp = rng.uniform(-2.0, 2.0), vp = rng.uniform(0.25, 4.0);
  const double mq = rng.uniform(-2.0, 2.0), vq = rng.uniform(0.25, 4.0);
  const double a = rng.uniform(-1.0, 1.0), c = rng.uniform(0.0, 0.5),
               d = rng.uniform(-1.0, 1.0);
  const double lo = std::min(mp - 8.0 * std::sqrt(vp), mq - 8.0 * std::sqrt(vq));
  const double hi = std::max(mp + 8.0 * std::sqrt(vp), mq + 8.0 * std::sqrt(vq));
  DualityProblem prob;
  prob.grid = trapezoid_grid(lo, hi, points);
  prob.log_p = tabulate(GaussianFactor::scalar(mp, vp), prob.grid).log_density;
  prob.log_q = tabulate(GaussianFactor::scalar(mq, vq), prob.grid).log_density;
  prob.h.resize(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double x = prob.grid.nodes(0, static_cast<Eigen::Index>(k));
    prob.h[k] = a * x - c * x * x + d * std::sin(x);
  }
  return prob;
}

/// Dirichlet(1, ..., 1) draw of length n.
inline std::vector<double> random_simplex_point(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) {
    x = -std::log(1.0 - rng.uniform());
    s += x;
  }
  for (auto& x : v) x /= s;
  return v;
}

/// Random counting-measure problem on 2..16 states: p, q Dirichlet draws,
/// h uniform in [−3, 3].
inline DualityProblem random_discrete_duality_problem(Rng& rng) {
  const std::size_t n = 2 + rng.below(15);
  DualityProblem prob;
  prob.grid = counting_grid(n);
  auto to_log = [](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(),
                   [](double x) { return std::log(x); });
    return out;
  };
  prob.log_p = to_log(random_simplex_point(rng, n));
  prob.log_q = to_log(random_simplex_point(rng, n));
  prob.h.resize(n);
  for (auto& x : prob.h) x = rng.uniform(-3.0, 3.0);
  return prob;
}

// ===========================================================================
// Tabulation of factors on block grids

template <GridModel M>
TabulatedFactor tabulate_factor(const M& model, std::size_t j,
                                const GaussianFactor& f, std::size_t points) {
  return tabulate(f, model.block_support(j, points));
}

template <GridModel M>
TabulatedFactor tabulate_factor(const M& model, std::size_t j,
                                const DiscreteFactor& f, std::size_t) {
  return tabulate(f, model.block_support(j, 0));
}

template <GridModel M>
TabulatedFactor tabulate_factor(const M&, std::size_t, const TabulatedFactor& f,
                                std::size_t) {
  return f;
}

template <GridModel M, class F>
std::vector<TabulatedFactor> tabulate_state(const M& model,
                                            const MeanFieldState<F>& state,
                                            std::size_t points) {
  if (state.factors.size() != model.decomposition().num_blocks()) {
    throw std::invalid_argument("state needs one factor per block");
  }
  std::vector<TabulatedFactor> out;
  for (std::size_t j = 0; j < state.factors.size(); ++j) {
    out.push_back(tabulate_factor(model, j, state.factors[j], points));
  }
  return out;
}

/// The model's full conditional π(θᵢ | θ₋ᵢ) tabulated on a grid.
template <GridModel M>
TabulatedFactor tabulate_full_conditional(const M& model, std::size_t i,
                                          const Eigen::VectorXd& complement,
                                          const SupportGrid& grid) {
  const auto cond = model.full_conditional(i, complement);
  std::vector<double> lv(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    lv[k] = cond.log_density(grid.nodes.col(static_cast<Eigen::Index>(k)));
  }
  return TabulatedFactor::from_log_values(grid, std::move(lv));
}

/// The block marginal π(θᵢ) tabulated on a grid.
template <AnalyticModel M>
TabulatedFactor tabulate_marginal(const M& model, std::size_t i,
                                  const SupportGrid& grid) {
  std::vector<double> lv(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    lv[k] = model.log_block_marginal(i, grid.node(k));
  }
  return TabulatedFactor::from_log_values(grid, std::move(lv));
}

/// Random candidate density on a block grid: Dirichlet(1) on counting grids,
/// otherwise a Gaussian with mean in [−2, 2] and variance in [0.25, 4].
inline TabulatedFactor random_candidate(const SupportGrid& grid, Rng& rng) {
  if (grid.counting) {
    const auto p = random_simplex_point(rng, grid.size());
    std::vector<double> lv(p.size());
    std::transform(p.begin(), p.end(), lv.begin(),
                   [](double x) { return std::log(x); });
    return TabulatedFactor{grid, std::move(lv)};
  }
  if (grid.dim() != 1) {
    throw std::invalid_argument("random candidates need scalar blocks");
  }
  const double m = rng.uniform(-2.0, 2.0), v = rng.uniform(0.25, 4.0);
  return tabulate(GaussianFactor::scalar(m, v), grid);
}

// ===========================================================================
// Functional F_i{q} = E_q[log π(θ₋ᵢ | θᵢ)] − KL(q ‖ π(θᵢ))

/// Duality problem behind F_i at a fixed complement point: p = π(θᵢ),
/// h = log π(θ₋ᵢ | θᵢ), candidate q. Its gap is log π(θ₋ᵢ) − F_i{q}.
template <AnalyticModel M>
DualityProblem functional_problem(const M& model, std::size_t i,
                                  const Eigen::VectorXd& complement,
                                  const TabulatedFactor& q) {
  const auto& dec = model.decomposition();
  DualityProblem prob;
  prob.grid = q.grid;
  prob.log_q = q.log_density;
  prob.log_p.resize(q.size());
  prob.h.resize(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    const Eigen::VectorXd x = q.grid.node(k);
    prob.log_p[k] = model.log_block_marginal(i, x);
    if (q.log_density[k] != kNegInf && prob.log_p[k] == kNegInf) {
      throw std::domain_error("candidate q is not dominated by π(θ" +
                              std::to_string(i + 1) + ")");
    }
    prob.h[k] = prob.log_p[k] == kNegInf
                    ? 0.0
                    : model.log_posterior_density(join(dec, i, x, complement)) -
                          prob.log_p[k];
    if (!std::isfinite(prob.h[k])) prob.h[k] = -1e300;
  }
  return prob;
}

template <AnalyticModel M>
double functional_F(const M& model, std::size_t i,
                    const Eigen::VectorXd& complement,
                    const TabulatedFactor& q) {
  const auto s = duality_sides(functional_problem(model, i, complement, q));
  return s.expected_h - s.kl;
}

/// F(a·p + (1−a)·q) − [a·F(p) + (1−a)·F(q)]; nonnegative by concavity.
template <AnalyticModel M>
double concavity_probe(const M& model, std::size_t i,
                       const Eigen::VectorXd& complement,
                       const TabulatedFactor& p, const TabulatedFactor& q,
                       double a) {
  const TabulatedFactor m = mix(p, q, a);
  return functional_F(model, i, complement, m) -
         (a * functional_F(model, i, complement, p) +
          (1.0 - a) * functional_F(model, i, complement, q));
}

/// Candidates closer than this (in KL) to the full conditional count as
/// equal to it within the 1e-8 attainment tolerance.
inline constexpr double kDistinctKl = 2e-8;

struct FunctionalSummary {
  double reference = 0.0;          // log π(θ₋ᵢ)
  double at_full_conditional = 0.0;
  double max_excess = kNegInf;     // max over random q of F − reference
  // min of reference − F over candidates whose KL from the full conditional
  // exceeds kDistinctKl; closer ones are counted in near_conditional
  double min_shortfall = std::numeric_limits<double>::infinity();
  double max_identity_error = 0.0;  // max |(reference − F) − KL(q ‖ full cond.)|
  std::size_t near_conditional = 0;
  double min_concavity_slack = std::numeric_limits<double>::infinity();
  std::size_t candidates = 0;
  std::size_t mixtures = 0;
};

/// Checks the upper bound, its attainment at the full conditional, and
/// concavity with random candidates and random mixtures on `grid`.
template <AnalyticModel M>
FunctionalSummary functional_suite(const M& model, std::size_t i,
                                   const Eigen::VectorXd& complement,
                                   const SupportGrid& grid, Rng& rng,
                                   std::size_t candidates,
                                   std::size_t mixtures) {
  FunctionalSummary s;
  s.reference = model.log_complement_marginal(i, complement);
  const auto fc = tabulate_full_conditional(model, i, complement, grid);
  s.at_full_conditional = functional_F(model, i, complement, fc);
  for (std::size_t n = 0; n < candidates; ++n) {
    const auto q = random_candidate(grid, rng);
    const double f = functional_F(model, i, complement, q);
    const double kl = tabulated_kl(q, fc);
    s.max_excess = std::max(s.max_excess, f - s.reference);
    s.max_identity_error =
        std::max(s.max_identity_error, std::abs((s.reference - f) - kl));
    if (kl > kDistinctKl) {
      s.min_shortfall = std::min(s.min_shortfall, s.reference - f);
    } else {
      ++s.near_conditional;
    }
  }
  for (std::size_t n = 0; n < mixtures; ++n) {
    const auto p = random_candidate(grid, rng);
    const auto q = random_candidate(grid, rng);
    const double a = rng.uniform();
    s.min_concavity_slack = std::min(
        s.min_concavity_slack, concavity_probe(model, i, complement, p, q, a));
  }
  s.candidates = candidates;
  s.mixtures = mixtures;
  return s;
}

// ===========================================================================
// Information equality I(θᵢ; θ₋ᵢ) = H(θ₋ᵢ) − H(θ₋ᵢ | θᵢ)

struct InformationTerms {
  double mutual_information = 0.0;
  double complement_entropy = 0.0;              // H(θ₋ᵢ)
  double complement_conditional_entropy = 0.0;  // H(θ₋ᵢ | θᵢ)
  double block_entropy = 0.0;                   // H(θᵢ)
  double block_conditional_entropy = 0.0;       // H(θᵢ | θ₋ᵢ)

  double residual() const {
    return std::abs(mutual_information -
                    (complement_entropy - complement_conditional_entropy));
  }
  double symmetric_residual() const {
    return std::abs(mutual_information -
                    (block_entropy - block_conditional_entropy));
  }
};

/// Each term straight from its defining sum or integral over the grids
/// (exact enumeration for finite models). `points` is the per-coordinate
/// resolution of the tensor grids.
template <AnalyticModel M>
InformationTerms information_terms(const M& model, std::size_t i,
                                   std::size_t points) {
  const auto& dec = model.decomposition();
  const SupportGrid bgrid = model.block_support(i, points);
  const SupportGrid cgrid = complement_support(model, i, points);

  std::vector<double> lb(bgrid.size()), lc(cgrid.size());
  for (std::size_t a = 0; a < bgrid.size(); ++a) {
    lb[a] = model.log_block_marginal(i, bgrid.node(a));
  }
  for (std::size_t c = 0; c < cgrid.size(); ++c) {
    lc[c] = model.log_complement_marginal(i, cgrid.node(c));
  }

  InformationTerms t;
  for (std::size_t a = 0; a < bgrid.size(); ++a) {
    if (lb[a] != kNegInf) {
      t.block_entropy -= bgrid.weights[a] * std::exp(lb[a]) * lb[a];
    }
  }
  for (std::size_t c = 0; c < cgrid.size(); ++c) {
    if (lc[c] != kNegInf) {
      t.complement_entropy -= cgrid.weights[c] * std::exp(lc[c]) * lc[c];
    }
  }
  for (std::size_t a = 0; a < bgrid.size(); ++a) {
    const Eigen::VectorXd x = bgrid.node(a);
    for (std::size_t c = 0; c < cgrid.size(); ++c) {
      const double lj =
          model.log_posterior_density(join(dec, i, x, cgrid.node(c)));
      if (lj == kNegInf) continue;
      const double wp = bgrid.weights[a] * cgrid.weights[c] * std::exp(lj);
      t.mutual_information += wp * (lj - lb[a] - lc[c]);
      t.complement_conditional_entropy -= wp * (lj - lb[a]);
      t.block_conditional_entropy -= wp * (lj - lc[c]);
    }
  }
  return t;
}

/// Closed-form terms for Gaussian targets of any block shape.
inline InformationTerms gaussian_information_terms(const GaussianTarget& t,
                                                   std::size_t i) {
  InformationTerms out;
  out.mutual_information = gaussian_mutual_information(t, i);
  out.complement_entropy = gaussian_entropy(t.complement_marginal(i));
  out.complement_conditional_entropy =
      gaussian_complement_conditional_entropy(t, i);
  out.block_entropy = gaussian_entropy(t.marginal(i));
  const auto& dec = t.decomposition();
  out.block_conditional_entropy = gaussian_entropy(GaussianFactor(
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dec.block_dim(i))),
      t.conditional_covariance(i)));
  return out;
}

/// |I − (H(θ₋ᵢ) − H(θ₋ᵢ | θᵢ))|
template <AnalyticModel M>
double information_equality_check(const M& model, std::size_t i,
                                  std::size_t points) {
  return information_terms(model, i, points).residual();
}

// ===========================================================================
// KL pieces with analytic or enumerated values

inline double block_kl(const GaussianTarget& t, const GaussianFactor& q,
                       std::size_t i) {
  return gaussian_kl(q, t.marginal(i));
}

inline double block_kl(const DiscreteTarget& t, const DiscreteFactor& q,
                       std::size_t i) {
  const auto m = t.marginal(i).pmf;
  double acc = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q.pmf[k] <= 0.0) continue;
    if (m[k] <= 0.0) return std::numeric_limits<double>::infinity();
    acc += q.pmf[k] * std::log(q.pmf[k] / m[k]);
  }
  return std::max(0.0, acc);
}

template <AnalyticModel M>
double block_kl(const M& model, const TabulatedFactor& q, std::size_t i) {
  return tabulated_kl(q, tabulate_marginal(model, i, q.grid));
}

/// KL(∏_{j≠i} q_j ‖ π(θ₋ᵢ))
inline double complement_kl(const GaussianTarget& t,
                            const MeanFieldState<GaussianFactor>& state,
                            std::size_t i) {
  std::vector<const GaussianFactor*> others;
  for (std::size_t j = 0; j < state.factors.size(); ++j) {
    if (j != i) others.push_back(&state.factors[j]);
  }
  return gaussian_kl(product_gaussian(others), t.complement_marginal(i));
}

inline double complement_kl(const DiscreteTarget& t,
                            const MeanFieldState<DiscreteFactor>& state,
                            std::size_t i) {
  const auto mc = t.complement_marginal(i);
  std::vector<double> q(mc.size(), 0.0);
  for (std::size_t f = 0; f < t.num_states(); ++f) {
    const auto s = t.decode(f);
    if (s[i] != 0) continue;
    double w = 1.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i) w *= state.factors[j].pmf[s[j]];
    }
    q[t.complement_flat(i, s)] = w;
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c) {
    if (q[c] <= 0.0) continue;
    if (mc[c] <= 0.0) return std::numeric_limits<double>::infinity();
    acc += q[c] * std::log(q[c] / mc[c]);
  }
  return std::max(0.0, acc);
}

template <AnalyticModel M>
double complement_kl(const M& model,
                     const MeanFieldState<TabulatedFactor>& state,
                     std::size_t i) {
  std::vector<const TabulatedFactor*> others;
  for (std::size_t j = 0; j < state.factors.size(); ++j) {
    if (j != i) others.push_back(&state.factors[j]);
  }
  const TabulatedFactor q = product_factor(others);
  double acc = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c) {
    if (q.log_density[c] == kNegInf) continue;
    const double lp = model.log_complement_marginal(i, q.grid.node(c));
    if (lp == kNegInf) return std::numeric_limits<double>::infinity();
    acc += q.grid.weights[c] * q.density(c) * (q.log_density[c] - lp);
  }
  return acc;
}

// ===========================================================================
// Squashing constant and KL lower bound

struct SquashingConstant {
  double value = 0.0;          // R₋ᵢ
  double log_numerator = 0.0;  // log ∫ exp E_{q(θ₋ᵢ)}[log π(θᵢ | θ₋ᵢ)] dθᵢ
  double complement_kl = 0.0;  // KL(q(θ₋ᵢ) ‖ π(θ₋ᵢ))
};

namespace detail {

/// log ∫ exp E_{outer}[log π(inner | outer)] d(inner), where `outer_block`
/// selects whether the expectation runs over θ₋ᵢ (conditioning block i on
/// its complement) or over θᵢ (conditioning the complement on block i).
template <AnalyticModel M>
double log_expected_conditional_integral(const M& model, std::size_t i,
                                         const TabulatedFactor& block_q,
                                         const TabulatedFactor& comp_q,
                                         bool expect_over_complement) {
  const auto& dec = model.decomposition();
  std::vector<double> lb(block_q.size()), lc(comp_q.size());
  for (std::size_t a = 0; a < block_q.size(); ++a) {
    lb[a] = model.log_block_marginal(i, block_q.grid.node(a));
  }
  for (std::size_t c = 0; c < comp_q.size(); ++c) {
    lc[c] = model.log_complement_marginal(i, comp_q.grid.node(c));
  }
  const TabulatedFactor& outer = expect_over_complement ? comp_q : block_q;
  const TabulatedFactor& inner = expect_over_complement ? block_q : comp_q;
  std::vector<double> expected(inner.size(), 0.0);
  for (std::size_t o = 0; o < outer.size(); ++o) {
    if (outer.log_density[o] == kNegInf) continue;
    const double wq = outer.grid.weights[o] * outer.density(o);
    for (std::size_t n = 0; n < inner.size(); ++n) {
      const std::size_t a = expect_over_complement ? n : o;
      const std::size_t c = expect_over_complement ? o : n;
      const double lj = model.log_posterior_density(
          join(dec, i, block_q.grid.node(a), comp_q.grid.node(c)));
      const double cond = lj - (expect_over_complement ? lc[c] : lb[a]);
      if (!std::isfinite(cond)) {
        expected[n] = kNegInf;
      } else if (expected[n] != kNegInf) {
        expected[n] += wq * cond;
      }
    }
  }
  return log_integral(inner.grid, expected);
}

}  // namespace detail

/// R₋ᵢ{q(θ₋ᵢ)} = ∫ exp E_{q(θ₋ᵢ)}[log π(θᵢ | θ₋ᵢ)] dθᵢ / exp KL(q(θ₋ᵢ) ‖ π(θ₋ᵢ)).
/// The numerator is a log-sum-exp over the block grid; the denominator uses
/// the analytic or enumerated KL for the state's factor family.
template <AnalyticModel M, class F>
SquashingConstant squashing_constant(const M& model,
                                     const MeanFieldState<F>& state,
                                     std::size_t i, std::size_t points) {
  model.decomposition().check_index(i);
  const auto tab = tabulate_state(model, state, points);
  std::vector<const TabulatedFactor*> others;
  for (std::size_t j = 0; j < tab.size(); ++j) {
    if (j != i) others.push_back(&tab[j]);
  }
  SquashingConstant r;
  r.log_numerator = detail::log_expected_conditional_integral(
      model, i, tab[i], product_factor(others), true);
  r.complement_kl = complement_kl(model, state, i);
  r.value = std::exp(r.log_numerator - r.complement_kl);
  return r;
}

inline double factor_log_density(const GaussianFactor& f,
                                 const Eigen::VectorXd& x) {
  return f.log_density(x);
}
inline double factor_log_density(const DiscreteFactor& f,
                                 const Eigen::VectorXd& x) {
  return f.log_density(x);
}
/// Tabulated factors can only be evaluated at their own grid nodes.
inline double factor_log_density(const TabulatedFactor& f,
                                 const Eigen::VectorXd& x) {
  for (std::size_t k = 0; k < f.size(); ++k) {
    if ((f.grid.node(k) - x).cwiseAbs().maxCoeff() <= 1e-12) {
      return f.log_density[k];
    }
  }
  throw std::invalid_argument("point is not a node of the tabulated factor");
}

struct SquashSlack {
  double min_slack = std::numeric_limits<double>::infinity();
  Eigen::VectorXd argmin;
};

/// min over the grid of π(θᵢ) − R·q(θᵢ), given the squashing constant R.
template <AnalyticModel M, class F>
SquashSlack squash_pointwise_check(const M& model,
                                   const MeanFieldState<F>& state,
                                   std::size_t i, const SupportGrid& grid,
                                   double squashing) {
  SquashSlack s;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Eigen::VectorXd x = grid.node(k);
    const double slack =
        std::exp(model.log_block_marginal(i, x)) -
        squashing * std::exp(factor_log_density(state.factors[i], x));
    if (slack < s.min_slack) {
      s.min_slack = slack;
      s.argmin = x;
    }
  }
  return s;
}

template <AnalyticModel M, class F>
SquashSlack squash_pointwise_check(const M& model,
                                   const MeanFieldState<F>& state,
                                   std::size_t i, const SupportGrid& grid,
                                   std::size_t points) {
  return squash_pointwise_check(
      model, state, i, grid, squashing_constant(model, state, i, points).value);
}

struct KlLowerBound {
  double bound = 0.0;    // max{0, raw_log}
  double raw_log = 0.0;  // log ∫ exp E_{q(θᵢ)}[log π(θ₋ᵢ | θᵢ)] dθ₋ᵢ
  double kl = 0.0;       // KL(q(θᵢ) ‖ π(θᵢ)), computed separately
  bool raw_positive() const { return raw_log > 0.0; }
};

template <AnalyticModel M, class F>
KlLowerBound kl_lower_bound(const M& model, const MeanFieldState<F>& state,
                            std::size_t i, std::size_t points) {
  model.decomposition().check_index(i);
  const auto tab = tabulate_state(model, state, points);
  std::vector<const TabulatedFactor*> others;
  for (std::size_t j = 0; j < tab.size(); ++j) {
    if (j != i) others.push_back(&tab[j]);
  }
  // Complement grid from the model, not the state, so the integral over
  // θ₋ᵢ covers the target's support.
  const SupportGrid cgrid = complement_support(model, i, points);
  TabulatedFactor comp{cgrid, std::vector<double>(cgrid.size(), 0.0)};
  KlLowerBound b;
  b.raw_log = detail::log_expected_conditional_integral(model, i, tab[i], comp,
                                                        false);
  b.bound = std::max(0.0, b.raw_log);
  b.kl = block_kl(model, state.factors[i], i);
  return b;
}

// ===========================================================================
// Reference points

inline ParamVector reference_point(const GaussianTarget& t) { return t.mean(); }

/// Mode of the joint pmf (first in row-major order on ties).
inline ParamVector reference_point(const DiscreteTarget& t) {
  const auto& p = t.joint_pmf();
  const auto it = std::max_element(p.begin(), p.end());
  return t.vector_of(t.decode(static_cast<std::size_t>(it - p.begin())));
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_DIAGNOSTICS_HPP
