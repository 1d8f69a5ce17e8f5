#ifndef DUALITY_BENCH_MODEL_HPP
#define DUALITY_BENCH_MODEL_HPP

#include <concepts>
#include <cstddef>
#include <string_view>

#include "duality_bench/block.hpp"
#include "duality_bench/quadrature.hpp"
#include "duality_bench/rng.hpp"

namespace duality_bench {

/// A normalized density on one block's space that can be evaluated and
/// sampled.
template <class C>
concept ConditionalDensity =
    requires(const C& c, const Eigen::VectorXd& x, Rng& rng) {
      { c.log_density(x) } -> std::convertible_to<double>;
      { c.sample(rng) } -> std::convertible_to<Eigen::VectorXd>;
    };

/// Posterior π(θ|y) over a block-decomposed space. full_conditional takes
/// block i and the complement θ₋ᵢ (all other blocks, in block order).
/// Evaluations are pure, so a model may be shared between threads.
template <class M>
concept TargetModel = requires(const M& m, const ParamVector& theta,
                               std::size_t i, Rng& rng) {
  { m.decomposition() } -> std::convertible_to<const BlockDecomposition&>;
  { m.log_unnormalized_posterior(theta) } -> std::convertible_to<double>;
  { m.full_conditional(i, theta) } -> ConditionalDensity;
  { m.initial_draw(rng) } -> std::convertible_to<ParamVector>;
  { m.initializer_name() } -> std::convertible_to<std::string_view>;
  { M::has_analytic_marginals } -> std::convertible_to<bool>;
  { M::is_discrete } -> std::convertible_to<bool>;
};

/// A model that declares a reference grid (or exact finite support) for
/// every block. `points` is the per-coordinate resolution and is ignored by
/// finite models.
template <class M>
concept GridModel = TargetModel<M> &&
                    requires(const M& m, std::size_t i, std::size_t points) {
                      { m.block_support(i, points) } -> std::same_as<SupportGrid>;
                    };

/// A grid model whose joint, block marginals and complement marginals are
/// available as normalized log densities.
template <class M>
concept AnalyticModel =
    GridModel<M> && M::has_analytic_marginals &&
    requires(const M& m, const ParamVector& theta, std::size_t i,
             const Eigen::VectorXd& x) {
      { m.log_posterior_density(theta) } -> std::convertible_to<double>;
      { m.log_block_marginal(i, x) } -> std::convertible_to<double>;
      { m.log_complement_marginal(i, x) } -> std::convertible_to<double>;
    };

template <class M>
using conditional_t =
    decltype(std::declval<const M&>().full_conditional(std::size_t{},
                                                       ParamVector{}));

/// Product grid of every block except i, in block order.
template <GridModel M>
SupportGrid complement_support(const M& model, std::size_t i,
                               std::size_t points) {
  std::vector<SupportGrid> grids;
  for (std::size_t j = 0; j < model.decomposition().num_blocks(); ++j) {
    if (j != i) grids.push_back(model.block_support(j, points));
  }
  return tensor_product(grids);
}

/// Total mass of a conditional density under a grid measure.
template <ConditionalDensity C>
double grid_mass(const C& density, const SupportGrid& grid) {
  std::vector<double> lv(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    lv[k] = density.log_density(grid.node(k));
  }
  return std::exp(log_integral(grid, lv));
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_MODEL_HPP
