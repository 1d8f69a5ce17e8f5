#ifndef DUALITY_BENCH_QUADRATURE_HPP
#define DUALITY_BENCH_QUADRATURE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace duality_bench {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Stable log(sum(exp(x))). Returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> x) {
  double hi = kNegInf;
  for (double v : x) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

/// Discrete approximation of a dominating measure on a block space: nodes
/// (one column per node) and nonnegative weights. Trapezoid weights give
/// Lebesgue measure; unit weights on integer nodes give counting measure.
struct SupportGrid {
  Eigen::MatrixXd nodes;  // dim x size
  std::vector<double> weights;
  std::vector<double> log_weights;
  bool counting = false;

  std::size_t size() const { return weights.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(nodes.rows()); }
  Eigen::VectorXd node(std::size_t k) const {
    return nodes.col(static_cast<Eigen::Index>(k));
  }
};

inline SupportGrid make_grid(Eigen::MatrixXd nodes, std::vector<double> weights,
                             bool counting) {
  SupportGrid g;
  g.nodes = std::move(nodes);
  g.weights = std::move(weights);
  g.log_weights.resize(g.weights.size());
  std::transform(g.weights.begin(), g.weights.end(), g.log_weights.begin(),
                 [](double w) { return std::log(w); });
  g.counting = counting;
  return g;
}

/// Composite trapezoid rule on [lo, hi] with n >= 2 equispaced nodes.
inline SupportGrid trapezoid_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) {
    throw std::invalid_argument("trapezoid grid needs n >= 2 and hi > lo");
  }
  const double h = (hi - lo) / static_cast<double>(n - 1);
  Eigen::MatrixXd nodes(1, static_cast<Eigen::Index>(n));
  std::vector<double> w(n, h);
  for (std::size_t k = 0; k < n; ++k) {
    nodes(0, static_cast<Eigen::Index>(k)) = lo + h * static_cast<double>(k);
  }
  w.front() = w.back() = 0.5 * h;
  return make_grid(std::move(nodes), std::move(w), false);
}

/// Counting measure on {0, ..., n-1}.
inline SupportGrid counting_grid(std::size_t n) {
  Eigen::MatrixXd nodes(1, static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    nodes(0, static_cast<Eigen::Index>(k)) = static_cast<double>(k);
  }
  return make_grid(std::move(nodes), std::vector<double>(n, 1.0), true);
}

inline constexpr std::size_t kMaxTensorNodes = 50'000'000;

/// Product measure. Node ordering is row-major: the last factor varies
/// fastest.
inline SupportGrid tensor_product(const std::vector<SupportGrid>& factors) {
  if (factors.empty()) {
    throw std::invalid_argument("tensor product of zero grids");
  }
  std::size_t total = 1;
  Eigen::Index dim = 0;
  bool counting = true;
  for (const auto& f : factors) {
    if (f.size() == 0) throw std::invalid_argument("empty grid factor");
    if (total > kMaxTensorNodes / f.size()) {
      throw std::invalid_argument("tensor grid exceeds " +
                                  std::to_string(kMaxTensorNodes) + " nodes");
    }
    total *= f.size();
    dim += f.nodes.rows();
    counting = counting && f.counting;
  }
  if (factors.size() == 1) return factors.front();

  Eigen::MatrixXd nodes(dim, static_cast<Eigen::Index>(total));
  std::vector<double> weights(total);
  std::vector<std::size_t> idx(factors.size(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    double w = 1.0;
    Eigen::Index row = 0;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const auto& g = factors[f];
      nodes.block(row, static_cast<Eigen::Index>(k), g.nodes.rows(), 1) =
          g.nodes.col(static_cast<Eigen::Index>(idx[f]));
      row += g.nodes.rows();
      w *= g.weights[idx[f]];
    }
    weights[k] = w;
    for (std::size_t f = factors.size(); f-- > 0;) {
      if (++idx[f] < factors[f].size()) break;
      idx[f] = 0;
    }
  }
  return make_grid(std::move(nodes), std::move(weights), counting);
}

/// log of the integral of exp(log_f) against the grid measure.
inline double log_integral(const SupportGrid& grid,
                           std::span<const double> log_f) {
  if (log_f.size() != grid.size()) {
    throw std::invalid_argument("log_integral: size mismatch");
  }
  std::vector<double> terms(log_f.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    terms[k] = log_f[k] + grid.log_weights[k];
  }
  return log_sum_exp(terms);
}

/// Density tabulated on a grid, normalized against the grid measure.
/// Stored in log space; -inf marks points outside the support.
struct TabulatedFactor {
  SupportGrid grid;
  std::vector<double> log_density;

  std::size_t size() const { return log_density.size(); }
  double density(std::size_t k) const { return std::exp(log_density[k]); }

  /// Normalize exp(log_values) against the grid measure.
  static TabulatedFactor from_log_values(SupportGrid grid,
                                         std::vector<double> log_values) {
    const double log_z = log_integral(grid, log_values);
    if (!std::isfinite(log_z)) {
      throw std::domain_error("tabulated density is not normalizable");
    }
    for (auto& v : log_values) v -= log_z;
    return TabulatedFactor{std::move(grid), std::move(log_values)};
  }

  template <class Fn>
  double expect(Fn&& fn) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      if (log_density[k] == kNegInf) continue;
      acc += grid.weights[k] * std::exp(log_density[k]) * fn(k);
    }
    return acc;
  }

  double total_mass() const {
    return expect([](std::size_t) { return 1.0; });
  }
};

/// Product density of independent factors on the tensor grid of their
/// grids (same node ordering as tensor_product).
inline TabulatedFactor product_factor(
    const std::vector<const TabulatedFactor*>& factors) {
  std::vector<SupportGrid> grids;
  for (const auto* f : factors) grids.push_back(f->grid);
  TabulatedFactor out{tensor_product(grids), {}};
  out.log_density.resize(out.grid.size());
  std::vector<std::size_t> idx(factors.size(), 0);
  for (std::size_t c = 0; c < out.size(); ++c) {
    double lq = 0.0;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      lq += factors[f]->log_density[idx[f]];
    }
    out.log_density[c] = lq;
    for (std::size_t f = factors.size(); f-- > 0;) {
      if (++idx[f] < factors[f]->size()) break;
      idx[f] = 0;
    }
  }
  return out;
}

/// Mixture a*p + (1-a)*q of two factors on the same grid.
inline TabulatedFactor mix(const TabulatedFactor& p, const TabulatedFactor& q,
                           double a) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("mixture of factors on different grids");
  }
  if (!(a >= 0.0 && a <= 1.0)) {
    throw std::invalid_argument("mixture weight must lie in [0, 1]");
  }
  std::vector<double> lv(p.size());
  for (std::size_t k = 0; k < lv.size(); ++k) {
    const double v = a * p.density(k) + (1.0 - a) * q.density(k);
    lv[k] = v > 0.0 ? std::log(v) : kNegInf;
  }
  TabulatedFactor m{p.grid, std::move(lv)};
  if (std::abs(m.total_mass() - 1.0) > 1e-10) {
    throw std::domain_error("mixture is not normalized");
  }
  return m;
}

/// KL(q || p) for two factors on the same grid; +inf if q is not
/// absolutely continuous with respect to p on the grid.
inline double tabulated_kl(const TabulatedFactor& q, const TabulatedFactor& p) {
  if (q.size() != p.size()) {
    throw std::invalid_argument("KL of factors on different grids");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q.log_density[k] == kNegInf) continue;
    if (p.log_density[k] == kNegInf) {
      return std::numeric_limits<double>::infinity();
    }
    acc += q.grid.weights[k] * q.density(k) *
           (q.log_density[k] - p.log_density[k]);
  }
  return acc;
}

/// sup-norm distance between the tabulated densities.
inline double sup_distance(const TabulatedFactor& a, const TabulatedFactor& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("sup distance of factors on different grids");
  }
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d = std::max(d, std::abs(a.density(k) - b.density(k)));
  }
  return d;
}

}  // namespace duality_bench

#endif  // DUALITY_BENCH_QUADRATURE_HPP
