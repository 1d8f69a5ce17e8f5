#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "duality_bench/cavi.hpp"
#include "duality_bench/gaussian.hpp"

using namespace duality_bench;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

// Mean and variance of exp(log_f) normalized on a grid.
std::pair<double, double> grid_moments(const SupportGrid& g,
                                       const std::vector<double>& log_f) {
  const auto t = TabulatedFactor::from_log_values(g, log_f);
  const double m = t.expect([&](std::size_t k) { return g.nodes(0, (Eigen::Index)k); });
  const double v = t.expect([&](std::size_t k) {
    const double d = g.nodes(0, (Eigen::Index)k) - m;
    return d * d;
  });
  return {m, v};
}

Eigen::MatrixXd random_spd(Rng& rng, int d) {
  Eigen::MatrixXd a(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
  return a * a.transpose() + Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST(FullConditional, IndependentIsMarginal) {
  const auto t = standard_bivariate(0.0);
  const auto c = t.full_conditional(0, v1(1.7));
  EXPECT_NEAR(c.mean()[0], 0.0, 1e-15);
  EXPECT_NEAR(c.covariance()(0, 0), 1.0, 1e-15);
}

TEST(FullConditional, MatchesGridNormalizedJoint) {
  const auto t = standard_bivariate(0.5);
  const auto g = trapezoid_grid(-10, 10, 4097);
  std::vector<double> lv(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    Eigen::Vector2d th(g.nodes(0, (Eigen::Index)k), 1.0);
    lv[k] = t.log_posterior_density(th);
  }
  const auto [m, v] = grid_moments(g, lv);
  EXPECT_NEAR(m, 0.5, 1e-10);
  EXPECT_NEAR(v, 0.75, 1e-10);
  const auto c = gaussian_full_conditional(t, 0, v1(1.0));
  EXPECT_NEAR(c.mean()[0], m, 1e-10);
  EXPECT_NEAR(c.covariance()(0, 0), v, 1e-10);
}

TEST(FullConditional, ThreeDimVectorBlockAgainstQuadrature) {
  Rng rng(3);
  const Eigen::MatrixXd s = random_spd(rng, 3);
  const Eigen::Vector3d mu(0.3, -0.2, 0.5);
  const GaussianTarget t(mu, s, make_decomposition({1, 2}));
  const Eigen::Vector2d comp(0.4, -1.1);
  // block 0 given the 2-vector complement
  const auto c = t.full_conditional(0, comp);
  const double sd = std::sqrt(c.covariance()(0, 0));
  const auto g = trapezoid_grid(c.mean()[0] - 10 * sd, c.mean()[0] + 10 * sd, 4097);
  std::vector<double> lv(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    lv[k] = t.log_posterior_density(join(t.decomposition(), 0, g.node(k), comp));
  }
  const auto tab = TabulatedFactor::from_log_values(g, lv);
  for (std::size_t k = 0; k < g.size(); k += 64) {
    EXPECT_NEAR(tab.log_density[k], c.log_density(g.node(k)), 1e-8);
  }
  // block 1 (two coordinates) given the scalar complement, on a 2-D grid
  const auto c2 = t.full_conditional(1, v1(0.7));
  std::vector<SupportGrid> axes;
  for (int d = 0; d < 2; ++d) {
    const double sdd = std::sqrt(c2.covariance()(d, d));
    axes.push_back(trapezoid_grid(c2.mean()[d] - 9 * sdd, c2.mean()[d] + 9 * sdd, 257));
  }
  const auto g2 = tensor_product(axes);
  std::vector<double> lv2(g2.size());
  for (std::size_t k = 0; k < g2.size(); ++k) {
    lv2[k] = t.log_posterior_density(join(t.decomposition(), 1, g2.node(k), v1(0.7)));
  }
  const auto tab2 = TabulatedFactor::from_log_values(g2, lv2);
  for (std::size_t k = 0; k < g2.size(); k += 997) {
    EXPECT_NEAR(tab2.log_density[k], c2.log_density(g2.node(k)), 1e-8);
  }
}

TEST(Marginal, StandardBivariate) {
  for (double rho : {0.0, 0.9}) {
    const auto t = standard_bivariate(rho);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto m = gaussian_marginal(t, i);
      EXPECT_EQ(m.mean()[0], 0.0);
      EXPECT_EQ(m.covariance()(0, 0), 1.0);
    }
  }
}

TEST(Marginal, MonteCarloExactDraws) {
  Rng rng(11);
  const Eigen::MatrixXd s = random_spd(rng, 3);
  const Eigen::Vector3d mu(1.0, -2.0, 0.5);
  const GaussianTarget t(mu, s, make_decomposition({2, 1}));
  const int n = 100000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd x = t.exact_draw(rng);
    sum += x;
    sq += x.cwiseProduct(x);
  }
  for (int d = 0; d < 3; ++d) {
    const double m = sum[d] / n;
    const double var = sq[d] / n - m * m;
    EXPECT_NEAR(m, mu[d], 3 * std::sqrt(s(d, d) / n));
    EXPECT_NEAR(var, s(d, d), 3 * s(d, d) * std::sqrt(2.0 / n));
  }
}

TEST(Kl, ClosedFormAgainstQuadrature) {
  const auto g = trapezoid_grid(-12, 12, 4097);
  auto quad_kl = [&](const GaussianFactor& a, const GaussianFactor& b) {
    double acc = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double la = a.log_density(g.node(k)), lb = b.log_density(g.node(k));
      acc += g.weights[k] * std::exp(la) * (la - lb);
    }
    return acc;
  };
  const auto n01 = GaussianFactor::scalar(0, 1);
  const auto a = GaussianFactor::scalar(0, 0.75);
  EXPECT_NEAR(gaussian_kl(a, n01), 0.5 * (0.75 - 1 - std::log(0.75)), 1e-15);
  EXPECT_NEAR(gaussian_kl(a, n01), 0.018841, 5e-7);
  EXPECT_NEAR(gaussian_kl(a, n01), quad_kl(a, n01), 1e-8);
  const auto b = GaussianFactor::scalar(1, 1);
  EXPECT_NEAR(gaussian_kl(b, n01), 0.5, 1e-15);
  EXPECT_NEAR(quad_kl(b, n01), 0.5, 1e-8);
  EXPECT_EQ(gaussian_kl(n01, n01), 0.0);
  EXPECT_THROW(gaussian_kl(n01, GaussianFactor(Eigen::Vector2d::Zero(),
                                               Eigen::Matrix2d::Identity())),
               std::invalid_argument);
}

TEST(Entropy, StandardNormal) {
  const auto f = GaussianFactor::scalar(0, 1);
  EXPECT_NEAR(gaussian_entropy(f), 1.418939, 5e-7);
  const auto g = trapezoid_grid(-12, 12, 4097);
  double h = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double l = f.log_density(g.node(k));
    h -= g.weights[k] * std::exp(l) * l;
  }
  EXPECT_NEAR(gaussian_entropy(f), h, 1e-8);
}

TEST(MutualInformation, BivariateQuadrature) {
  EXPECT_EQ(gaussian_mutual_information(standard_bivariate(0.0), 0), 0.0);
  const auto t = standard_bivariate(0.5);
  const auto g1 = trapezoid_grid(-8, 8, 513);
  const auto g = tensor_product({g1, g1});
  const auto m = GaussianFactor::scalar(0, 1);
  double mi = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Eigen::VectorXd x = g.node(k);
    const double lj = t.log_posterior_density(x);
    mi += g.weights[k] * std::exp(lj) *
          (lj - m.log_density(x.head(1)) - m.log_density(x.tail(1)));
  }
  EXPECT_NEAR(gaussian_mutual_information(t, 0), -0.5 * std::log(0.75), 1e-15);
  EXPECT_NEAR(gaussian_mutual_information(t, 0), 0.143841, 5e-7);
  EXPECT_NEAR(gaussian_mutual_information(t, 0), mi, 1e-8);
}

TEST(MutualInformation, AffineRescalingInvariant) {
  Rng rng(8);
  const Eigen::MatrixXd s = random_spd(rng, 3);
  const Eigen::Vector3d scale(0.3, 2.0, 5.0);
  const Eigen::MatrixXd s2 = scale.asDiagonal() * s * scale.asDiagonal();
  const GaussianTarget a(Eigen::Vector3d::Zero(), s, make_decomposition({1, 2}));
  const GaussianTarget b(Eigen::Vector3d::Ones(), s2, make_decomposition({1, 2}));
  EXPECT_NEAR(gaussian_mutual_information(a, 0), gaussian_mutual_information(b, 0),
              1e-10);
}

TEST(Consistency, JointFactorsIntoConditionalAndComplement) {
  Rng rng(4);
  const Eigen::MatrixXd s = random_spd(rng, 4);
  const GaussianTarget t(Eigen::Vector4d(1, 2, 3, 4), s, make_decomposition({1, 2, 1}));
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd th(4);
    for (int d = 0; d < 4; ++d) th[d] = rng.normal();
    for (std::size_t i = 0; i < 3; ++i) {
      const auto v = split(t.decomposition(), th, i);
      EXPECT_NEAR(t.log_posterior_density(th),
                  t.full_conditional(i, v.complement_values).log_density(v.values) +
                      t.log_complement_marginal(i, v.complement_values),
                  1e-10);
    }
  }
}

TEST(FixedPoint, KnownValues) {
  EXPECT_NEAR(gaussian_cavi_fixed_point(standard_bivariate(0.0), 0).covariance()(0, 0),
              1.0, 1e-15);
  EXPECT_NEAR(gaussian_cavi_fixed_point(standard_bivariate(0.5), 0).covariance()(0, 0),
              0.75, 1e-15);
  EXPECT_NEAR(gaussian_cavi_fixed_point(standard_bivariate(0.9), 1).covariance()(0, 0),
              0.19, 1e-15);
}

TEST(FixedPoint, IsFixedUnderGenericQuadratureUpdate) {
  for (double rho : {0.5, 0.9}) {
    const auto t = standard_bivariate(rho);
    MeanFieldState<TabulatedFactor> s;
    for (std::size_t i = 0; i < 2; ++i) {
      s.factors.push_back(
          tabulate(gaussian_cavi_fixed_point(t, i), t.block_support(i, 4097)));
    }
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_LE(sup_distance(cavi_update(t, s, i), s.factors[i]), 1e-10);
    }
  }
}

TEST(FixedPoint, NeverWiderThanMarginal) {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd s = random_spd(rng, 3);
    const GaussianTarget t(Eigen::Vector3d::Zero(), s, make_decomposition({1, 1, 1}));
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_LE(gaussian_cavi_fixed_point(t, i).covariance()(0, 0),
                t.marginal(i).covariance()(0, 0) + 1e-12);
    }
  }
}

TEST(Target, RejectsBadCovariance) {
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0.4, 1;
  EXPECT_THROW(GaussianTarget(Eigen::Vector2d::Zero(), asym, make_decomposition({1, 1})),
               std::invalid_argument);
  Eigen::Matrix2d indef;
  indef << 1, 2, 2, 1;
  EXPECT_THROW(GaussianTarget(Eigen::Vector2d::Zero(), indef, make_decomposition({1, 1})),
               std::invalid_argument);
  Eigen::Matrix2d illcond;
  illcond << 1, 0, 0, 1e-9;
  EXPECT_THROW(GaussianTarget(Eigen::Vector2d::Zero(), illcond, make_decomposition({1, 1})),
               std::invalid_argument);
}

TEST(Target, ConditionalNormalizesOnReferenceGrid) {
  const auto t = standard_bivariate(0.5);
  const auto c = t.full_conditional(0, v1(2.0));
  const double sd = std::sqrt(0.75);
  EXPECT_NEAR(grid_mass(c, trapezoid_grid(1.0 - 8 * sd, 1.0 + 8 * sd, 4097)), 1.0, 1e-8);
}
