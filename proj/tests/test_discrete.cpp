#include <gtest/gtest.h>

#include <cmath>

#include "duality_bench/cavi.hpp"
#include "duality_bench/discrete.hpp"

using namespace duality_bench;

namespace {

const DiscreteTarget& table() {
  static const DiscreteTarget t({2, 2}, {0.4, 0.1, 0.2, 0.3});
  return t;
}

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

DiscreteTarget random_table(Rng& rng, std::vector<std::size_t> sizes) {
  std::size_t n = 1;
  for (auto s : sizes) n *= s;
  std::vector<double> p(n);
  double z = 0;
  for (auto& v : p) z += (v = -std::log(1.0 - rng.uniform()));
  for (auto& v : p) v /= z;
  return DiscreteTarget(std::move(sizes), std::move(p));
}

}  // namespace

TEST(FullConditional, Uniform) {
  const DiscreteTarget u({2, 2}, {0.25, 0.25, 0.25, 0.25});
  EXPECT_EQ(enum_full_conditional(u, 0, v1(0)).pmf, (std::vector<double>{0.5, 0.5}));
}

TEST(FullConditional, HandRenormalization) {
  const auto c = enum_full_conditional(table(), 0, v1(0));
  EXPECT_NEAR(c.pmf[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(c.pmf[1], 1.0 / 3.0, 1e-15);
}

TEST(FullConditional, ZeroMassColumn) {
  const DiscreteTarget t({2, 2}, {0.5, 0.0, 0.5, 0.0});
  try {
    enum_full_conditional(t, 0, v1(1));
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("zero mass"), std::string::npos);
  }
}

TEST(Target, Validation) {
  EXPECT_THROW(DiscreteTarget({2, 2}, {0.5, 0.5, 0.1, -0.1}), std::invalid_argument);
  EXPECT_THROW(DiscreteTarget({2, 2}, {0.5, 0.5, 0.1, 0.1}), std::invalid_argument);
  EXPECT_THROW(DiscreteTarget({2}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(DiscreteTarget({2, 2, 2, 2, 2}, std::vector<double>(32, 1.0 / 32)),
               std::invalid_argument);
  EXPECT_THROW(DiscreteTarget({17, 1}, std::vector<double>(17, 1.0 / 17)),
               std::invalid_argument);
}

TEST(Target, RowMajorLayout) {
  const auto& t = table();
  EXPECT_EQ(t.prob({0, 1}), 0.1);
  EXPECT_EQ(t.prob({1, 0}), 0.2);
  EXPECT_EQ(t.encode({1, 1}), 3u);
  EXPECT_THROW(t.state_of(Eigen::Vector2d(0.5, 0)), std::out_of_range);
}

TEST(Information, HandValues) {
  const auto& t = table();
  const double mi = 0.4 * std::log(0.4 / 0.3) + 0.1 * std::log(0.1 / 0.2) +
                    0.2 * std::log(0.2 / 0.3) + 0.3 * std::log(0.3 / 0.2);
  EXPECT_NEAR(enum_mi(t, 0), mi, 1e-15);
  EXPECT_NEAR(enum_mi(t, 1), mi, 1e-15);
  EXPECT_NEAR(enum_block_entropy(t, 0), std::log(2.0), 1e-15);
  const double h2 = -(0.6 * std::log(0.6) + 0.4 * std::log(0.4));
  EXPECT_NEAR(enum_block_entropy(t, 1), h2, 1e-15);
}

TEST(Information, EqualityBothForms) {
  const auto& t = table();
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(enum_mi(t, i),
                enum_complement_entropy(t, i) - enum_complement_conditional_entropy(t, i),
                1e-14);
    EXPECT_NEAR(enum_mi(t, i),
                enum_block_entropy(t, i) - enum_block_conditional_entropy(t, i), 1e-14);
  }
}

TEST(Information, ProductAndUniform) {
  const DiscreteTarget p({2, 3}, {0.3 * 0.2, 0.3 * 0.5, 0.3 * 0.3,
                                  0.7 * 0.2, 0.7 * 0.5, 0.7 * 0.3});
  EXPECT_NEAR(enum_mi(p, 0), 0.0, 1e-15);
  const DiscreteTarget u({3, 4}, std::vector<double>(12, 1.0 / 12));
  EXPECT_NEAR(enum_block_entropy(u, 0), std::log(3.0), 1e-15);
  EXPECT_NEAR(enum_block_entropy(u, 1), std::log(4.0), 1e-15);
}

TEST(Information, RandomTablesEquality) {
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const auto t = random_table(rng, {2 + rng.below(3), 2 + rng.below(3), 2});
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(enum_mi(t, i), enum_complement_entropy(t, i) -
                                     enum_complement_conditional_entropy(t, i),
                  1e-12);
    }
  }
}

TEST(CaviUpdate, HandOracleUniformComplement) {
  const std::vector<DiscreteFactor> f{DiscreteFactor::uniform(2),
                                      DiscreteFactor::uniform(2)};
  const auto q = enum_cavi_update(table(), f, 0);
  const double a = std::sqrt(2.0 / 3.0 * 0.25), b = std::sqrt(1.0 / 3.0 * 0.75);
  EXPECT_NEAR(q.pmf[0], a / (a + b), 1e-15);
  EXPECT_NEAR(q.pmf[1], b / (a + b), 1e-15);
}

TEST(CaviUpdate, GenericPathMatchesEnumeration) {
  Rng rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const auto t = random_table(rng, {3, 2, 4});
    MeanFieldState<DiscreteFactor> s;
    for (auto n : t.support_sizes()) {
      std::vector<double> lw(n);
      for (auto& v : lw) v = rng.normal();
      s.factors.push_back(DiscreteFactor::from_log_weights(lw));
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const auto a = cavi_update(t, s, i);
      const auto b = enum_cavi_update(t, s.factors, i);
      EXPECT_LE(total_variation(a, b), 1e-14);
    }
  }
}

TEST(CaviUpdate, FactorizedGivesMarginal) {
  const DiscreteTarget p({2, 3}, {0.3 * 0.2, 0.3 * 0.5, 0.3 * 0.3,
                                  0.7 * 0.2, 0.7 * 0.5, 0.7 * 0.3});
  const std::vector<DiscreteFactor> f{DiscreteFactor{{0.9, 0.1}},
                                      DiscreteFactor{{0.1, 0.1, 0.8}}};
  const auto q = enum_cavi_update(p, f, 1);
  EXPECT_NEAR(q.pmf[0], 0.2, 1e-15);
  EXPECT_NEAR(q.pmf[1], 0.5, 1e-15);
  EXPECT_NEAR(q.pmf[2], 0.3, 1e-15);
}

TEST(CaviUpdate, MatchesCoarseSimplexGrid) {
  // q(θ₁) = (x, 1 − x) minimizing KL(q ⊗ q₂ ‖ π) over x on a 1e-3 grid
  const auto& t = table();
  const DiscreteFactor q2{{0.35, 0.65}};
  double best = 1e300, best_x = 0;
  for (int k = 1; k < 1000; ++k) {
    const double x = k * 1e-3;
    const double q1[2] = {x, 1 - x};
    double kl = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const double q = q1[a] * q2.pmf[b];
        kl += q * std::log(q / t.prob({(std::size_t)a, (std::size_t)b}));
      }
    if (kl < best) best = kl, best_x = x;
  }
  const auto q = enum_cavi_update(t, {DiscreteFactor::uniform(2), q2}, 0);
  EXPECT_NEAR(q.pmf[0], best_x, 1e-3);
}

TEST(CaviUpdate, Idempotent) {
  const auto& t = table();
  auto s = cavi_run(t, CaviConfig{200, 1e-14}, uniform_init(t));
  ASSERT_TRUE(s.converged);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(total_variation(enum_cavi_update(t, s.factors, i), s.factors[i]), 1e-12);
  }
}

TEST(CaviUpdate, RejectsLogZeroUnderMass) {
  const DiscreteTarget t({2, 2}, {0.5, 0.0, 0.25, 0.25});
  const std::vector<DiscreteFactor> f{DiscreteFactor::uniform(2),
                                      DiscreteFactor::uniform(2)};
  try {
    enum_cavi_update(t, f, 0);
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("block 1"), std::string::npos);
  }
  MeanFieldState<DiscreteFactor> s{f};
  EXPECT_THROW(cavi_update(t, s, 0), std::domain_error);
}
