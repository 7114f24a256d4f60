#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tlab/errors.hpp"
#include "tlab/linalg.hpp"
#include "tlab/rng.hpp"
#include "tlab/softmax.hpp"

namespace tlab {
namespace {

// Class probabilities computed the plain way, as an oracle for moderate eta.
Vector naive_probs(std::span<const double> eta) {
  double z = 1.0;
  for (double e : eta) z += std::exp(e);
  Vector p;
  for (double e : eta) p.push_back(std::exp(e) / z);
  p.push_back(1.0 / z);
  return p;
}

double g(std::span<const double> eta, std::span<const double> v, double t) {
  Vector x(eta.begin(), eta.end());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += t * v[i];
  return log_partition(x);
}

TEST(LogPartition, KnownValuesAndStability) {
  EXPECT_NEAR(log_partition(Vector(4, 0.0)), std::log(5.0), 1e-15);
  EXPECT_NEAR(log_partition(Vector{1000.0}), 1000.0, 1e-12);
  EXPECT_NEAR(log_partition(Vector{-1000.0, -800.0}), 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(log_partition(Vector{800.0, 800.0})));
  EXPECT_NEAR(log_partition(Vector{800.0, 800.0}), 800.0 + std::log(2.0), 1e-12);
}

TEST(SoftmaxProb, MatchesNaiveAndSumsToOne) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vector eta = rng.normal_vector(6);
    const Vector p = softmax_prob(eta);
    const Vector q = naive_probs(eta);
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      EXPECT_NEAR(p[j], q[j], 1e-15);
      s += p[j];
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(LogPartition, GradientAndHessianMatchFiniteDifferences) {
  Rng rng(2);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector eta = rng.normal_vector(5);
    const Vector grad = grad_log_partition(eta);
    const Matrix hess = hessian_log_partition(eta);
    for (std::size_t j = 0; j < eta.size(); ++j) {
      Vector up = eta, down = eta;
      up[j] += h;
      down[j] -= h;
      EXPECT_NEAR(grad[j], (log_partition(up) - log_partition(down)) / (2 * h), 1e-9);
      const Vector gu = grad_log_partition(up), gd = grad_log_partition(down);
      for (std::size_t i = 0; i < eta.size(); ++i) EXPECT_NEAR(hess(i, j), (gu[i] - gd[i]) / (2 * h), 1e-9);
    }
  }
}

TEST(LogPartition, HessianIsDiagMinusOuter) {
  const Vector eta{0.3, -1.2, 2.0};
  const Vector p = naive_probs(eta);
  const Matrix hess = hessian_log_partition(eta);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_NEAR(hess(i, j), (i == j ? p[i] : 0.0) - p[i] * p[j], 1e-15);
}

TEST(CrossEntropy, OneHotAndImplicitClass) {
  const Vector eta{0.5, -0.25};
  const Vector p = naive_probs(eta);
  EXPECT_NEAR(cross_entropy(eta, OneHotLabel::from_class(1, 3)), -std::log(p[0]), 1e-14);
  EXPECT_NEAR(cross_entropy(eta, OneHotLabel::from_class(3, 3)), -std::log(p[2]), 1e-14);
  EXPECT_NEAR(cross_entropy(eta, Vector{0.0, 0.0}), log_partition(eta), 1e-15);
}

TEST(OneHotLabel, ValidatesInput) {
  EXPECT_THROW(OneHotLabel::from_vector(Vector{1.0, 1.0}), ContractViolation);
  EXPECT_THROW(OneHotLabel::from_vector(Vector{0.5, 0.0}), ContractViolation);
  EXPECT_THROW(OneHotLabel::from_class(0, 3), ContractViolation);
  EXPECT_THROW(OneHotLabel::from_class(4, 3), ContractViolation);
  EXPECT_EQ(OneHotLabel::from_vector(Vector{0.0, 1.0}).class_index(), 2u);
  EXPECT_EQ(OneHotLabel::from_vector(Vector{0.0, 0.0}).class_index(), 3u);
}

TEST(KlDivergence, MatchesDirectSum) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector a = rng.normal_vector(4);
    const Vector b = rng.normal_vector(4);
    const Vector p = naive_probs(a), q = naive_probs(b);
    double direct = 0.0;
    for (std::size_t s = 0; s < p.size(); ++s) direct += p[s] * std::log(p[s] / q[s]);
    EXPECT_NEAR(kl_divergence(a, b), direct, 1e-12);
  }
  const Vector t{0.1, 0.2};
  EXPECT_EQ(kl_divergence(t, t), 0.0);
}

TEST(DirectionalDerivatives, MatchFiniteDifferences) {
  Rng rng(4);
  const double h = 1e-3;
  for (int trial = 0; trial < 30; ++trial) {
    const Vector eta = rng.normal_vector(4);
    const Vector v = rng.normal_vector(4);
    const DirectionalDerivatives dd = directional_derivatives(eta, v);
    const double gm2 = g(eta, v, -2 * h), gm1 = g(eta, v, -h), g0 = g(eta, v, 0.0);
    const double gp1 = g(eta, v, h), gp2 = g(eta, v, 2 * h);
    EXPECT_NEAR(dd.first, (gp1 - gm1) / (2 * h), 1e-6);
    EXPECT_NEAR(dd.second, (gp1 - 2 * g0 + gm1) / (h * h), 1e-5);
    EXPECT_NEAR(dd.third, (gp2 - 2 * gp1 + 2 * gm1 - gm2) / (2 * h * h * h), 2e-3);
  }
}

TEST(SelfConcordance, BinaryCaseClosedForm) {
  // K = 2: g'' = s(1-s) v^2, g''' = s(1-s)(1-2s) v^3, so the ratio is |1-2s| <= 1.
  for (double e : {-4.0, -0.5, 0.0, 1.5, 6.0}) {
    const Vector eta{e}, v{2.0};
    const DirectionalDerivatives dd = directional_derivatives(eta, v);
    const double s = 1.0 / (1.0 + std::exp(-e));
    EXPECT_NEAR(dd.second, s * (1 - s) * 4.0, 1e-14);
    EXPECT_NEAR(dd.third, s * (1 - s) * (1 - 2 * s) * 8.0, 1e-14);
  }
}

TEST(SelfConcordance, HoldsOnRandomLinesAndRejectsZeroDirection) {
  Rng rng(5);
  const Vector grid{-1.0, -0.3, 0.0, 0.4, 1.0};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t km1 = 1 + rng.uniform_index(20);
    Vector eta = rng.normal_vector(km1), v = rng.normal_vector(km1);
    for (double& x : eta) x *= 2.0;
    const SelfConcordanceReport rep = check_self_concordance(eta, v, grid);
    EXPECT_TRUE(rep.pass);
    EXPECT_LE(rep.max_ratio, kSelfConcordanceConstant);
  }
  const Vector eta{0.0, 0.0};
  const Vector zero{0.0, 0.0};
  EXPECT_THROW(check_self_concordance(eta, zero, grid), ContractViolation);
}

TEST(SelfConcordance, RatioInvariantUnderDirectionScaling) {
  const Vector eta{0.4, -0.7, 1.1};
  const Vector v{0.3, 0.2, -0.5};
  Vector v10 = v;
  for (double& x : v10) x *= 10;
  const Vector t0{0.0};
  const double r1 = check_self_concordance(eta, v, t0).max_ratio;
  const double r10 = check_self_concordance(eta, v10, t0).max_ratio;
  EXPECT_NEAR(r1, r10, 1e-12);
}

TEST(KlQuadraticBounds, SandwichHolds) {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t km1 = 1 + rng.uniform_index(10);
    const Vector a = rng.normal_vector(km1), b = rng.normal_vector(km1);
    const KlBounds kb = kl_quadratic_bounds(a, b);
    EXPECT_TRUE(kb.holds()) << kb.lower << " " << kb.kl << " " << kb.upper;
    EXPECT_GE(kb.lower, 0.0);
  }
  const Vector same{0.5};
  const KlBounds zero = kl_quadratic_bounds(same, same);
  EXPECT_EQ(zero.kl, 0.0);
  EXPECT_EQ(zero.upper, 0.0);
}

TEST(TaylorSandwich, HoldsAndIsTightForSmallSteps) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const Vector w = rng.normal_vector(5);
    Vector v = rng.normal_vector(5);
    const double scale = std::exp(rng.uniform() * 6 - 4);
    for (double& x : v) x *= scale;
    const TaylorSandwich ts = taylor_sandwich(w, v);
    EXPECT_TRUE(ts.holds(1e-12)) << ts.lower << " " << ts.value << " " << ts.upper;
  }
  const Vector w{0.2, 0.1}, v{1e-4, -2e-4};
  const TaylorSandwich ts = taylor_sandwich(w, v);
  EXPECT_NEAR(ts.upper - ts.lower, 0.0, 1e-11);
}

}  // namespace
}  // namespace tlab
