#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "expfun/steps.hpp"
#include "test_util.hpp"

using namespace expfun;

namespace {

const StepModel kSym = StepModel::lattice(1.0, {-1, 1}, {0.5, 0.5});

std::vector<StepModel> all_variants() {
  return {
      kSym,
      StepModel::lattice(0.5, {-2, 0, 3}, {0.3, 0.5, 0.2}),
      StepModel::gaussian(-0.5, 1.3),
      StepModel::two_point(2.0, -1.0, 0.3),
      StepModel::shifted_pareto(3.0, 1.0, -2.0),
  };
}

// E[exp(lambda X)] for ShiftedPareto through u = (1 + t)^(-beta) on (0, 1):
// an independent route to the exp-sinh value used by laplace().
double pareto_laplace_oracle(const ShiftedPareto& m, double lambda) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double u) { return std::exp(lambda * m.scale * (std::pow(u, -1.0 / m.beta) - 1.0)); };
  return std::exp(lambda * m.shift) * ts.integrate(f, 0.0, 1.0);
}

}  // namespace

TEST(Steps, ValidatesConstruction) {
  EXPECT_THROW(StepModel::lattice(1.0, {-1, 1}, {0.5, 0.6}), Error);
  EXPECT_THROW(StepModel::lattice(0.0, {-1, 1}, {0.5, 0.5}), Error);
  EXPECT_THROW(StepModel::lattice(1.0, {1, 1}, {0.5, 0.5}), Error);
  EXPECT_THROW(StepModel::gaussian(0.0, -1.0), Error);
  EXPECT_THROW(StepModel::two_point(-1.0, -1.0, 0.5), Error);
  EXPECT_THROW(StepModel::shifted_pareto(1.0, 1.0, 0.0), Error);
  EXPECT_NO_THROW(StepModel::lattice(1.0, {-1, 1}, {0.5, 0.5 + 1e-13}));
}

TEST(Steps, SampleDegenerate) {
  const auto m = StepModel::two_point(1.0, -1.0, 1.0);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(sample_step(m, rng), 1.0);
}

TEST(Steps, SampleSymmetricMean) {
  Rng rng(2);
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += sample_step(kSym, rng);
  EXPECT_LT(std::abs(sum / n), 4e-3);
}

TEST(Steps, SampleParetoTail) {
  const auto m = StepModel::shifted_pareto(3.0, 1.0, -2.0);
  Rng rng(3);
  const int n = 1000000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += sample_step(m, rng) > 0.0;
  const double p = 1.0 / 27.0;
  const double se = std::sqrt(p * (1 - p) / n);
  EXPECT_LT(std::abs(hits / double(n) - p), 3 * se);
}

TEST(Steps, LaplaceExamples) {
  for (const auto& m : all_variants()) EXPECT_EQ(laplace(m, 0.0), 1.0);
  EXPECT_NEAR(laplace(StepModel::gaussian(-1, 1), 1.0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(laplace(StepModel::two_point(1, -1, 0.5), std::log(2.0)), 1.25, 1e-15);
  const auto p = StepModel::shifted_pareto(3.0, 1.0, -2.0);
  EXPECT_EQ(laplace(p, 0.1), kInf);
  for (double lambda : {-0.01, -0.3, -1.0, -4.0}) {
    EXPECT_NEAR(laplace(p, lambda), pareto_laplace_oracle(*p.get_if<ShiftedPareto>(), lambda), 1e-10) << lambda;
  }
}

TEST(Steps, TailProbExamples) {
  EXPECT_DOUBLE_EQ(tail_prob(kSym, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(tail_prob(StepModel::shifted_pareto(3.0, 1.0, 0.0), 1.0), 0.125);
  EXPECT_DOUBLE_EQ(tail_prob(StepModel::gaussian(0, 1), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(tail_prob(kSym, -1.0), 1.0);
  EXPECT_DOUBLE_EQ(tail_prob(kSym, 1.5), 0.0);
}

TEST(Steps, MeanExamples) {
  EXPECT_NEAR(step_mean(StepModel::two_point(2, -1, 1.0 / 3.0)), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(step_mean(StepModel::gaussian(-2, 1)), -2.0);
  for (double s : {-2.0, 0.0, 1.5}) {
    const auto m = StepModel::shifted_pareto(3.0, 1.0, s);
    EXPECT_DOUBLE_EQ(step_mean(m), s + 0.5);
    // quadrature oracle: E[X] = shift + int_0^inf P(X - shift > t) dt
    boost::math::quadrature::tanh_sinh<double> ts;
    const double body = ts.integrate([](double u) { return std::pow(u, -1.0 / 3.0) - 1.0; }, 0.0, 1.0);
    EXPECT_NEAR(step_mean(m), s + body, 1e-10);
  }
}

TEST(Steps, ConditionalTailPareto) {
  const auto m = StepModel::shifted_pareto(3.0, 1.0, 0.0);
  Rng rng(4);
  const int n = 200000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_step_conditional_tail(m, 1.0, rng);
    ASSERT_GE(x, 1.0);
    hits += x > 3.0;
  }
  const double p = 1.0 / 8.0;
  EXPECT_LT(std::abs(hits / double(n) - p), 3 * std::sqrt(p * (1 - p) / n));
}

TEST(Steps, ConditionalTailLatticeSingleAtom) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(sample_step_conditional_tail(kSym, 1.0, rng), 1.0);
  EXPECT_THROW(sample_step_conditional_tail(kSym, 1.5, rng), Error);
}

TEST(Steps, ConditionalTailGaussianFarTail) {
  const auto m = StepModel::gaussian(0.0, 1.0);
  Rng rng(6);
  std::vector<double> xs;
  for (int i = 0; i < 100000; ++i) xs.push_back(sample_step_conditional_tail(m, 3.0, rng));
  const double t = tail_prob(m, 3.0);
  auto cdf = [&](double x) { return x < 3.0 ? 0.0 : (t - tail_prob(m, x)) / t; };
  EXPECT_LT(testutil::ks_statistic(xs, cdf), testutil::ks_critical_1pct(xs.size()));
}

TEST(Steps, ConditionalTailUnconditionedMatchesSampler) {
  for (const auto& m : all_variants()) {
    Rng a(7), b(8);
    std::vector<double> xs, ys;
    for (int i = 0; i < 100000; ++i) {
      xs.push_back(sample_step_conditional_tail(m, -kInf, a));
      ys.push_back(sample_step(m, b));
    }
    EXPECT_LT(testutil::ks_two_sample(xs, ys), testutil::ks_two_sample_critical_1pct(xs.size(), ys.size()))
        << m.describe();
  }
}

TEST(Steps, LaplaceLogConvex) {
  for (const auto& m : all_variants()) {
    for (double l1 = -2.0; l1 <= 2.0; l1 += 0.25) {
      for (double l2 = l1; l2 <= 2.0; l2 += 0.25) {
        const double a = laplace(m, l1), b = laplace(m, l2);
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        EXPECT_LE(laplace(m, 0.5 * (l1 + l2)), std::sqrt(a * b) + 1e-12) << m.describe();
      }
    }
  }
}

TEST(Steps, LogLaplaceSlopeAtZeroIsMean) {
  for (const auto& m : all_variants()) {
    if (m.heavy_tailed()) {
      // only the left derivative exists
      const double h = 1e-5;
      const double d = -std::log(laplace(m, -h)) / h;
      EXPECT_NEAR(d, step_mean(m), 5e-5);
      continue;
    }
    const double h = 1e-5;
    const double d = (std::log(laplace(m, h)) - std::log(laplace(m, -h))) / (2 * h);
    EXPECT_NEAR(d, step_mean(m), 1e-6) << m.describe();
  }
}

TEST(Steps, EmpiricalCdfMatches) {
  for (const auto& m : all_variants()) {
    Rng rng(9);
    std::vector<double> xs;
    for (int i = 0; i < 100000; ++i) xs.push_back(sample_step(m, rng));
    EXPECT_LT(testutil::ks_statistic(xs, [&](double x) { return step_cdf(m, x); }),
              testutil::ks_critical_1pct(xs.size()))
        << m.describe();
  }
}

TEST(Steps, NegationAndSymmetry) {
  EXPECT_TRUE(is_symmetric(kSym));
  EXPECT_TRUE(is_symmetric(StepModel::gaussian(0, 2)));
  EXPECT_FALSE(is_symmetric(StepModel::two_point(2, -1, 0.5)));
  const auto n = negated(StepModel::two_point(2, -1, 0.3));
  EXPECT_NEAR(step_mean(n), -step_mean(StepModel::two_point(2, -1, 0.3)), 1e-15);
  EXPECT_THROW(negated(StepModel::shifted_pareto(3, 1, 0)), Error);
}

TEST(Steps, SkipFreeDetection) {
  EXPECT_EQ(skip_free_down_spacing(kSym).value(), 1.0);
  EXPECT_EQ(skip_free_down_spacing(StepModel::lattice(0.5, {-1, 0, 3}, {0.5, 0.2, 0.3})).value(), 0.5);
  EXPECT_FALSE(skip_free_down_spacing(StepModel::lattice(1.0, {-2, 1}, {0.5, 0.5})).has_value());
  EXPECT_EQ(skip_free_up_spacing(StepModel::lattice(1.0, {-2, 1}, {0.5, 0.5})).value(), 1.0);
  EXPECT_EQ(skip_free_down_spacing(StepModel::two_point(2.0, -1.0, 0.5)).value(), 1.0);
  EXPECT_FALSE(skip_free_down_spacing(StepModel::gaussian(0, 1)).has_value());
}
