#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "expfun/oracles.hpp"
#include "expfun/tilt.hpp"

using namespace expfun;

TEST(Tilt, FSpecProperties) {
  const auto f = FSpec::make(2.0, 1.5, 0.5);
  EXPECT_DOUBLE_EQ(f(0.0), f.bound());
  EXPECT_NEAR(f.from_log(std::log(3.0)), f(3.0), 1e-14);
  EXPECT_NEAR(f.from_log(800.0), 2.0 * std::exp(-1.5 * 800.0), 1e-300);
  EXPECT_NEAR(std::pow(1e8, 1.5) * f(1e8), 2.0, 1e-6);
  EXPECT_THROW(FSpec::make(1, 0, 1), Error);
  // Lipschitz constant is |F'(0)|, the steepest point.
  EXPECT_NEAR((f(0.0) - f(1e-7)) / 1e-7, f.lipschitz(), 1e-5);
}

TEST(Tilt, FindLambdaInterior) {
  const auto r = find_lambda(StepModel::gaussian(-1, 1), 2.0);
  EXPECT_NEAR(r.lambda_star, 1.0, 1e-10);
  EXPECT_NEAR(r.rho_factor, std::exp(-0.5), 1e-12);
  EXPECT_EQ(r.boundary, Boundary::Interior);
  EXPECT_NEAR(r.tilted_mean, 0.0, 1e-9);
  EXPECT_NEAR(r.phi_at_lambda, -0.5, 1e-12);
}

TEST(Tilt, FindLambdaAtTheta) {
  const auto r = find_lambda(StepModel::gaussian(-2, 1), 1.0);
  EXPECT_DOUBLE_EQ(r.lambda_star, 1.0);
  EXPECT_NEAR(r.rho_factor, std::exp(-1.5), 1e-14);
  EXPECT_EQ(r.boundary, Boundary::AtThetaF);
  EXPECT_NEAR(r.tilted_mean, -1.0, 1e-14);
}

TEST(Tilt, FindLambdaHeavyTailAtZero) {
  const auto m = StepModel::shifted_pareto(3.0, 1.0, -2.0);
  const auto r = find_lambda(m, 2.0);
  EXPECT_EQ(r.lambda_star, 0.0);
  EXPECT_EQ(r.rho_factor, 1.0);
  EXPECT_EQ(r.boundary, Boundary::AtZero);
  for (double l : {1e-8, 0.1, 1.0}) EXPECT_EQ(laplace(m, l), kInf);
}

TEST(Tilt, FindLambdaLatticeInterior) {
  // p_up = 1/4: L(l) = (e^l + 3 e^-l) / 4 is minimized at l = ln(3)/2, value sqrt(3)/2.
  const auto m = StepModel::lattice(1.0, {-1, 1}, {0.75, 0.25});
  const auto r = find_lambda(m, 2.0);
  EXPECT_NEAR(r.lambda_star, 0.5 * std::log(3.0), 1e-10);
  EXPECT_NEAR(r.rho_factor, std::sqrt(3.0) / 2.0, 1e-14);
  EXPECT_EQ(r.boundary, Boundary::Interior);
}

TEST(Tilt, EsscherExamples) {
  const auto g = esscher(StepModel::gaussian(-1, 1), 1.0);
  EXPECT_DOUBLE_EQ(g.get_if<Gaussian>()->mu, 0.0);
  EXPECT_DOUBLE_EQ(g.get_if<Gaussian>()->sigma, 1.0);

  const auto sym = StepModel::lattice(1.0, {-1, 1}, {0.75, 0.25});
  EXPECT_EQ(esscher(sym, 0.0).describe(), sym.describe());
  // Reweighting [.75, .25] by 3^x gives [.25, .75] at ln 3; the balanced
  // law [.5, .5] is reached at ln sqrt(3).
  const auto t = esscher(sym, std::log(3.0));
  EXPECT_NEAR(t.get_if<Lattice>()->probs[0], 0.25, 1e-15);
  EXPECT_NEAR(t.get_if<Lattice>()->probs[1], 0.75, 1e-15);
  const auto h = esscher(sym, 0.5 * std::log(3.0));
  EXPECT_NEAR(h.get_if<Lattice>()->probs[0], 0.5, 1e-15);
  EXPECT_NEAR(h.get_if<Lattice>()->probs[1], 0.5, 1e-15);

  EXPECT_THROW(esscher(StepModel::shifted_pareto(3, 1, -2), 0.5), Error);
  EXPECT_NO_THROW(esscher(StepModel::shifted_pareto(3, 1, -2), 0.0));
}

TEST(Tilt, EsscherLaplaceIdentity) {
  const std::vector<StepModel> models = {
      StepModel::lattice(0.5, {-3, -1, 2}, {0.2, 0.5, 0.3}),
      StepModel::gaussian(-0.7, 1.4),
      StepModel::two_point(2.5, -1.0, 0.35),
  };
  Rng rng(11);
  for (const auto& m : models) {
    for (int i = 0; i < 20; ++i) {
      const double l0 = -1.5 + 3.0 * rng.uniform();
      const auto t = esscher(m, l0);
      for (int j = 0; j < 20; ++j) {
        const double l = -1.5 + 3.0 * rng.uniform();
        const double lhs = laplace(t, l) * laplace(m, l0);
        const double rhs = laplace(m, l0 + l);
        EXPECT_NEAR(lhs / rhs, 1.0, 1e-8) << m.describe();
      }
    }
  }
}

TEST(Tilt, RhoMatchesLaplaceAndInteriorMeanZero) {
  const std::vector<StepModel> models = {
      StepModel::gaussian(-1, 1), StepModel::gaussian(-0.3, 2.0), StepModel::gaussian(-2, 1),
      StepModel::lattice(1.0, {-1, 1}, {0.6, 0.4}), StepModel::two_point(3.0, -1.0, 0.2),
      StepModel::lattice(0.25, {-4, -1, 6}, {0.3, 0.5, 0.2}),
  };
  for (const auto& m : models) {
    for (double theta : {0.1, 0.5, 1.0, 3.0}) {
      const auto r = find_lambda(m, theta);
      EXPECT_NEAR(r.rho_factor, laplace(m, r.lambda_star), 1e-10);
      EXPECT_LE(r.rho_factor, 1.0 + 1e-15);
      if (r.boundary == Boundary::Interior) {
        EXPECT_NEAR(r.tilted_mean, 0.0, 1e-6) << m.describe() << " theta " << theta;
      }
    }
  }
}

TEST(Tilt, MonotoneInTheta) {
  const std::vector<StepModel> models = {StepModel::gaussian(-1, 1), StepModel::lattice(1.0, {-1, 1}, {0.7, 0.3}),
                                         StepModel::two_point(3.0, -1.0, 0.2)};
  for (const auto& m : models) {
    double prev = 1.0;
    for (double theta = 0.05; theta < 4.0; theta += 0.05) {
      const double rho = find_lambda(m, theta).rho_factor;
      EXPECT_LE(rho, prev + 1e-14);
      prev = rho;
    }
  }
}

TEST(Tilt, RegimeExamples) {
  EXPECT_EQ(regime_classify(StepModel::gaussian(-1, 1), FSpec::make(1, 2, 1)).tag, RegimeTag::OscInterior);
  EXPECT_EQ(regime_classify(StepModel::lattice(1.0, {-1, 1}, {0.5, 0.5}), FSpec::make(1, 1, 1)).tag,
            RegimeTag::OscLambdaZero);
  EXPECT_EQ(regime_classify(StepModel::shifted_pareto(3, 1, -2), FSpec::make(1, 1, 1)).tag,
            RegimeTag::DriftLambdaZeroHeavyTail);
  EXPECT_EQ(regime_classify(StepModel::gaussian(-2, 1), FSpec::make(1, 1, 1)).tag, RegimeTag::DriftLambdaEqTheta);
  EXPECT_EQ(regime_classify(StepModel::gaussian(1, 1), FSpec::make(1, 1, 1)).tag, RegimeTag::DriftsToInfinity);
  // Gaussian mu = -1: the tilt reaches mean zero exactly at theta = 1.
  EXPECT_EQ(regime_classify(StepModel::gaussian(-1, 1), FSpec::make(1, 1, 1)).tag, RegimeTag::OscLambdaEqTheta);
  const auto u = regime_classify(StepModel::gaussian(-1, 1), FSpec::make(1, 0.5, 1));
  EXPECT_EQ(u.tag, RegimeTag::DriftLambdaEqTheta);
  EXPECT_STREQ(to_string(RegimeTag::OscLambdaZero), "osc_lambda_zero");
}

// E[h(S_n)] = rho~^n E^(l0)[exp(-l0 S_n) h(S_n)] over every path, n <= 12.
TEST(Tilt, ExactChangeOfMeasure) {
  const std::vector<StepModel> models = {StepModel::lattice(1.0, {-1, 1}, {0.5, 0.5}),
                                         StepModel::lattice(0.5, {-2, 1, 3}, {0.5, 0.3, 0.2})};
  const std::vector<std::function<long double(long double)>> hs = {
      [](long double) { return 1.0L; }, [](long double s) { return s; }, [](long double s) { return std::exp(-s); }};
  for (const auto& m : models) {
    for (double l0 : {0.3, std::log(2.0), 1.0}) {
      const auto t = esscher(m, l0);
      const long double rt = laplace(m, l0);
      for (std::size_t n : {1, 5, 10}) {
        for (const auto& h : hs) {
          const long double lhs = enumerate_paths(m, n, [&](std::span<const double> s) { return h(s.back()); });
          const long double rhs = std::pow(rt, static_cast<long double>(n)) *
                                  enumerate_paths(t, n, [&](std::span<const double> s) {
                                    return std::exp(-l0 * static_cast<long double>(s.back())) * h(s.back());
                                  });
          EXPECT_NEAR(static_cast<double>(lhs), static_cast<double>(rhs), 1e-10);
        }
      }
    }
  }
}
