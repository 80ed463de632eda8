#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "expfun/asymptote.hpp"

using namespace expfun;

namespace {

const StepModel kSym = StepModel::lattice(1.0, {-1, 1}, {0.5, 0.5});
const StepModel kPareto = StepModel::shifted_pareto(3.0, 1.0, -2.0);

double stable_oracle(double alpha, double rho) {
  return std::tgamma(1.0 + 1.0 / alpha) * std::sin(std::numbers::pi * rho) / std::numbers::pi;
}

}  // namespace

TEST(Asymptote, SpitzerSymmetric) {
  EXPECT_EQ(spitzer_rho(kSym, 64, SignOracle::DP).value, 0.5);
  EXPECT_EQ(spitzer_rho(StepModel::gaussian(0, 1), 64, SignOracle::MC, 100).value, 0.5);
  // Gaussian(-1, 1) tilted at its interior minimizer lambda = 1 has mean ~0
  const auto rep = find_lambda(StepModel::gaussian(-1.0, 1.0), 2.0);
  EXPECT_EQ(rep.boundary, Boundary::Interior);
  const auto e = spitzer_rho(rep.tilted_model, 256, SignOracle::MC, 20000, McOptions{1, 1, 1024});
  EXPECT_LE(std::abs(e.value - 0.5), 3 * e.std_error + 1e-12);
  EXPECT_THROW(spitzer_rho(kSym, 8, SignOracle::DP), Error);
}

TEST(Asymptote, SpitzerDpAgreesWithMc) {
  const auto m = StepModel::lattice(1.0, {-1, 2}, {2.0 / 3.0, 1.0 / 3.0});  // mean zero, skewed
  const auto dp = spitzer_rho(m, 200, SignOracle::DP);
  const auto mc = spitzer_rho(m, 200, SignOracle::MC, 20000, McOptions{2, 1, 1024});
  EXPECT_LT(std::abs(dp.value - mc.value), 3 * mc.std_error);
  EXPECT_NE(dp.value, 0.5);
}

TEST(Asymptote, SlowlyVaryingAtOneAndConstantInputs) {
  const auto sp = sign_probabilities(kSym, 256, SignOracle::DP);
  EXPECT_EQ(slowly_varying_l1(1.0, 0.5, sp).value, 1.0 / std::tgamma(0.5));
  EXPECT_EQ(slowly_varying_l1_hat(1.0, 0.5, sp).value, 1.0 / std::tgamma(0.5));
  SignProbabilities flat;
  flat.ge0.assign(512, 0.3);
  flat.gt0.assign(512, 0.3);
  for (double x : {1.0, 10.0, 100.0}) {
    EXPECT_DOUBLE_EQ(slowly_varying_l1(x, 0.3, flat).value, 1.0 / std::tgamma(0.3));
    EXPECT_DOUBLE_EQ(slowly_varying_l1_hat(x, 0.3, flat).value, 1.0 / std::tgamma(0.7));
  }
}

TEST(Asymptote, HatUsesStrictSign) {
  const auto sp = sign_probabilities(kSym, 64, SignOracle::DP);
  for (std::size_t k = 2; k <= 64; k += 2) {
    const double p0 = std::exp(std::lgamma(k + 1.0) - 2 * std::lgamma(k / 2 + 1.0) - k * std::log(2.0));
    EXPECT_NEAR(sp.gt0[k - 1], (1 - p0) / 2, 1e-13);
    EXPECT_NEAR(sp.ge0[k - 1], (1 + p0) / 2, 1e-13);
  }
  // symmetric: P(S_k >= 0) - 1/2 = 1/2 - P(S_k > 0), so the two factors coincide
  EXPECT_NEAR(slowly_varying_l1(8.0, 0.5, sp).value, slowly_varying_l1_hat(8.0, 0.5, sp).value, 1e-14);
  const auto skew = StepModel::lattice(1.0, {-1, 2}, {2.0 / 3.0, 1.0 / 3.0});
  const auto ss = sign_probabilities(skew, 64, SignOracle::DP);
  const double rho = spitzer_rho(skew, 64, SignOracle::DP).value;
  EXPECT_GT(std::abs(slowly_varying_l1(8.0, rho, ss).value * std::tgamma(rho) -
                     1.0 / (slowly_varying_l1_hat(8.0, rho, ss).value * std::tgamma(1 - rho))),
            1e-3);
}

TEST(Asymptote, SymmetricWalkSlowVariation) {
  const std::size_t x_max = 1 << 12;
  const auto sp = sign_probabilities(kSym, 4 * x_max, SignOracle::DP);
  const double x = static_cast<double>(x_max);
  const double r = slowly_varying_l1(x, 0.5, sp).value / slowly_varying_l1(x / 2, 0.5, sp).value;
  EXPECT_LT(std::abs(r - 1.0), 0.02);
  // l1 l1-hat = (1/pi) exp{sum_k q^k/k P(S_k = 0)} -> (1/pi) exp(log 2) = 2/pi
  double prev_gap = 1.0;
  for (double y = 64; y <= x; y *= 4) {
    const double prod = slowly_varying_l1(y, 0.5, sp).value * slowly_varying_l1_hat(y, 0.5, sp).value;
    const double gap = 2.0 / std::numbers::pi - prod;
    EXPECT_GT(gap, 0.0);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 0.02);
}

TEST(Asymptote, RemainderGuard) {
  const auto sp = sign_probabilities(kSym, 16, SignOracle::DP);
  EXPECT_THROW(slowly_varying_l1(1000.0, 0.5, sp), Error);
  EXPECT_NO_THROW(slowly_varying_l1(2.0, 0.5, sp));
  EXPECT_THROW(slowly_varying_l1(0.5, 0.5, sp), Error);
}

TEST(Asymptote, RateBn) {
  EXPECT_NEAR(rate_B_n(kPareto, 10), 0.2 * std::pow(18.0, -3.0), 1e-18);
  for (std::size_t n : {1u, 7u, 100u}) {
    const double a = 1.5;
    EXPECT_NEAR(rate_B_n(kPareto, n) * a * n / 3.0, tail_prob(kPareto, a * n), 1e-15);
  }
  for (std::size_t n = 1; n < 200; ++n) EXPECT_LT(rate_B_n(kPareto, n + 1), rate_B_n(kPareto, n));
  EXPECT_THROW(rate_B_n(StepModel::gaussian(-1, 1), 10), Error);
  EXPECT_THROW(rate_B_n(StepModel::shifted_pareto(3.0, 1.0, 0.0), 10), Error);
}

TEST(Asymptote, StableDensityAtZero) {
  EXPECT_NEAR(stable_density_at_zero(2.0, 0.5).value, 1.0 / (2.0 * std::sqrt(std::numbers::pi)), 1e-10);
  EXPECT_NEAR(stable_density_at_zero(1.0, 0.5).value, 1.0 / std::numbers::pi, 1e-10);
  for (auto [a, r] : {std::pair{0.5, 0.3}, {0.8, 0.9}, {1.5, 0.5}, {1.5, 0.4}, {1.9, 0.48}, {1.2, 0.2}}) {
    const auto g = stable_density_at_zero(a, r);
    EXPECT_NEAR(g.value, stable_oracle(a, r), 1e-8) << a << " " << r;
    EXPECT_LT(g.error, 1e-6);
  }
  EXPECT_THROW(stable_density_at_zero(1.5, 0.2), Error);
  EXPECT_THROW(stable_density_at_zero(2.0, 0.4), Error);
  EXPECT_THROW(stable_density_at_zero(2.5, 0.5), Error);
}

TEST(Asymptote, StableDensityShape) {
  // alpha = 2 under exp(-t^2): N(0, 2)
  EXPECT_NEAR(stable_density(2.0, 0.5, 1.0).value, std::exp(-0.25) / (2.0 * std::sqrt(std::numbers::pi)), 1e-8);
  // Cauchy
  EXPECT_NEAR(stable_density(1.0, 0.5, 1.0).value, 1.0 / (2.0 * std::numbers::pi), 1e-8);
  for (double a : {0.7, 1.2, 1.9}) EXPECT_GT(stable_density(a, 0.5, 0.0).value, stable_density(a, 0.5, 1.0).value);
}

TEST(Asymptote, PredictedRateDriftLambdaEqTheta) {
  const auto g = StepModel::gaussian(-2.0, 1.0);
  const auto p = make_rate_prediction(g, FSpec::make(1, 1, 1), {8, 16, 128});
  EXPECT_EQ(p.regime, RegimeTag::DriftLambdaEqTheta);
  for (std::size_t n : {8u, 16u, 128u}) EXPECT_NEAR(p.log_rate_at(n), -1.5 * n, 1e-8 * n);
  EXPECT_THROW(p.log_rate_at(9), Error);
}

TEST(Asymptote, PredictedRateHeavyTail) {
  const auto p = make_rate_prediction(kPareto, FSpec::make(1, 1, 1), {32, 512});
  EXPECT_EQ(p.regime, RegimeTag::DriftLambdaZeroHeavyTail);
  EXPECT_NEAR(p.ingredients.a, 1.5, 1e-12);
  EXPECT_NEAR(p.log_rate_at(32), -3.0 * std::log(1.0 + 48.0 + 2.0), 1e-12);
  EXPECT_NEAR(p.log_rate_at(512), -3.0 * std::log(1.0 + 768.0 + 2.0), 1e-12);
}

TEST(Asymptote, PredictedRateSymmetricWalk) {
  std::vector<std::size_t> ns;
  for (std::size_t n = 64; n <= 4096; n *= 2) ns.push_back(n);
  const auto p = make_rate_prediction(kSym, FSpec::make(1, 1, 1), ns);
  EXPECT_EQ(p.regime, RegimeTag::OscLambdaZero);
  EXPECT_EQ(p.ingredients.rho, 0.5);
  const double slope = (p.log_rate_at(4096) - p.log_rate_at(2048)) / std::log(2.0);
  EXPECT_NEAR(slope, -0.5, 0.01);
  // against the exact log P(tau > n) up to an additive constant
  const auto dp = exact_lattice_dp(kSym, 4096, DpBoundary::KillNegative);
  double lo = 1e300, hi = -1e300;
  for (auto n : ns) {
    const double d = std::log(static_cast<double>(dp.mass[n])) - p.log_rate_at(n);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  EXPECT_LT(hi - lo, 0.1);
}
