#ifndef EXPFUN_ASYMPTOTE_HPP
#define EXPFUN_ASYMPTOTE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "expfun/error.hpp"
#include "expfun/estimate.hpp"
#include "expfun/oracles.hpp"
#include "expfun/steps.hpp"
#include "expfun/tilt.hpp"
#include "expfun/walk.hpp"

namespace expfun {

// ---------------------------------------------------------------------------
// Sign probabilities P(S_k >= 0), P(S_k > 0)

enum class SignOracle { DP, MC };

struct SignProbabilities {
  std::vector<double> ge0;  // index k - 1, k = 1..k_max
  std::vector<double> gt0;
  std::vector<double> se_ge0;  // zero for DP
  std::vector<double> se_gt0;
  SignOracle oracle = SignOracle::DP;
  std::size_t n_samples = 0;

  std::size_t k_max() const { return ge0.size(); }
};

inline constexpr std::uint64_t kSignPurpose = 0x5347;

/// Exact by lattice DP (no boundary) or per-k Bernoulli means from nsim paths.
inline SignProbabilities sign_probabilities(const StepModel& model, std::size_t k_max, SignOracle oracle,
                                            std::size_t nsim = 0, const McOptions& opt = {}) {
  require(k_max >= 1, ErrorKind::Domain, "sign probabilities need k_max >= 1");
  SignProbabilities out;
  out.oracle = oracle;
  if (oracle == SignOracle::DP) {
    const auto dp = exact_lattice_dp(model, k_max);
    for (std::size_t k = 1; k <= k_max; ++k) {
      out.ge0.push_back(static_cast<double>(dp.ge0[k]));
      out.gt0.push_back(static_cast<double>(dp.gt0[k]));
    }
    out.se_ge0.assign(k_max, 0.0);
    out.se_gt0.assign(k_max, 0.0);
    return out;
  }
  require(nsim >= 2, ErrorKind::Config, "Monte Carlo sign probabilities need nsim >= 2");
  out.n_samples = nsim;
  auto parts = with_kernel(model, [&](const auto& kernel) {
    return run_batches(nsim, opt, kSignPurpose, [&](std::size_t, std::size_t count, Rng& rng) {
      std::pair<std::vector<double>, std::vector<double>> c{std::vector<double>(k_max), std::vector<double>(k_max)};
      for (std::size_t i = 0; i < count; ++i) {
        typename std::decay_t<decltype(kernel)>::Position pos{};
        for (std::size_t k = 0; k < k_max; ++k) {
          pos += kernel.draw(rng);
          const double s = kernel.value(pos);
          c.first[k] += s >= 0;
          c.second[k] += s > 0;
        }
      }
      return c;
    });
  });
  out.ge0.assign(k_max, 0.0);
  out.gt0.assign(k_max, 0.0);
  for (const auto& p : parts) {
    for (std::size_t k = 0; k < k_max; ++k) {
      out.ge0[k] += p.first[k];
      out.gt0[k] += p.second[k];
    }
  }
  const double n = static_cast<double>(nsim);
  for (std::size_t k = 0; k < k_max; ++k) {
    out.ge0[k] /= n;
    out.gt0[k] /= n;
    out.se_ge0.push_back(std::sqrt(out.ge0[k] * (1 - out.ge0[k]) / n));
    out.se_gt0.push_back(std::sqrt(out.gt0[k] * (1 - out.gt0[k]) / n));
  }
  return out;
}

/// Cesaro mean (1/k_max) sum_k P(S_k > 0). Exactly 1/2 for symmetric laws.
inline Estimate spitzer_rho(const StepModel& model, std::size_t k_max, SignOracle oracle, std::size_t nsim = 0,
                            const McOptions& opt = {}) {
  require(k_max >= 16, ErrorKind::Domain, "spitzer_rho needs k_max >= 16");
  if (is_symmetric(model)) return {0.5, 0.0, 0, "symmetry", false};
  if (oracle == SignOracle::DP) {
    const auto sp = sign_probabilities(model, k_max, oracle);
    double s = 0.0;
    for (double p : sp.gt0) s += p;
    return {s / static_cast<double>(k_max), 0.0, 0, "dp", false};
  }
  // per-path Cesaro fraction, so the stderr accounts for correlation across k
  require(nsim >= 2, ErrorKind::Config, "spitzer_rho: Monte Carlo needs nsim >= 2");
  const auto m = with_kernel(model, [&](const auto& kernel) {
    return sample_moments(nsim, opt, kSignPurpose + 1, [&](Rng& rng) {
      typename std::decay_t<decltype(kernel)>::Position pos{};
      std::size_t c = 0;
      for (std::size_t k = 0; k < k_max; ++k) {
        pos += kernel.draw(rng);
        c += kernel.value(pos) > 0;
      }
      return static_cast<double>(c) / static_cast<double>(k_max);
    });
  });
  return m.estimate("mc");
}

// ---------------------------------------------------------------------------
// Slowly varying factors

struct SlowlyVarying {
  double value = 0.0;
  double remainder_bound = 0.0;  // bound on |neglected exponent|
  double std_error = 0.0;        // from Monte Carlo inputs (zero for DP)
};

namespace detail {

// sum_{k > K} q^k / k = -log(1 - q) - sum_{k <= K} q^k / k
inline double log_series_tail(double q, std::size_t K) {
  if (q <= 0) return 0.0;
  double head = 0.0, qk = 1.0;
  for (std::size_t k = 1; k <= K; ++k) {
    qk *= q;
    head += qk / static_cast<double>(k);
  }
  return std::max(0.0, -std::log1p(-q) - head);
}

// prefactor * exp(sign * sum_k q^k/k (p_k - rho)). The remainder uses the
// largest |p_k - rho| over the last quarter of the supplied k as the sup
// beyond k_max.
inline SlowlyVarying slowly_varying(double x, double rho, const std::vector<double>& probs,
                                    const std::vector<double>& se, double prefactor, double sign) {
  require(x >= 1, ErrorKind::Domain, "slowly varying factor needs x >= 1");
  require(rho > 0 && rho < 1, ErrorKind::Domain, "slowly varying factor needs rho in (0, 1)");
  require(!probs.empty(), ErrorKind::Domain, "slowly varying factor needs sign probabilities");
  const double q = 1.0 - 1.0 / x;
  const std::size_t K = probs.size();
  double s = 0.0, var = 0.0, qk = 1.0, sup = 0.0;
  for (std::size_t k = 1; k <= K; ++k) {
    qk *= q;
    const double c = qk / static_cast<double>(k);
    s += c * (probs[k - 1] - rho);
    if (k - 1 < se.size()) var += c * c * se[k - 1] * se[k - 1];
    if (4 * k >= 3 * K) sup = std::max(sup, std::abs(probs[k - 1] - rho));
  }
  SlowlyVarying out;
  out.value = prefactor * std::exp(sign * s);
  out.remainder_bound = sup * log_series_tail(q, K);
  out.std_error = out.value * std::sqrt(var);
  if (std::expm1(out.remainder_bound) > 0.1) {
    fail(ErrorKind::NumericGuard, "slowly varying factor: truncation remainder exceeds 10% (raise k_max)");
  }
  return out;
}

}  // namespace detail

/// l1(x) = Gamma(rho)^-1 exp{sum_k (1 - 1/x)^k / k (P(S_k >= 0) - rho)}
inline SlowlyVarying slowly_varying_l1(double x, double rho, const SignProbabilities& sp) {
  return detail::slowly_varying(x, rho, sp.ge0, sp.se_ge0, 1.0 / std::tgamma(rho), +1.0);
}

/// l1-hat(x) = Gamma(1 - rho)^-1 exp{-sum_k (1 - 1/x)^k / k (P(S_k > 0) - rho)}
inline SlowlyVarying slowly_varying_l1_hat(double x, double rho, const SignProbabilities& sp) {
  return detail::slowly_varying(x, rho, sp.gt0, sp.se_gt0, 1.0 / std::tgamma(1.0 - rho), -1.0);
}

// ---------------------------------------------------------------------------
// Heavy-tail rates

/// B_n = beta / (a n) P(X >= a n), a = -E[X] under the (tilted) law.
inline double rate_B_n(const StepModel& tilted, std::size_t n) {
  const auto* p = tilted.get_if<ShiftedPareto>();
  require(p != nullptr, ErrorKind::Domain, "B_n needs a regularly varying (ShiftedPareto) step law");
  const double a = -step_mean(tilted);
  require(a > 0, ErrorKind::Domain, "B_n needs a = -E[X] > 0");
  const double an = a * static_cast<double>(n);
  return p->beta / an * tail_prob(tilted, an);
}

// ---------------------------------------------------------------------------
// Strictly stable density

struct QuadratureValue {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

// phase phi0 = pi alpha (rho - 1/2): log E[exp(itY)] = -t^alpha exp(-i phi0) for t > 0
inline double stable_phase(double alpha, double rho) {
  require(alpha > 0 && alpha <= 2, ErrorKind::Domain, "stable law needs alpha in (0, 2]");
  require(rho > 0 && rho < 1, ErrorKind::Domain, "stable law needs rho in (0, 1)");
  if (alpha == 2) {
    require(rho == 0.5, ErrorKind::Domain, "alpha = 2 forces rho = 1/2");
  } else if (alpha > 1) {
    require(rho >= 1 - 1 / alpha - 1e-12 && rho <= 1 / alpha + 1e-12, ErrorKind::Domain,
            "strictly stable law with alpha > 1 needs 1 - 1/alpha <= rho <= 1/alpha");
  }
  return std::numbers::pi * alpha * (rho - 0.5);
}

}  // namespace detail

/// g(0) = (1/pi) int_0^inf Re phi(t) dt with u = t^alpha:
/// (1/(pi alpha)) int_0^inf u^(1/alpha - 1) exp(-u cos phi0) cos(u sin phi0) du.
inline QuadratureValue stable_density_at_zero(double alpha, double rho) {
  const double ph = detail::stable_phase(alpha, rho);
  const double c = std::cos(ph), s = std::sin(ph);
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  auto g = [&](double u) { return std::pow(u, 1.0 / alpha - 1.0) * std::exp(-u * c) * std::cos(u * s); };
  const double v = integrator.integrate(g, 0.0, std::numeric_limits<double>::infinity(), 1e-12, &err);
  const double k = 1.0 / (std::numbers::pi * alpha);
  return {k * v, k * err};
}

/// g(x) = (1/pi) int_0^inf exp(-c t^alpha) cos(s t^alpha - t x) dt.
inline QuadratureValue stable_density(double alpha, double rho, double x) {
  if (x == 0.0) return stable_density_at_zero(alpha, rho);
  const double ph = detail::stable_phase(alpha, rho);
  const double c = std::cos(ph), s = std::sin(ph);
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  auto g = [&](double t) {
    const double ta = std::pow(t, alpha);
    return std::exp(-c * ta) * std::cos(s * ta - t * x);
  };
  const double v = integrator.integrate(g, 0.0, std::numeric_limits<double>::infinity(), 1e-10, &err);
  return {v / std::numbers::pi, err / std::numbers::pi};
}

// ---------------------------------------------------------------------------
// Predicted rates

struct RateIngredients {
  double rho = 0.5;           // Spitzer
  double lambda = 0.0;        // Lambda
  double log_rho_factor = 0;  // log varrho = Phi(Lambda)
  double a = 0.0;             // -E^(Lambda)[X]
  double beta = 0.0;          // tail index (heavy tails)
  double alpha = 2.0;         // stable index (finite variance: 2)
};

struct RatePrediction {
  RegimeTag regime = RegimeTag::Unsupported;
  RateIngredients ingredients;
  std::vector<std::size_t> horizons;
  std::vector<double> log_rate;  // per horizon

  double log_rate_at(std::size_t n) const {
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      if (horizons[i] == n) return log_rate[i];
    }
    fail(ErrorKind::Domain, "log_rate_at: horizon " + std::to_string(n) + " was not requested");
  }
};

/// log of the n-dependent factor of the regime's asymptotic (constants excluded):
///   osc, Lambda = 0:      (rho - 1) log n + log l1(n)
///   osc, interior:        n log varrho - (1 + 1/alpha) log n          (A_n with l2 = 1, ratios only)
///   osc, Lambda = theta:  n log varrho - rho log n + log l1-hat(n)
///   drift, Lambda=theta:  n Phi(theta)
///   drift, Lambda = 0:    log P(X >= a n)
///   drift, interior:      n log varrho + log B_n
/// `signs` feeds l1 / l1-hat (signs of the tilted walk where relevant).
inline double predicted_log_rate(RegimeTag regime, const RateIngredients& in, const StepModel& tilted,
                                 const SignProbabilities* signs, std::size_t n) {
  require(n >= 1, ErrorKind::Domain, "predicted_log_rate needs n >= 1");
  const double ln = std::log(static_cast<double>(n));
  const double x = static_cast<double>(n);
  switch (regime) {
    case RegimeTag::OscLambdaZero:
      require(signs != nullptr, ErrorKind::Domain, "osc_lambda_zero rate needs sign probabilities");
      return (in.rho - 1.0) * ln + std::log(slowly_varying_l1(x, in.rho, *signs).value);
    case RegimeTag::OscInterior:
      return x * in.log_rho_factor - (1.0 + 1.0 / in.alpha) * ln;
    case RegimeTag::OscLambdaEqTheta:
      require(signs != nullptr, ErrorKind::Domain, "osc_lambda_eq_theta rate needs sign probabilities");
      return x * in.log_rho_factor - in.rho * ln + std::log(slowly_varying_l1_hat(x, in.rho, *signs).value);
    case RegimeTag::DriftLambdaEqTheta:
      return x * in.log_rho_factor;
    case RegimeTag::DriftLambdaZeroHeavyTail:
      return std::log(tail_prob(tilted, in.a * x));
    case RegimeTag::DriftInteriorHeavyTail:
      return x * in.log_rho_factor + std::log(rate_B_n(tilted, n));
    default:
      fail(ErrorKind::Domain, std::string("no rate prediction for regime ") + to_string(regime));
  }
}

/// Ingredients from the classification, sign probabilities of the tilted
/// walk (DP on lattices, MC otherwise) and the log-rate at every horizon.
inline RatePrediction make_rate_prediction(const StepModel& model, const FSpec& f,
                                           const std::vector<std::size_t>& horizons, std::size_t nsim = 20000,
                                           const McOptions& opt = {}) {
  const auto reg = regime_classify(model, f);
  RatePrediction out;
  out.regime = reg.tag;
  out.horizons = horizons;
  const auto& rep = reg.report;
  const StepModel& tilted = rep.tilted_model;
  auto& in = out.ingredients;
  in.lambda = rep.lambda_star;
  in.log_rho_factor = rep.phi_at_lambda;
  in.a = -rep.tilted_mean;
  if (const auto* p = tilted.get_if<ShiftedPareto>()) in.beta = p->beta;
  std::optional<SignProbabilities> signs;
  if (reg.tag == RegimeTag::OscLambdaZero || reg.tag == RegimeTag::OscLambdaEqTheta) {
    std::size_t n_max = 16;
    for (auto n : horizons) n_max = std::max(n_max, n);
    // (1 - 1/x)^k is below e^-4 past k = 4x
    const std::size_t k_max = 4 * n_max;
    const auto oracle = tilted.get_if<Lattice>() ? SignOracle::DP : SignOracle::MC;
    signs = sign_probabilities(tilted, k_max, oracle, nsim, opt);
    in.rho = is_symmetric(tilted) ? 0.5 : [&] {
      double s = 0.0;
      for (double p : signs->gt0) s += p;
      return s / static_cast<double>(signs->k_max());
    }();
  }
  for (auto n : horizons) {
    out.log_rate.push_back(predicted_log_rate(reg.tag, in, tilted, signs ? &*signs : nullptr, n));
  }
  return out;
}

}  // namespace expfun

#endif  // EXPFUN_ASYMPTOTE_HPP
