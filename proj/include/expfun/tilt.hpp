#ifndef EXPFUN_TILT_HPP
#define EXPFUN_TILT_HPP

#include <cmath>
#include <string>
#include <utility>

#include "expfun/error.hpp"
#include "expfun/log_sum_exp.hpp"
#include "expfun/steps.hpp"

namespace expfun {

/// F(x) = K0 * (c0 + x)^(-theta): bounded by K0 c0^-theta, non-increasing,
/// globally Lipschitz, and x^theta F(x) -> K0, so theta is the decay index.
struct FSpec {
  double K0 = 1.0;
  double theta = 1.0;
  double c0 = 1.0;

  static FSpec make(double K0, double theta, double c0) {
    require(K0 > 0 && theta > 0 && c0 > 0, ErrorKind::Domain, "FSpec requires K0, theta, c0 > 0");
    return FSpec{K0, theta, c0};
  }

  double operator()(double x) const { return K0 * std::pow(c0 + x, -theta); }

  // F(exp(log_x)) without forming exp(log_x).
  double from_log(double log_x) const {
    return K0 * std::exp(-theta * log_add_exp(std::log(c0), log_x));
  }

  double bound() const { return K0 * std::pow(c0, -theta); }
  double lipschitz() const { return theta * K0 * std::pow(c0, -theta - 1.0); }
};

enum class Boundary { Interior, AtZero, AtThetaF, AtDomainSup };

inline const char* to_string(Boundary b) {
  switch (b) {
    case Boundary::Interior: return "interior";
    case Boundary::AtZero: return "at_zero";
    case Boundary::AtThetaF: return "at_theta_f";
    case Boundary::AtDomainSup: return "at_domain_sup";
  }
  return "unknown";
}

struct TiltReport {
  double lambda_star = 0.0;
  double rho_factor = 1.0;     // L_X(lambda_star)
  double phi_at_lambda = 0.0;  // log L_X(lambda_star)
  double tilted_mean = 0.0;
  double theta_f = 0.0;
  Boundary boundary = Boundary::AtZero;
  StepModel tilted_model;
};

/// Esscher transform: the step law under P^(lambda0), density exp(lambda0 x) / L_X(lambda0).
inline StepModel esscher(const StepModel& model, double lambda0) {
  if (lambda0 == 0.0) return model;
  const double L = laplace(model, lambda0);
  require(std::isfinite(L), ErrorKind::Domain, "esscher: L_X(lambda0) is infinite");
  if (const auto* l = model.get_if<Lattice>()) {
    std::vector<double> w(l->probs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = l->probs[i] * std::exp(lambda0 * l->spacing * l->offsets[i]);
      total += w[i];
    }
    for (double& p : w) p /= total;
    return StepModel::lattice(l->spacing, l->offsets, std::move(w));
  }
  if (const auto* g = model.get_if<Gaussian>()) {
    return StepModel::gaussian(g->mu + g->sigma * g->sigma * lambda0, g->sigma);
  }
  if (const auto* t = model.get_if<TwoPoint>()) {
    const double wu = t->p_up * std::exp(lambda0 * t->up);
    const double wd = (1.0 - t->p_up) * std::exp(lambda0 * t->down);
    return StepModel::two_point(t->up, t->down, wu / (wu + wd));
  }
  fail(ErrorKind::Domain, "esscher: ShiftedPareto can only be tilted by lambda0 = 0");
}

namespace detail {

inline double log_laplace(const StepModel& model, double lambda) {
  const double L = laplace(model, lambda);
  return std::isfinite(L) ? std::log(L) : kInf;
}

// d/dlambda log L_X(lambda) = E^(lambda)[X], exact wherever the tilt is closed-form.
inline double log_laplace_slope(const StepModel& model, double lambda) {
  return step_mean(esscher(model, lambda));
}

}  // namespace detail

/// Minimize L_X over [0, theta_F] intersected with the finite Laplace domain.
///
/// Endpoint shortcuts use the one-sided slopes of log L_X (log-convexity makes
/// an outward-pointing slope conclusive). Otherwise golden-section search
/// brackets the minimizer and a bisection on the sign of the exact slope
/// polishes it to `tol`. Flat transforms resolve to lambda = 0.
inline TiltReport find_lambda(const StepModel& model, double theta_F, double tol = 1e-12) {
  require(theta_F > 0, ErrorKind::Domain, "find_lambda: theta_F must be positive");
  require(tol > 0, ErrorKind::Domain, "find_lambda: tol must be positive");

  auto at = [&](double lambda, Boundary b) {
    const StepModel tilted = esscher(model, lambda);
    const double rho = laplace(model, lambda);
    return TiltReport{lambda, rho, std::log(rho), step_mean(tilted), theta_F, b, tilted};
  };

  // Upper end of the search: theta_F, or the sup of the finite domain below it.
  double upper = theta_F;
  Boundary upper_kind = Boundary::AtThetaF;
  if (!std::isfinite(laplace(model, theta_F))) {
    upper_kind = Boundary::AtDomainSup;
    double lo = 0.0, hi = theta_F;
    if (!std::isfinite(laplace(model, tol))) {
      upper = 0.0;
    } else {
      for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::isfinite(laplace(model, mid)) ? lo : hi) = mid;
      }
      upper = lo;
    }
  }
  if (upper <= tol) return at(0.0, Boundary::AtZero);

  // The slope at 0+ is E[X].
  if (step_mean(model) >= 0.0) return at(0.0, Boundary::AtZero);

  const bool exact_slope = !model.heavy_tailed();
  auto slope = [&](double lambda) {
    if (exact_slope) return detail::log_laplace_slope(model, lambda);
    const double h = 1e-6 * std::max(1.0, lambda);
    return (detail::log_laplace(model, lambda) - detail::log_laplace(model, lambda - h)) / h;
  };
  if (slope(upper) <= 0.0) return at(upper, upper_kind);

  // Golden-section on log L (convex, hence unimodal).
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = upper;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = detail::log_laplace(model, c), fd = detail::log_laplace(model, d);
  for (int i = 0; i < 200 && b - a > tol; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = detail::log_laplace(model, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = detail::log_laplace(model, d);
    }
  }
  // Golden-section stalls near sqrt(machine eps) in the argument; the slope
  // changes sign across the minimizer, so bisect on it within a widened bracket.
  if (exact_slope) {
    double lo = std::max(0.0, a - 1e-6 * (1.0 + upper)), hi = std::min(upper, b + 1e-6 * (1.0 + upper));
    if (slope(lo) < 0.0 && slope(hi) > 0.0) {
      for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) < 0.0 ? lo : hi) = mid;
      }
      a = lo;
      b = hi;
    }
  }
  return at(0.5 * (a + b), Boundary::Interior);
}

enum class RegimeTag {
  OscLambdaZero,
  OscInterior,
  OscLambdaEqTheta,
  DriftLambdaEqTheta,
  DriftLambdaZeroHeavyTail,
  DriftInteriorHeavyTail,
  DriftsToInfinity,
  Unsupported,
};

inline const char* to_string(RegimeTag tag) {
  switch (tag) {
    case RegimeTag::OscLambdaZero: return "osc_lambda_zero";
    case RegimeTag::OscInterior: return "osc_interior";
    case RegimeTag::OscLambdaEqTheta: return "osc_lambda_eq_theta";
    case RegimeTag::DriftLambdaEqTheta: return "drift_lambda_eq_theta";
    case RegimeTag::DriftLambdaZeroHeavyTail: return "drift_lambda_zero_heavy_tail";
    case RegimeTag::DriftInteriorHeavyTail: return "drift_interior_heavy_tail";
    case RegimeTag::DriftsToInfinity: return "drifts_to_infinity";
    case RegimeTag::Unsupported: return "unsupported";
  }
  return "unsupported";
}

struct RegimeResult {
  RegimeTag tag = RegimeTag::Unsupported;
  std::string reason;
  TiltReport report;
};

/// Tilted means with |mean| below this are treated as zero (oscillating).
inline constexpr double kZeroMeanTol = 1e-6;

inline RegimeResult regime_classify(const StepModel& model, const FSpec& f) {
  TiltReport r = find_lambda(model, f.theta);
  auto out = [&](RegimeTag tag, std::string reason = {}) { return RegimeResult{tag, std::move(reason), r}; };

  if (step_mean(model) > kZeroMeanTol) return out(RegimeTag::DriftsToInfinity);

  const bool oscillating = std::abs(r.tilted_mean) <= kZeroMeanTol;
  const bool drifting_down = r.tilted_mean < -kZeroMeanTol;
  switch (r.boundary) {
    case Boundary::AtZero:
      if (oscillating) return out(RegimeTag::OscLambdaZero);
      if (drifting_down && model.heavy_tailed()) return out(RegimeTag::DriftLambdaZeroHeavyTail);
      return out(RegimeTag::Unsupported, "negative drift with lambda = 0 needs a regularly varying step law");
    case Boundary::Interior:
      if (oscillating) return out(RegimeTag::OscInterior);
      return out(RegimeTag::Unsupported, "interior minimizer with non-zero tilted mean");
    case Boundary::AtThetaF:
      if (oscillating) return out(RegimeTag::OscLambdaEqTheta);
      if (drifting_down) return out(RegimeTag::DriftLambdaEqTheta);
      return out(RegimeTag::Unsupported, "tilted walk drifts upward at lambda = theta_F");
    case Boundary::AtDomainSup:
      if (drifting_down && model.heavy_tailed()) return out(RegimeTag::DriftInteriorHeavyTail);
      return out(RegimeTag::Unsupported, "Laplace domain ends below theta_F without a heavy-tailed tilted law");
  }
  return out(RegimeTag::Unsupported, "unclassified");
}

}  // namespace expfun

#endif  // EXPFUN_TILT_HPP
