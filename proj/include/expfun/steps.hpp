#ifndef EXPFUN_STEPS_HPP
#define EXPFUN_STEPS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "expfun/error.hpp"
#include "expfun/random.hpp"

namespace expfun {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Step laws. Lattice support is spacing * offsets, so positions of a lattice
// walk are exact integers times the spacing.
struct Lattice {
  double spacing = 1.0;
  std::vector<int> offsets;
  std::vector<double> probs;
};

struct Gaussian {
  double mu = 0.0;
  double sigma = 1.0;
};

struct TwoPoint {
  double up = 1.0;
  double down = -1.0;
  double p_up = 0.5;
};

// X = scale * (P - 1) + shift with P ~ Pareto(beta) on [1, inf), so that
// P(X > x) = (1 + (x - shift) / scale)^(-beta) for x >= shift.
struct ShiftedPareto {
  double beta = 3.0;
  double scale = 1.0;
  double shift = 0.0;
};

struct Atom {
  double value;
  double prob;
};

class StepModel {
 public:
  using Variant = std::variant<Lattice, Gaussian, TwoPoint, ShiftedPareto>;

  static StepModel lattice(double spacing, std::vector<int> offsets, std::vector<double> probs) {
    require(spacing > 0 && std::isfinite(spacing), ErrorKind::Domain, "lattice spacing must be positive");
    require(!offsets.empty() && offsets.size() == probs.size(), ErrorKind::Domain,
            "lattice offsets and probs must be non-empty and of equal length");
    double total = 0.0;
    for (double p : probs) {
      require(p >= 0.0 && std::isfinite(p), ErrorKind::Domain, "lattice probabilities must be >= 0");
      total += p;
    }
    require(std::abs(total - 1.0) <= 1e-12, ErrorKind::Domain, "lattice probabilities must sum to 1");
    auto sorted = offsets;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::Domain,
            "lattice offsets must be distinct");
    return StepModel(Lattice{spacing, std::move(offsets), std::move(probs)});
  }

  static StepModel gaussian(double mu, double sigma) {
    require(std::isfinite(mu), ErrorKind::Domain, "gaussian mu must be finite");
    require(sigma > 0 && std::isfinite(sigma), ErrorKind::Domain, "gaussian sigma must be positive");
    return StepModel(Gaussian{mu, sigma});
  }

  static StepModel two_point(double up, double down, double p_up) {
    require(up > 0 && std::isfinite(up), ErrorKind::Domain, "two-point up must be positive");
    require(down < 0 && std::isfinite(down), ErrorKind::Domain, "two-point down must be negative");
    require(p_up >= 0 && p_up <= 1, ErrorKind::Domain, "two-point p_up must be a probability");
    return StepModel(TwoPoint{up, down, p_up});
  }

  static StepModel shifted_pareto(double beta, double scale, double shift) {
    require(beta > 1 && std::isfinite(beta), ErrorKind::Domain, "pareto beta must exceed 1 (finite mean)");
    require(scale > 0 && std::isfinite(scale), ErrorKind::Domain, "pareto scale must be positive");
    require(std::isfinite(shift), ErrorKind::Domain, "pareto shift must be finite");
    return StepModel(ShiftedPareto{beta, scale, shift});
  }

  const Variant& variant() const { return v_; }

  template <class T>
  const T* get_if() const { return std::get_if<T>(&v_); }

  bool is_atomic() const { return get_if<Lattice>() || get_if<TwoPoint>(); }
  bool heavy_tailed() const { return get_if<ShiftedPareto>() != nullptr; }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Lattice>) {
            os << "Lattice{spacing=" << m.spacing << ", offsets=[";
            for (std::size_t i = 0; i < m.offsets.size(); ++i) os << (i ? "," : "") << m.offsets[i];
            os << "], probs=[";
            for (std::size_t i = 0; i < m.probs.size(); ++i) os << (i ? "," : "") << m.probs[i];
            os << "]}";
          } else if constexpr (std::is_same_v<T, Gaussian>) {
            os << "Gaussian{mu=" << m.mu << ", sigma=" << m.sigma << "}";
          } else if constexpr (std::is_same_v<T, TwoPoint>) {
            os << "TwoPoint{up=" << m.up << ", down=" << m.down << ", p_up=" << m.p_up << "}";
          } else {
            os << "ShiftedPareto{beta=" << m.beta << ", scale=" << m.scale << ", shift=" << m.shift << "}";
          }
        },
        v_);
    return os.str();
  }

 private:
  explicit StepModel(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

// Support atoms of an atomic model (Lattice or TwoPoint), in declaration order.
inline std::vector<Atom> atoms(const StepModel& model) {
  if (const auto* l = model.get_if<Lattice>()) {
    std::vector<Atom> out;
    for (std::size_t i = 0; i < l->offsets.size(); ++i)
      out.push_back({l->spacing * l->offsets[i], l->probs[i]});
    return out;
  }
  if (const auto* t = model.get_if<TwoPoint>()) {
    return {{t->up, t->p_up}, {t->down, 1.0 - t->p_up}};
  }
  fail(ErrorKind::Domain, "atoms() requires a Lattice or TwoPoint model");
}

namespace detail {

inline double pareto_tail(const ShiftedPareto& m, double x) {
  if (x <= m.shift) return 1.0;
  return std::pow(1.0 + (x - m.shift) / m.scale, -m.beta);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Z | Z >= a for a standard normal Z. Plain rejection while the acceptance
// rate stays above P(Z >= 0.5); beyond that, the exponential envelope
// a + Exp(alpha) with alpha = (a + sqrt(a^2 + 4)) / 2.
inline double normal_tail(double a, Rng& rng) {
  if (a <= 0.5) {
    for (;;) {
      const double z = rng.normal();
      if (z >= a) return z;
    }
  }
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential() / alpha;
    const double d = z - alpha;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

}  // namespace detail

/// Draw one step X.
inline double sample_step(const StepModel& model, Rng& rng) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lattice>) {
          double u = rng.uniform();
          const std::size_t last = m.probs.size() - 1;
          for (std::size_t i = 0; i < last; ++i) {
            if (u < m.probs[i]) return m.spacing * m.offsets[i];
            u -= m.probs[i];
          }
          return m.spacing * m.offsets[last];
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return m.mu + m.sigma * rng.normal();
        } else if constexpr (std::is_same_v<T, TwoPoint>) {
          return rng.uniform() < m.p_up ? m.up : m.down;
        } else {
          return m.shift + m.scale * (std::pow(rng.uniform(), -1.0 / m.beta) - 1.0);
        }
      },
      model.variant());
}

/// L_X(lambda) = E[exp(lambda X)], +inf outside the finite domain.
///
/// Exact for the atomic and Gaussian laws. For ShiftedPareto the transform
/// is infinite for lambda > 0 and is computed by exp-sinh quadrature for
/// lambda < 0 (absolute tolerance 1e-10).
inline double laplace(const StepModel& model, double lambda) {
  if (lambda == 0.0) return 1.0;
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lattice> || std::is_same_v<T, TwoPoint>) {
          double sum = 0.0;
          for (const auto& a : atoms(model)) {
            if (a.prob > 0) sum += a.prob * std::exp(lambda * a.value);
          }
          return sum;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return std::exp(m.mu * lambda + 0.5 * m.sigma * m.sigma * lambda * lambda);
        } else {
          if (lambda > 0) return kInf;
          // E[exp(lambda * scale * (P - 1))] with P - 1 = t, density beta (1+t)^(-beta-1).
          const double c = -lambda * m.scale;
          boost::math::quadrature::exp_sinh<double> integrator;
          auto f = [&](double t) { return m.beta * std::pow(1.0 + t, -m.beta - 1.0) * std::exp(-c * t); };
          double err = 0.0;
          const double body = integrator.integrate(f, 1e-13, &err);
          return std::exp(lambda * m.shift) * body;
        }
      },
      model.variant());
}

/// P(X >= x).
inline double tail_prob(const StepModel& model, double x) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lattice> || std::is_same_v<T, TwoPoint>) {
          double sum = 0.0;
          for (const auto& a : atoms(model)) {
            if (a.value >= x) sum += a.prob;
          }
          return std::min(sum, 1.0);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return 0.5 * std::erfc((x - m.mu) / (m.sigma * std::sqrt(2.0)));
        } else {
          return detail::pareto_tail(m, x);
        }
      },
      model.variant());
}

/// P(X <= x).
inline double step_cdf(const StepModel& model, double x) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lattice> || std::is_same_v<T, TwoPoint>) {
          double sum = 0.0;
          for (const auto& a : atoms(model)) {
            if (a.value <= x) sum += a.prob;
          }
          return std::min(sum, 1.0);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return detail::normal_cdf((x - m.mu) / m.sigma);
        } else {
          return 1.0 - detail::pareto_tail(m, x);
        }
      },
      model.variant());
}

inline double step_mean(const StepModel& model) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lattice> || std::is_same_v<T, TwoPoint>) {
          double sum = 0.0;
          for (const auto& a : atoms(model)) sum += a.prob * a.value;
          return sum;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return m.mu;
        } else {
          // E[P] - 1 = beta / (beta - 1) - 1
          return m.shift + m.scale / (m.beta - 1.0);
        }
      },
      model.variant());
}

/// Draw from the law of X given X >= x. Inverse transform for the atomic
/// and Pareto laws; rejection under a declared envelope for the Gaussian.
inline double sample_step_conditional_tail(const StepModel& model, double x, Rng& rng) {
  if (x == -kInf) return sample_step(model, rng);
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lattice> || std::is_same_v<T, TwoPoint>) {
          const auto support = atoms(model);
          double mass = 0.0;
          for (const auto& a : support) {
            if (a.value >= x) mass += a.prob;
          }
          require(mass > 0, ErrorKind::Domain, "conditional tail: P(X >= x) = 0");
          double u = rng.uniform() * mass;
          double last = 0.0;
          for (const auto& a : support) {
            if (a.value < x || a.prob <= 0) continue;
            last = a.value;
            if (u < a.prob) return a.value;
            u -= a.prob;
          }
          return last;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          const double z = detail::normal_tail((x - m.mu) / m.sigma, rng);
          return m.mu + m.sigma * z;
        } else {
          if (x <= m.shift) return sample_step(model, rng);
          const double base = 1.0 + (x - m.shift) / m.scale;
          return m.shift + m.scale * (base * std::pow(rng.uniform(), -1.0 / m.beta) - 1.0);
        }
      },
      model.variant());
}

/// The law of -X. Heavy-tailed laws are one-sided here and cannot be mirrored.
inline StepModel negated(const StepModel& model) {
  if (const auto* l = model.get_if<Lattice>()) {
    std::vector<int> offs(l->offsets.size());
    std::transform(l->offsets.begin(), l->offsets.end(), offs.begin(), [](int o) { return -o; });
    return StepModel::lattice(l->spacing, std::move(offs), l->probs);
  }
  if (const auto* g = model.get_if<Gaussian>()) return StepModel::gaussian(-g->mu, g->sigma);
  if (const auto* t = model.get_if<TwoPoint>()) return StepModel::two_point(-t->down, -t->up, 1.0 - t->p_up);
  fail(ErrorKind::Domain, "negated(): the dual of a ShiftedPareto step is not represented");
}

inline bool is_symmetric(const StepModel& model) {
  if (const auto* l = model.get_if<Lattice>()) {
    for (std::size_t i = 0; i < l->offsets.size(); ++i) {
      if (l->probs[i] == 0) continue;
      auto it = std::find(l->offsets.begin(), l->offsets.end(), -l->offsets[i]);
      if (it == l->offsets.end()) return false;
      if (std::abs(l->probs[static_cast<std::size_t>(it - l->offsets.begin())] - l->probs[i]) > 1e-15) return false;
    }
    return true;
  }
  if (const auto* g = model.get_if<Gaussian>()) return g->mu == 0.0;
  if (const auto* t = model.get_if<TwoPoint>()) return t->up == -t->down && t->p_up == 0.5;
  return false;
}

/// Lattice spacing h when every downward step is exactly -h (the walk is
/// skip-free downward, so its strict descending ladder heights are all h).
inline std::optional<double> skip_free_down_spacing(const StepModel& model) {
  if (const auto* l = model.get_if<Lattice>()) {
    bool has_down = false;
    for (std::size_t i = 0; i < l->offsets.size(); ++i) {
      if (l->probs[i] <= 0) continue;
      if (l->offsets[i] < -1) return std::nullopt;
      if (l->offsets[i] == -1) has_down = true;
    }
    if (has_down) return l->spacing;
    return std::nullopt;
  }
  if (const auto* t = model.get_if<TwoPoint>()) {
    if (t->p_up >= 1.0) return std::nullopt;
    const double h = -t->down;
    const double ratio = t->up / h;
    if (std::abs(ratio - std::round(ratio)) < 1e-12) return h;
  }
  return std::nullopt;
}

inline std::optional<double> skip_free_up_spacing(const StepModel& model) {
  if (model.heavy_tailed()) return std::nullopt;
  if (!model.is_atomic()) return std::nullopt;
  return skip_free_down_spacing(negated(model));
}

}  // namespace expfun

#endif  // EXPFUN_STEPS_HPP
