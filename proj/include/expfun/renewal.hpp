#ifndef EXPFUN_RENEWAL_HPP
#define EXPFUN_RENEWAL_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "expfun/error.hpp"
#include "expfun/estimate.hpp"
#include "expfun/oracles.hpp"
#include "expfun/random.hpp"
#include "expfun/steps.hpp"
#include "expfun/walk.hpp"

namespace expfun {

enum class RenewalFlavor { Descending, Ascending };  // V, V-hat
enum class Provenance { ExactSkipFree, ExactMeanFormula, MonteCarlo };
enum class Interpolation { Staircase, Linear };

inline const char* to_string(RenewalFlavor f) { return f == RenewalFlavor::Descending ? "descending" : "ascending"; }

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::ExactSkipFree: return "exact_skip_free";
    case Provenance::ExactMeanFormula: return "exact_mean_formula";
    case Provenance::MonteCarlo: return "monte_carlo";
  }
  return "unknown";
}

/// V (or V-hat) on a uniform grid starting at 0. Lattice tables are
/// staircases on multiples of `step` (right-continuous); other tables are
/// interpolated linearly. Beyond the grid V grows linearly with tail_slope.
struct RenewalTable {
  RenewalFlavor flavor = RenewalFlavor::Descending;
  Provenance provenance = Provenance::MonteCarlo;
  Interpolation interpolation = Interpolation::Linear;
  double step = 0.0;  // lattice spacing (staircase tables)
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> std_error;
  double tail_slope = 0.0;
  std::size_t chains = 0;
  double censoring_rate = 0.0;

  double operator()(double x) const {
    if (interpolation == Interpolation::Staircase) {
      const double tol = 1e-9 * step;
      if (x < -tol) return 0.0;
      if (provenance == Provenance::ExactSkipFree) return std::floor(x / step + 1e-9) + 1.0;
      const double gb = grid.back();
      if (x <= gb + tol) {
        const auto it = std::upper_bound(grid.begin(), grid.end(), x + tol);
        return values[static_cast<std::size_t>(it - grid.begin()) - 1];
      }
      return values.back() + tail_slope * step * std::floor((x - gb) / step + 1e-9);
    }
    if (x < 0) return 0.0;
    const double gb = grid.back();
    if (x >= gb) return values.back() + tail_slope * (x - gb);
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
    const double w = (x - grid[i]) / (grid[i + 1] - grid[i]);
    return values[i] + w * (values[i + 1] - values[i]);
  }

  double x_max() const { return grid.back(); }
};

/// V(x) = floor(x / spacing) + 1 for walks whose downward steps are exactly
/// one lattice unit; 0 for x < 0.
inline double renewal_exact_skipfree(double spacing, double x) {
  require(spacing > 0, ErrorKind::Domain, "renewal_exact_skipfree: spacing must be positive");
  if (x < -1e-9 * spacing) return 0.0;
  return std::floor(x / spacing + 1e-9) + 1.0;
}

namespace detail {

inline std::vector<double> renewal_grid(std::optional<double> spacing, double x_max, std::size_t points) {
  require(points >= 64 && points <= 1024, ErrorKind::Domain, "renewal grid must have 64..1024 points");
  require(x_max > 0, ErrorKind::Domain, "renewal grid: x_max must be positive");
  std::vector<double> g(points);
  if (spacing) {
    const double units = std::max(1.0, std::ceil(x_max / (*spacing * static_cast<double>(points - 1)) - 1e-9));
    for (std::size_t j = 0; j < points; ++j) g[j] = static_cast<double>(j) * units * *spacing;
  } else {
    for (std::size_t j = 0; j < points; ++j) g[j] = x_max * static_cast<double>(j) / static_cast<double>(points - 1);
  }
  return g;
}

// Least-squares slope over the last quartile of the grid, clamped at 0.
inline double fit_tail_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  const std::size_t from = std::min(n - 2, n - std::max<std::size_t>(2, n / 4));
  double mx = 0, my = 0;
  const double m = static_cast<double>(n - from);
  for (std::size_t i = from; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxy = 0, sxx = 0;
  for (std::size_t i = from; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? std::max(0.0, sxy / sxx) : 0.0;
}

}  // namespace detail

inline RenewalTable renewal_exact_table(double spacing, double x_max, RenewalFlavor flavor = RenewalFlavor::Descending,
                                        std::size_t points = 64) {
  RenewalTable t;
  t.flavor = flavor;
  t.provenance = Provenance::ExactSkipFree;
  t.interpolation = Interpolation::Staircase;
  t.step = spacing;
  t.grid = detail::renewal_grid(spacing, x_max, points);
  for (double x : t.grid) t.values.push_back(renewal_exact_skipfree(spacing, x));
  t.std_error.assign(t.grid.size(), 0.0);
  t.tail_slope = 1.0 / spacing;
  return t;
}

/// Monte Carlo V: 1 + E[#{n >= 1 : H_1 + ... + H_n <= x}] over independent
/// chains of first ladder heights. A chain whose ladder epoch is censored at
/// `cap` stops early; the censored fraction enters the error bars as a bias
/// bound and more than 50% censored chains is an error.
///
/// Per-point errors are chain-level standard errors, floored at 1/n_chains
/// (the count resolution) so that deterministic counts still carry a
/// positive error bar.
inline RenewalTable renewal_estimate(const StepModel& model, RenewalFlavor flavor, double x_max, std::size_t n_chains,
                                     std::size_t cap, const McOptions& opt, std::size_t points = 64) {
  require(n_chains >= 2, ErrorKind::Domain, "renewal_estimate: need at least 2 chains");
  std::optional<double> spacing;
  if (const auto* l = model.get_if<Lattice>()) spacing = l->spacing;

  RenewalTable t;
  t.flavor = flavor;
  t.provenance = Provenance::MonteCarlo;
  t.interpolation = spacing ? Interpolation::Staircase : Interpolation::Linear;
  t.step = spacing.value_or(0.0);
  t.grid = detail::renewal_grid(spacing, x_max, points);
  const std::size_t G = t.grid.size();
  const double tol = spacing ? 1e-9 * *spacing : 0.0;
  const auto dir = flavor == RenewalFlavor::Descending ? LadderDirection::Descending : LadderDirection::Ascending;

  struct Part {
    std::vector<Moments> counts;
    std::size_t censored = 0;
  };
  auto parts = run_batches(n_chains, opt, 0x52454e, [&](std::size_t, std::size_t count, Rng& rng) {
    Part part;
    part.counts.resize(G);
    std::vector<double> diff(G + 1);
    with_kernel(model, [&](const auto& kernel) {
      for (std::size_t c = 0; c < count; ++c) {
        std::fill(diff.begin(), diff.end(), 0.0);
        double sum = 0.0;
        for (;;) {
          const auto h = first_ladder_height(kernel, dir, cap, rng);
          if (!h) {
            ++part.censored;
            break;
          }
          sum += *h;
          if (sum > t.grid.back() + tol) break;
          const auto it = std::lower_bound(t.grid.begin(), t.grid.end(), sum - tol);
          diff[static_cast<std::size_t>(it - t.grid.begin())] += 1.0;
        }
        double run = 0.0;
        for (std::size_t j = 0; j < G; ++j) {
          run += diff[j];
          part.counts[j].push(run);
        }
      }
    });
    return part;
  });

  std::vector<Moments> counts(G);
  std::size_t censored = 0;
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < G; ++j) counts[j].merge(p.counts[j]);
    censored += p.censored;
  }
  t.chains = n_chains;
  t.censoring_rate = static_cast<double>(censored) / static_cast<double>(n_chains);
  if (t.censoring_rate > 0.5) {
    fail(ErrorKind::NumericGuard, "renewal_estimate: more than 50% of ladder chains censored");
  }
  const double floor_se = 1.0 / static_cast<double>(n_chains);
  for (std::size_t j = 0; j < G; ++j) {
    t.values.push_back(1.0 + counts[j].mean());
    const double se = std::max(counts[j].std_error(), floor_se);
    t.std_error.push_back(std::hypot(se, t.censoring_rate * counts[j].mean()));
  }
  t.tail_slope = detail::fit_tail_slope(t.grid, t.values);
  return t;
}

/// E_x[tau_0^-] by Monte Carlo; censored walks count as `cap` (a lower bound)
/// and any censoring is an error, since the estimand then is not finite at
/// desk scale.
inline Estimate expected_passage_time(const StepModel& model, double x, std::size_t nsim, std::size_t cap,
                                      const McOptions& opt, std::uint64_t purpose = 0x544155) {
  std::size_t censored = 0;
  auto parts = run_batches(nsim, opt, purpose, [&](std::size_t, std::size_t count, Rng& rng) {
    std::pair<Moments, std::size_t> r{};
    with_kernel(model, [&](const auto& kernel) {
      for (std::size_t i = 0; i < count; ++i) {
        const auto tau = first_passage_below_zero(kernel, x, cap, rng);
        if (!tau) ++r.second;
        r.first.push(static_cast<double>(tau.value_or(cap)));
      }
    });
    return r;
  });
  Moments m;
  for (const auto& p : parts) {
    m.merge(p.first);
    censored += p.second;
  }
  if (censored > 0) fail(ErrorKind::NumericGuard, "expected_passage_time: passage censored at cap");
  return m.estimate("mc_passage_time");
}

/// V(x) = E_x[tau_0^-] / E[tau_0^-] for a Lattice walk drifting to -inf,
/// with E_x[tau] = sum_n P_x(tau > n) summed by the killed DP until the
/// surviving mass drops below 1e-15.
inline RenewalTable renewal_mean_formula_exact(const StepModel& model, double x_max, std::size_t points = 64,
                                               std::size_t max_steps = 200000) {
  const auto* l = model.get_if<Lattice>();
  require(l != nullptr, ErrorKind::Domain, "renewal_mean_formula_exact requires a Lattice model");
  require(step_mean(model) < 0, ErrorKind::Domain, "renewal_mean_formula_exact requires negative drift");
  RenewalTable t;
  t.provenance = Provenance::ExactMeanFormula;
  t.interpolation = Interpolation::Staircase;
  t.step = l->spacing;
  t.grid = detail::renewal_grid(l->spacing, x_max, points);

  auto mean_tau = [&](std::int64_t start) {
    // forward killed DP, one row at a time
    std::vector<long double> row{1.0L};
    std::int64_t lo = start;
    int lo_off = *std::min_element(l->offsets.begin(), l->offsets.end());
    int hi_off = *std::max_element(l->offsets.begin(), l->offsets.end());
    long double total = 0.0L, mass = 1.0L;
    for (std::size_t n = 0; n < max_steps; ++n) {
      total += mass;
      if (mass < 1e-15L) return total;
      std::vector<long double> next(row.size() + static_cast<std::size_t>(hi_off - lo_off), 0.0L);
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i] == 0.0L) continue;
        for (std::size_t a = 0; a < l->offsets.size(); ++a)
          next[i + static_cast<std::size_t>(l->offsets[a] - lo_off)] += row[i] * l->probs[a];
      }
      std::int64_t nlo = lo + lo_off;
      std::size_t cut = 0;
      while (nlo + static_cast<std::int64_t>(cut) < 0 && cut < next.size()) ++cut;
      std::size_t end = next.size();
      while (end > cut && next[end - 1] < 1e-30L) --end;
      row.assign(next.begin() + static_cast<std::ptrdiff_t>(cut), next.begin() + static_cast<std::ptrdiff_t>(end));
      lo = nlo + static_cast<std::int64_t>(cut);
      mass = 0.0L;
      for (auto p : row) mass += p;
    }
    fail(ErrorKind::NumericGuard, "renewal_mean_formula_exact: survival mass did not vanish");
  };
  const long double base = mean_tau(0);
  for (double x : t.grid) {
    const auto idx = static_cast<std::int64_t>(std::llround(x / l->spacing));
    t.values.push_back(static_cast<double>(mean_tau(idx) / base));
  }
  t.std_error.assign(t.grid.size(), 0.0);
  t.tail_slope = detail::fit_tail_slope(t.grid, t.values);
  return t;
}

/// Exact V table when the walk is skip-free in the flavor's direction,
/// otherwise the Monte Carlo estimate.
inline RenewalTable renewal_table_for(const StepModel& model, RenewalFlavor flavor, double x_max,
                                      std::size_t n_chains, std::size_t cap, const McOptions& opt,
                                      std::size_t points = 64) {
  // The staircase needs non-defective ladder heights: no drift away from the ladder direction.
  const bool desc = flavor == RenewalFlavor::Descending;
  const double mean = step_mean(model);
  const auto h = desc ? skip_free_down_spacing(model) : skip_free_up_spacing(model);
  if (h && (desc ? mean <= 0 : mean >= 0)) return renewal_exact_table(*h, x_max, flavor, points);
  return renewal_estimate(model, flavor, x_max, n_chains, cap, opt, points);
}

// ---------------------------------------------------------------------------
// Weighted Laplace integrals L_V^(lambda)(y) = int_0^y exp(-lambda z) V(z) dz.

namespace detail {

// int_0^L exp(-lambda u) (A + B u) du
inline double linear_piece(double A, double B, double lambda, double L) {
  if (lambda == 0.0) return A * L + 0.5 * B * L * L;
  if (std::isinf(L)) return A / lambda + B / (lambda * lambda);
  const double e = std::exp(-lambda * L);
  return A * (-std::expm1(-lambda * L)) / lambda + B * (1.0 - e * (1.0 + lambda * L)) / (lambda * lambda);
}

// int_0^L exp(-lambda u) (A + B floor(u / h)) du
inline double staircase_piece(double A, double B, double h, double lambda, double L) {
  if (std::isinf(L)) {
    const double q = std::exp(-lambda * h);
    return (A + B * q / (1.0 - q)) / lambda;
  }
  const double M = std::floor(L / h + 1e-12);
  const double r = std::max(0.0, L - M * h);
  if (lambda == 0.0) return h * (A * M + B * M * (M - 1.0) / 2.0) + (A + B * M) * r;
  const double q = std::exp(-lambda * h);
  const double qM = std::pow(q, M);
  const double s0 = (1.0 - qM) / (1.0 - q);
  const double s1 = q * (1.0 - M * std::pow(q, M - 1.0) + (M - 1.0) * qM) / ((1.0 - q) * (1.0 - q));
  const double cell = -std::expm1(-lambda * h) / lambda;
  return (A * s0 + B * s1) * cell + (A + B * M) * qM * (-std::expm1(-lambda * r)) / lambda;
}

}  // namespace detail

struct WeightedIntegral {
  double value = 0.0;
  double quad_error = 0.0;  // discretization error estimate
  double stat_error = 0.0;  // propagated from the table's standard errors
};

inline WeightedIntegral laplace_weighted_integral(const RenewalTable& t, double lambda, double y) {
  require(!(std::isinf(y) && lambda <= 0), ErrorKind::Domain, "laplace_weighted_integral: lambda must be > 0 when y = inf");
  require(y >= 0, ErrorKind::Domain, "laplace_weighted_integral: y must be >= 0");
  WeightedIntegral out;
  if (y == 0.0) return out;

  if (t.provenance == Provenance::ExactSkipFree) {
    out.value = detail::staircase_piece(1.0, 1.0, t.step, lambda, y);
    return out;
  }

  const auto& g = t.grid;
  const auto& v = t.values;
  auto body = [&](std::size_t stride) {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < g.size(); i += stride) {
      const std::size_t j = std::min(i + stride, g.size() - 1);
      const double a = g[i];
      if (a >= y) break;
      const double len = std::min(g[j], y) - a;
      const double scale = std::exp(-lambda * a);
      if (t.interpolation == Interpolation::Staircase) {
        sum += scale * detail::linear_piece(v[i], 0.0, lambda, len);
      } else {
        sum += scale * detail::linear_piece(v[i], (v[j] - v[i]) / (g[j] - g[i]), lambda, len);
      }
    }
    return sum;
  };
  out.value = body(1);
  if (y > g.back()) {
    const double L = std::isinf(y) ? y : y - g.back();
    const double scale = std::exp(-lambda * g.back());
    out.value += t.interpolation == Interpolation::Staircase
                     ? scale * detail::staircase_piece(v.back(), t.tail_slope * t.step, t.step, lambda, L)
                     : scale * detail::linear_piece(v.back(), t.tail_slope, lambda, L);
  }
  // A staircase on every lattice point is exact; otherwise compare against
  // the half-resolution rule (Richardson for the linear rule).
  const bool exact_stairs = t.interpolation == Interpolation::Staircase && g.size() > 1 &&
                            std::abs(g[1] - g[0] - t.step) <= 1e-9 * t.step;
  if (!exact_stairs && g.size() > 2) {
    const double coarse = body(2);
    const double fine = body(1);
    out.quad_error = t.interpolation == Interpolation::Linear ? std::abs(fine - coarse) / 3.0 : std::abs(fine - coarse);
  }
  // errors of neighbouring grid values are strongly correlated (shared
  // chains), so add them linearly: a conservative bound
  double stat = 0.0;
  for (std::size_t i = 0; i + 1 < g.size() && g[i] < y; ++i) {
    const double len = std::min(g[i + 1], y) - g[i];
    stat += std::exp(-lambda * g[i]) * detail::linear_piece(t.std_error[i], 0.0, lambda, len);
  }
  out.stat_error = stat;
  return out;
}

/// Sampler for mu_V^(lambda)(dx) proportional to exp(-lambda x) V(x) dx on
/// [0, inf): exact inverse-CDF over the table's pieces plus the analytic
/// linear (or staircase) tail.
class MuSampler {
 public:
  MuSampler(const RenewalTable& t, double lambda) : lambda_(lambda) {
    require(lambda > 0, ErrorKind::Domain, "mu sampler: lambda must be positive");
    if (t.provenance == Provenance::ExactSkipFree) {
      add({Kind::StairTail, 0.0, kInf, 1.0, 1.0, t.step});
    } else {
      for (std::size_t i = 0; i + 1 < t.grid.size(); ++i) {
        const double len = t.grid[i + 1] - t.grid[i];
        if (t.interpolation == Interpolation::Staircase) {
          add({Kind::Linear, t.grid[i], len, t.values[i], 0.0, 0.0});
        } else {
          add({Kind::Linear, t.grid[i], len, t.values[i], (t.values[i + 1] - t.values[i]) / len, 0.0});
        }
      }
      if (t.interpolation == Interpolation::Staircase) {
        add({Kind::StairTail, t.grid.back(), kInf, t.values.back(), t.tail_slope * t.step, t.step});
      } else {
        add({Kind::Linear, t.grid.back(), kInf, t.values.back(), t.tail_slope, 0.0});
      }
    }
    total_ = cum_.back();
  }

  double total_mass() const { return total_; }  // = L_V^(lambda)(inf)

  double cdf(double x) const {
    if (x <= 0) return 0.0;
    double acc = 0.0;
    for (const auto& p : pieces_) {
      if (x >= p.a + p.len) {
        acc += p.mass;
        continue;
      }
      if (x > p.a) {
        const double scale = std::exp(-lambda_ * p.a);
        acc += p.kind == Kind::Linear ? scale * detail::linear_piece(p.A, p.B, lambda_, x - p.a)
                                      : scale * detail::staircase_piece(p.A, p.B, p.h, lambda_, x - p.a);
      }
      break;
    }
    return acc / total_;
  }

  double operator()(Rng& rng) const {
    const double u = rng.uniform() * total_;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
    i = std::min(i, pieces_.size() - 1);
    const Piece& p = pieces_[i];
    if (p.kind == Kind::StairTail) return p.a + draw_stairs(p, rng);
    return p.a + draw_linear(p.A, p.B, p.len, rng);
  }

 private:
  enum class Kind { Linear, StairTail };
  struct Piece {
    Kind kind;
    double a, len, A, B, h;
    double mass = 0.0;
  };

  void add(Piece p) {
    const double scale = std::exp(-lambda_ * p.a);
    p.mass = p.kind == Kind::Linear ? scale * detail::linear_piece(p.A, p.B, lambda_, p.len)
                                    : scale * detail::staircase_piece(p.A, p.B, p.h, lambda_, p.len);
    pieces_.push_back(p);
    cum_.push_back((cum_.empty() ? 0.0 : cum_.back()) + p.mass);
  }

  // Exp(lambda) truncated to [0, L)
  double trunc_exp(double L, Rng& rng) const {
    if (std::isinf(L)) return rng.exponential() / lambda_;
    return -std::log1p(rng.uniform() * std::expm1(-lambda_ * L)) / lambda_;
  }

  // Gamma(2, lambda) truncated to [0, L)
  double trunc_gamma2(double L, Rng& rng) const {
    if (std::isinf(L)) return (rng.exponential() + rng.exponential()) / lambda_;
    auto G = [&](double t) { return 1.0 - std::exp(-lambda_ * t) * (1.0 + lambda_ * t); };
    const double target = rng.uniform() * G(L);
    double lo = 0.0, hi = L;
    for (int k = 0; k < 80; ++k) {
      const double mid = 0.5 * (lo + hi);
      (G(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  // density exp(-lambda t)(A + B t) on [0, L)
  double draw_linear(double A, double B, double L, Rng& rng) const {
    const double w1 = detail::linear_piece(A, 0.0, lambda_, L);
    const double w2 = detail::linear_piece(0.0, B, lambda_, L);
    if (B <= 0.0 || rng.uniform() * (w1 + w2) < w1) return trunc_exp(L, rng);
    return trunc_gamma2(L, rng);
  }

  // density exp(-lambda t)(A + B floor(t / h)) on [0, inf)
  double draw_stairs(const Piece& p, Rng& rng) const {
    const double q = std::exp(-lambda_ * p.h);
    const double w1 = p.A / (1.0 - q);
    const double w2 = p.B * q / ((1.0 - q) * (1.0 - q));
    auto geom = [&] { return std::floor(std::log(rng.uniform()) / std::log(q)); };  // failures before success
    const double m = (rng.uniform() * (w1 + w2) < w1) ? geom() : 1.0 + geom() + geom();
    return m * p.h + trunc_exp(p.h, rng);
  }

  double lambda_;
  std::vector<Piece> pieces_;
  std::vector<double> cum_;
  double total_ = 0.0;
};

}  // namespace expfun

#endif  // EXPFUN_RENEWAL_HPP
