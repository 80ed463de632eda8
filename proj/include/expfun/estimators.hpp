#ifndef EXPFUN_ESTIMATORS_HPP
#define EXPFUN_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "expfun/conditioned.hpp"
#include "expfun/error.hpp"
#include "expfun/estimate.hpp"
#include "expfun/log_sum_exp.hpp"
#include "expfun/renewal.hpp"
#include "expfun/steps.hpp"
#include "expfun/tilt.hpp"
#include "expfun/walk.hpp"

namespace expfun {

// Stream purposes. Every estimator draws from its own family of streams so
// that two estimators run with one master seed are independent.
namespace purpose {
inline constexpr std::uint64_t kEFPlain = 0x4546;
inline constexpr std::uint64_t kEFTilted = 0x4554;
inline constexpr std::uint64_t kTauPlain = 0x5450;
inline constexpr std::uint64_t kTauMix = 0x544d;
inline constexpr std::uint64_t kBigJump = 0x424a00;  // | k
inline constexpr std::uint64_t kBigJumpPlain = 0x425000;
inline constexpr std::uint64_t kC1 = 0xc1;
inline constexpr std::uint64_t kC3 = 0xc3;
inline constexpr std::uint64_t kDrift = 0xd0;
inline constexpr std::uint64_t kC4 = 0xc40000;  // | k << 8 | horizon index
inline constexpr std::uint64_t kC5 = 0xc50000;  // | k
}  // namespace purpose

namespace detail {

inline double log_f(const FSpec& f, double log_x) {
  return std::log(f.K0) - f.theta * log_add_exp(std::log(f.c0), log_x);
}

// P(X >= t); tail_prob is strict, which only matters for atoms
inline double tail_prob_ge(const StepModel& m, double t) {
  if (m.is_atomic()) {
    double s = 0.0;
    for (const auto& a : atoms(m)) {
      if (a.value >= t - 1e-12 * std::max(1.0, std::abs(t))) s += a.prob;
    }
    return s;
  }
  return tail_prob(m, t);
}

inline Estimate from_moments(const Moments& m, std::string method) { return m.estimate(std::move(method)); }

inline void check_nsim(std::size_t nsim) {
  require(nsim >= 2, ErrorKind::Config, "nsim must be at least 2");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// E[F(I_n)]

/// Plain Monte Carlo of E[F(I_n)] at each horizon; one path of length
/// max(horizons) serves every rung.
inline std::vector<Estimate> estimate_EF_plain_ladder(const StepModel& model, const FSpec& f,
                                                      const std::vector<std::size_t>& horizons, std::size_t nsim,
                                                      const McOptions& opt) {
  detail::check_nsim(nsim);
  require(!horizons.empty(), ErrorKind::Config, "empty horizon ladder");
  for (auto n : horizons) require(n >= 1, ErrorKind::Domain, "horizon must be >= 1");
  auto sorted = horizons;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n_max = sorted.back();
  auto parts = with_kernel(model, [&](const auto& kernel) {
    return run_batches(nsim, opt, purpose::kEFPlain, [&](std::size_t, std::size_t count, Rng& rng) {
      std::vector<Moments> m(sorted.size());
      for (std::size_t i = 0; i < count; ++i) {
        PathWalker w(kernel);
        std::size_t r = 0;
        for (std::size_t k = 1; k <= n_max; ++k) {
          w.step(rng);
          while (r < sorted.size() && sorted[r] == k) m[r++].push(f.from_log(w.log_i()));
        }
      }
      return m;
    });
  });
  std::vector<Moments> all(sorted.size());
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < all.size(); ++r) all[r].merge(p[r]);
  }
  std::vector<Estimate> out;
  for (auto n : horizons) {
    const auto r = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), n) - sorted.begin());
    out.push_back(detail::from_moments(all[r], "plain"));
  }
  return out;
}

inline Estimate estimate_EF_plain(const StepModel& model, const FSpec& f, std::size_t n, std::size_t nsim,
                                  const McOptions& opt) {
  return estimate_EF_plain_ladder(model, f, {n}, nsim, opt).front();
}

struct TiltedLadder {
  double lambda = 0.0;
  double log_rho = 0.0;               // log L_X(lambda)
  std::vector<std::size_t> horizons;
  std::vector<Estimate> scaled;       // rho^-n E[F(I_n)] = E^(lambda)[exp(-lambda S_n) F(I_n)]

  /// E[F(I_n)] at rung r: linear when rho^n is representable, log-domain otherwise.
  Estimate full(std::size_t r) const {
    const auto& e = scaled[r];
    const double shift = static_cast<double>(horizons[r]) * log_rho;
    const double log_v = shift + std::log(e.value);
    if (log_v > -700.0 && shift > -700.0) {
      const double s = std::exp(shift);
      return {e.value * s, e.std_error * s, e.n_samples, e.method, false};
    }
    return {log_v, e.std_error / e.value, e.n_samples, e.method, true};
  }
};

/// Change of measure: E[F(I_n)] = rho^n E^(lambda)[exp(-lambda S_n) F(I_n)].
/// The weight is formed in log space, so nothing overflows for large n.
inline TiltedLadder estimate_EF_tilted_ladder(const StepModel& model, const FSpec& f,
                                              const std::vector<std::size_t>& horizons, std::size_t nsim,
                                              const McOptions& opt, std::optional<double> lambda = std::nullopt) {
  detail::check_nsim(nsim);
  require(!horizons.empty(), ErrorKind::Config, "empty horizon ladder");
  TiltedLadder out;
  out.lambda = lambda ? *lambda : find_lambda(model, f.theta).lambda_star;
  out.horizons = horizons;
  if (out.lambda == 0.0) {
    out.scaled = estimate_EF_plain_ladder(model, f, horizons, nsim, opt);
    return out;
  }
  out.log_rho = std::log(laplace(model, out.lambda));
  require(std::isfinite(out.log_rho), ErrorKind::Domain, "tilt parameter outside the Laplace domain");
  const StepModel tilted = esscher(model, out.lambda);
  auto sorted = horizons;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n_max = sorted.back();
  const double lam = out.lambda;
  auto parts = with_kernel(tilted, [&](const auto& kernel) {
    return run_batches(nsim, opt, purpose::kEFTilted, [&](std::size_t, std::size_t count, Rng& rng) {
      std::vector<Moments> m(sorted.size());
      for (std::size_t i = 0; i < count; ++i) {
        PathWalker w(kernel);
        std::size_t r = 0;
        for (std::size_t k = 1; k <= n_max; ++k) {
          w.step(rng);
          while (r < sorted.size() && sorted[r] == k) {
            m[r++].push(std::exp(-lam * w.s() + detail::log_f(f, w.log_i())));
          }
        }
      }
      return m;
    });
  });
  std::vector<Moments> all(sorted.size());
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < all.size(); ++r) all[r].merge(p[r]);
  }
  for (auto n : horizons) {
    const auto r = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), n) - sorted.begin());
    out.scaled.push_back(detail::from_moments(all[r], "tilted"));
  }
  return out;
}

inline Estimate estimate_EF_tilted(const StepModel& model, const FSpec& f, std::size_t n, std::size_t nsim,
                                   const McOptions& opt, std::optional<double> lambda = std::nullopt) {
  const auto l = estimate_EF_tilted_ladder(model, f, {n}, nsim, opt, lambda);
  if (l.lambda == 0.0) return l.scaled.front();
  return l.full(0);
}

// ---------------------------------------------------------------------------
// P(tau_0^- > n)

enum class TauMethod { Auto, Plain, BigJumpMixture };

struct BigJumpMixture {
  double p_plain = 0.2;            // defensive weight on the unmodified law
  std::size_t window = 16;         // candidate jump times 1..window
  double threshold_fraction = 0.5; // forced jump X_k >= fraction * a * n
};

/// P_x(tau_0^- > n). Plain: Bernoulli mean. BigJumpMixture (negative drift,
/// heavy tail): sample from the mixture p0 * P + (1 - p0)/K sum_k P(. | X_k >= t)
/// and weight by dP/dQ = 1 / (p0 + (1 - p0)/K * #{k <= K: X_k >= t} / P(X >= t)),
/// which is unbiased for any K and bounded by 1/p0.
inline Estimate estimate_tau_tail(const StepModel& model, std::size_t n, std::size_t nsim, const McOptions& opt,
                                  TauMethod method = TauMethod::Auto, double start = 0.0,
                                  BigJumpMixture mix = {}) {
  require(start >= 0, ErrorKind::Domain, "tau tail: start must be >= 0");
  if (n == 0) return {1.0, 0.0, nsim, "exact", false};
  detail::check_nsim(nsim);
  const double mean = step_mean(model);
  if (method == TauMethod::Auto) {
    method = model.heavy_tailed() && mean < 0 ? TauMethod::BigJumpMixture : TauMethod::Plain;
  }
  if (method == TauMethod::Plain) {
    const auto m = with_kernel(model, [&](const auto& kernel) {
      return sample_moments(nsim, opt, purpose::kTauPlain, [&](Rng& rng) {
        return first_passage_below_zero(kernel, start, n, rng) ? 0.0 : 1.0;
      });
    });
    return m.estimate("plain");
  }
  require(mean < 0, ErrorKind::Domain, "big-jump mixture needs a negative mean");
  require(mix.p_plain > 0 && mix.p_plain < 1, ErrorKind::Config, "mixture weight must lie in (0, 1)");
  const double t = mix.threshold_fraction * (-mean) * static_cast<double>(n);
  const double q = detail::tail_prob_ge(model, t);
  require(q > 0, ErrorKind::Domain, "big-jump mixture: P(X >= t) = 0");
  const std::size_t K = std::max<std::size_t>(1, std::min(n, mix.window));
  const double p0 = mix.p_plain;
  const auto m = with_kernel(model, [&](const auto& kernel) {
    return sample_moments(nsim, opt, purpose::kTauMix, [&](Rng& rng) {
      std::size_t forced = 0;
      if (rng.uniform() >= p0) forced = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(K));
      typename std::decay_t<decltype(kernel)>::Position pos{};
      std::size_t big = 0;
      for (std::size_t k = 1; k <= n; ++k) {
        const auto dx = k == forced ? kernel.draw_tail(t, rng) : kernel.draw(rng);
        if (k <= K && kernel.value(dx) >= t) ++big;
        pos += dx;
        if (start + kernel.value(pos) < 0) return 0.0;
      }
      return 1.0 / (p0 + (1.0 - p0) / static_cast<double>(K) * static_cast<double>(big) / q);
    });
  });
  return m.estimate("bigjump-mixture");
}

// ---------------------------------------------------------------------------
// Big-jump numerator E[F(I_n); X_k >= a n]

/// E[F(I_n); X_k >= a n] with X_k drawn from its conditional tail and the
/// result scaled by P(X >= a n); a = -E[X].
inline Estimate estimate_bigjump_numerator(const StepModel& model, const FSpec& f, std::size_t n, std::size_t k,
                                           std::size_t nsim, const McOptions& opt) {
  detail::check_nsim(nsim);
  const double a = -step_mean(model);
  require(a > 0, ErrorKind::Domain, "big-jump estimator needs a negative mean");
  if (k == 0 || k > n) return {0.0, 0.0, nsim, "bigjump", false};
  const double t = a * static_cast<double>(n);
  const double q = detail::tail_prob_ge(model, t);
  require(q > 0, ErrorKind::Domain, "big-jump estimator: P(X >= a n) = 0");
  const auto m = with_kernel(model, [&](const auto& kernel) {
    return sample_moments(nsim, opt, purpose::kBigJump | k, [&](Rng& rng) {
      PathWalker w(kernel);
      for (std::size_t j = 1; j <= n; ++j) {
        if (j == k) {
          w.step_tail(t, rng);
        } else {
          w.step(rng);
        }
      }
      return f.from_log(w.log_i());
    });
  });
  auto e = m.estimate("bigjump");
  e.value *= q;
  e.std_error *= q;
  return e;
}

/// Same estimand by plain sampling of the event (feasible for small n only).
inline Estimate estimate_bigjump_numerator_plain(const StepModel& model, const FSpec& f, std::size_t n, std::size_t k,
                                                 std::size_t nsim, const McOptions& opt) {
  detail::check_nsim(nsim);
  const double t = -step_mean(model) * static_cast<double>(n);
  const auto m = with_kernel(model, [&](const auto& kernel) {
    return sample_moments(nsim, opt, purpose::kBigJumpPlain | k, [&](Rng& rng) {
      PathWalker w(kernel);
      bool hit = false;
      for (std::size_t j = 1; j <= n; ++j) {
        const auto dx = kernel.draw(rng);
        if (j == k && kernel.value(dx) >= t) hit = true;
        w.advance(dx);
      }
      return hit ? f.from_log(w.log_i()) : 0.0;
    });
  });
  return m.estimate("plain-event");
}

// ---------------------------------------------------------------------------
// Series constants C_{F,1}, C_{F,3}

struct SeriesOptions {
  std::size_t k_max = 4095;     // rounded up to 2^m - 1
  double eps_up = 1e-6;         // window rule for I-up
  std::size_t up_cap = 1 << 22;
  double rel_stop = 1e-3;       // block upper CI below rel_stop * running sum
  double roulette = 1e-3;       // Russian roulette on the I-up draw when F(I_k) < roulette * F(0)
};

struct SeriesResult {
  Estimate value;
  std::vector<Estimate> terms;   // k = 0..k_max
  std::vector<Estimate> blocks;  // block 0 = {0}, block j = [2^(j-1), 2^j)
  std::size_t stop_block = 0;    // last block summed
  bool stopped_by_rule = false;
  double tail = 0.0;             // extrapolated sum beyond stop_block
  double tail_error = 0.0;
  double tail_ratio = 0.0;       // fitted block-to-block decay
  std::size_t truncated_up = 0;  // I-up draws cut at the horizon cap
};

namespace detail {

struct SeriesAccumulator {
  std::vector<double> sum, sumsq;          // per term
  std::vector<Moments> block, cumulative;  // per block / prefix of blocks
  std::size_t truncated = 0;
};

inline std::size_t block_of(std::size_t k) {
  std::size_t j = 0;
  while (k) {
    k >>= 1;
    ++j;
  }
  return j;
}

/// Tail beyond block J from the geometric decay of the last (up to) four
/// block sums. Power-law terms c k^-s give block sums decaying by 2^(1-s).
inline void extrapolate_tail(SeriesResult& r) {
  const std::size_t J = r.stop_block;
  if (J < 3) return;
  std::vector<double> xs, ys;
  for (std::size_t j = (J >= 4 ? J - 3 : 1); j <= J; ++j) {
    if (r.blocks[j].value <= 0) return;  // nothing left to extrapolate
    xs.push_back(static_cast<double>(j));
    ys.push_back(std::log(r.blocks[j].value));
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double ratio = std::exp(sxy / sxx);
  r.tail_ratio = ratio;
  if (ratio >= 1.0) fail(ErrorKind::NumericGuard, "series terms are not decaying by k_max");
  const double last = r.blocks[J].value;
  r.tail = last * ratio / (1.0 - ratio);
  const double alt_ratio = std::min(r.blocks[J].value / r.blocks[J - 1].value, 0.999);
  const double alt = last * alt_ratio / (1.0 - alt_ratio);
  r.tail_error = std::hypot(std::abs(r.tail - alt), r.tail * r.blocks[J].std_error / last);
}

/// sum_{k>=0} E[F(I_k + exp(-S_k) I-up); sigma_k^- = k] with one path of
/// length k_max per sample and an independent I-up draw at each strict
/// minimum. Deep minima contribute at most b = F(I_k); below d = roulette *
/// F(0) the draw is made with probability b/d and weighted by d/b, which keeps
/// the estimator unbiased while skipping most of the I-up work.
template <class Kernel>
SeriesResult series_engine(const Kernel& kernel, const FSpec& f, const HTransform& up, const SeriesOptions& so,
                           std::size_t nsim, const McOptions& opt, std::uint64_t purpose_id) {
  check_nsim(nsim);
  std::size_t m = 1;
  while ((std::size_t{1} << m) - 1 < std::max<std::size_t>(so.k_max, 1)) ++m;
  const std::size_t K = (std::size_t{1} << m) - 1;
  const std::size_t nblocks = m + 1;
  const double cutoff = so.roulette * f.bound();

  auto parts = run_batches(nsim, opt, purpose_id, [&](std::size_t, std::size_t count, Rng& rng) {
    SeriesAccumulator acc;
    acc.sum.assign(K + 1, 0.0);
    acc.sumsq.assign(K + 1, 0.0);
    acc.block.resize(nblocks);
    acc.cumulative.resize(nblocks);
    std::vector<double> bsum(nblocks);
    for (std::size_t i = 0; i < count; ++i) {
      std::fill(bsum.begin(), bsum.end(), 0.0);
      auto add = [&](std::size_t k, double v) {
        acc.sum[k] += v;
        acc.sumsq[k] += v * v;
        bsum[block_of(k)] += v;
      };
      auto draw_up = [&]() {
        const auto s = simulate_I_conditioned(up, 0.0, so.eps_up, so.up_cap, rng);
        if (s.truncated) ++acc.truncated;
        return s.value;
      };
      add(0, f(draw_up()));
      PathWalker w(kernel);
      for (std::size_t k = 1; k <= K; ++k) {
        w.step(rng);
        if (!w.at_strict_minimum()) continue;
        const double li = w.log_i();
        const double bound = f.from_log(li);
        double weight = 1.0;
        if (bound < cutoff) {
          if (rng.uniform() * cutoff >= bound) continue;
          weight = cutoff / bound;
        }
        add(k, weight * f.from_log(log_add_exp(li, -w.s() + std::log(draw_up()))));
      }
      double c = 0.0;
      for (std::size_t j = 0; j < nblocks; ++j) {
        acc.block[j].push(bsum[j]);
        c += bsum[j];
        acc.cumulative[j].push(c);
      }
    }
    return acc;
  });

  SeriesAccumulator all;
  all.sum.assign(K + 1, 0.0);
  all.sumsq.assign(K + 1, 0.0);
  all.block.resize(nblocks);
  all.cumulative.resize(nblocks);
  for (const auto& p : parts) {
    for (std::size_t k = 0; k <= K; ++k) {
      all.sum[k] += p.sum[k];
      all.sumsq[k] += p.sumsq[k];
    }
    for (std::size_t j = 0; j < nblocks; ++j) {
      all.block[j].merge(p.block[j]);
      all.cumulative[j].merge(p.cumulative[j]);
    }
    all.truncated += p.truncated;
  }

  SeriesResult r;
  r.truncated_up = all.truncated;
  const double N = static_cast<double>(nsim);
  for (std::size_t k = 0; k <= K; ++k) {
    const double mean = all.sum[k] / N;
    const double var = std::max(0.0, (all.sumsq[k] - N * mean * mean) / (N - 1.0));
    r.terms.push_back({mean, std::sqrt(var / N), nsim, "series-term", false});
  }
  for (const auto& b : all.block) r.blocks.push_back(b.estimate("series-block"));
  r.stop_block = nblocks - 1;
  for (std::size_t j = 1; j < nblocks; ++j) {
    const double running = all.cumulative[j].mean();
    if (r.blocks[j].hi95() < so.rel_stop * running) {
      r.stop_block = j;
      r.stopped_by_rule = true;
      break;
    }
  }
  extrapolate_tail(r);
  const auto& cum = all.cumulative[r.stop_block];
  r.value = {cum.mean() + r.tail, std::hypot(cum.std_error(), r.tail_error), nsim, "series", false};
  return r;
}

}  // namespace detail

/// C_{F,1} = sum_k E[F(I_k + exp(-S_k) I-up_inf); sigma_k^- = k] (oscillating, Lambda = 0).
inline SeriesResult estimate_C1(const StepModel& model, const FSpec& f, const RenewalTable& v_table,
                                const SeriesOptions& so, std::size_t nsim, const McOptions& opt) {
  require(v_table.flavor == RenewalFlavor::Descending, ErrorKind::Domain, "C1 needs the descending renewal table");
  const HTransform up(model, v_table, +1);
  return with_kernel(model, [&](const auto& kernel) {
    return detail::series_engine(kernel, f, up, so, nsim, opt, purpose::kC1);
  });
}

/// Dual tilted walk used by C_{F,3}: -X under P^(lambda).
inline StepModel dual_tilted(const StepModel& model, double lambda) { return negated(esscher(model, lambda)); }

/// C_{F,3}: the C1 engine on the negated tilted walk with F(x) = (1 + x)^-lambda.
/// Without a table, V of the dual walk comes from renewal_table_for.
inline SeriesResult estimate_C3(const StepModel& model, double lambda, const SeriesOptions& so, std::size_t nsim,
                                const McOptions& opt, std::optional<RenewalTable> v_dual = std::nullopt) {
  require(lambda > 0, ErrorKind::Domain, "C3 needs lambda > 0");
  const StepModel dual = dual_tilted(model, lambda);
  if (!v_dual) v_dual = renewal_table_for(dual, RenewalFlavor::Descending, 64.0, 20000, 1 << 20, opt);
  const HTransform up(dual, *v_dual, +1);
  const FSpec power{1.0, lambda, 1.0};
  return with_kernel(dual, [&](const auto& kernel) {
    return detail::series_engine(kernel, power, up, so, nsim, opt, purpose::kC3);
  });
}

// ---------------------------------------------------------------------------
// Drift constant K0 E^(Lambda)[(1 + I-hat_inf)^-theta]

struct IHatSample {
  double value = 0.0;
  bool truncated = false;
};

/// I-hat_inf = sum_{k>=1} exp(S_k) for a walk drifting to -inf, with the
/// 256-step window rule of simulate_I_conditioned.
template <class Kernel>
IHatSample sample_I_hat(const Kernel& kernel, double eps, std::size_t cap, Rng& rng) {
  IHatSample out;
  typename Kernel::Position pos{};
  double window = 0.0;
  std::size_t in_window = 0;
  for (std::size_t k = 1; k <= cap; ++k) {
    pos += kernel.draw(rng);
    const double term = std::exp(kernel.value(pos));
    out.value += term;
    window += term;
    if (++in_window == kIUpWindow) {
      if (window < eps * out.value) return out;
      window = 0.0;
      in_window = 0;
    }
  }
  out.truncated = true;
  return out;
}

struct DriftConstant {
  Estimate value;
  double lambda = 0.0;
  std::size_t truncated = 0;
};

inline DriftConstant estimate_drift_constant(const StepModel& model, const FSpec& f, std::size_t nsim,
                                             const McOptions& opt, double eps = 1e-9,
                                             std::size_t horizon_cap = 1 << 20) {
  detail::check_nsim(nsim);
  const auto rep = find_lambda(model, f.theta);
  require(rep.lambda_star > 0 && rep.tilted_mean < 0, ErrorKind::Domain,
          "drift constant needs lambda = theta_F > 0 and a tilted walk drifting down");
  DriftConstant out;
  out.lambda = rep.lambda_star;
  auto parts = with_kernel(rep.tilted_model, [&](const auto& kernel) {
    return run_batches(nsim, opt, purpose::kDrift, [&](std::size_t, std::size_t count, Rng& rng) {
      std::pair<Moments, std::size_t> r{};
      for (std::size_t i = 0; i < count; ++i) {
        const auto s = sample_I_hat(kernel, eps, horizon_cap, rng);
        r.second += s.truncated;
        r.first.push(f.K0 * std::pow(1.0 + s.value, -f.theta));
      }
      return r;
    });
  });
  Moments all;
  for (const auto& p : parts) {
    all.merge(p.first);
    out.truncated += p.second;
  }
  out.value = all.estimate("drift-constant");
  return out;
}

// ---------------------------------------------------------------------------
// C_{F,4}: Lambda = 0, negative drift, regularly varying tail

struct C4Result {
  Estimate value;                             // final-horizon sum over k
  std::vector<std::size_t> horizons;
  std::vector<std::vector<Estimate>> trace;   // [k - 1][horizon index]
  int direction = -1;                         // -1 non-increasing, +1 non-decreasing (from k = 1)
  bool monotone = true;
  std::vector<std::string> warnings;
};

/// Per k and horizon n: E[F(I_{k-1} + exp(-S_{k-1} - X)(1 + I~_{n-k})) | X >= a n]
/// with the prefix, the jump and the independent copy drawn separately.
inline C4Result estimate_C4(const StepModel& model, const FSpec& f, std::size_t k_max,
                            const std::vector<std::size_t>& horizons, std::size_t nsim, const McOptions& opt) {
  detail::check_nsim(nsim);
  const double a = -step_mean(model);
  require(a > 0, ErrorKind::Domain, "C4 needs a negative mean");
  require(k_max >= 1 && k_max < 256, ErrorKind::Config, "C4: k_max must lie in [1, 255]");
  require(!horizons.empty() && horizons.size() < 256, ErrorKind::Config, "C4: bad horizon ladder");
  for (auto n : horizons) require(n >= k_max, ErrorKind::Config, "C4: every horizon must be >= k_max");
  C4Result out;
  out.horizons = horizons;
  with_kernel(model, [&](const auto& kernel) {
    for (std::size_t k = 1; k <= k_max; ++k) {
      std::vector<Estimate> row;
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        const std::size_t n = horizons[h];
        const double t = a * static_cast<double>(n);
        const auto m = sample_moments(nsim, opt, purpose::kC4 | (k << 8) | h, [&](Rng& rng) {
          PathWalker pre(kernel);
          for (std::size_t j = 1; j < k; ++j) pre.step(rng);
          const double x = kernel.value(kernel.draw_tail(t, rng));
          PathWalker rest(kernel);
          for (std::size_t j = 0; j < n - k; ++j) rest.step(rng);
          const double log_tail = -pre.s() - x + log_add_exp(0.0, rest.log_i());
          return f.from_log(log_add_exp(pre.log_i(), log_tail));
        });
        row.push_back(m.estimate("c4-term"));
      }
      out.trace.push_back(std::move(row));
    }
  });
  const auto& t1 = out.trace.front();
  out.direction = t1.back().value > t1.front().value ? +1 : -1;
  double v = 0.0, var = 0.0;
  for (std::size_t k = 0; k < out.trace.size(); ++k) {
    const auto& row = out.trace[k];
    for (std::size_t h = 1; h < row.size(); ++h) {
      const double d = (row[h].value - row[h - 1].value) * out.direction;
      if (d < -3.0 * combined_se(row[h], row[h - 1])) {
        out.monotone = false;
        out.warnings.push_back("k=" + std::to_string(k + 1) + ": trace not monotone between n=" +
                               std::to_string(horizons[h - 1]) + " and n=" + std::to_string(horizons[h]));
      }
    }
    v += row.back().value;
    var += row.back().std_error * row.back().std_error;
  }
  out.value = {v, std::sqrt(var), nsim, "c4", false};
  return out;
}

// ---------------------------------------------------------------------------
// C_{F,5}: 0 < Lambda < theta_F, negative tilted drift, heavy tail

struct ZGrid {
  double z_max = 0.0;      // 0: choose from the envelope
  std::size_t points = 801;
};

struct C5Result {
  Estimate value;
  std::vector<Estimate> terms;  // k = 1..k_stop
  std::vector<double> quad_error;
  std::vector<double> edge_fraction;  // trapezoid mass in the two end cells, relative
  double z_max = 0.0;
  bool stopped_by_rule = false;
  bool z_converged = true;
  double tail = 0.0;
};

/// C5(k) = int E^(Lambda)[exp(-Lambda(S_k + z)) F(I_k + exp(-S_k - z)(1 + I-hat~_inf))] dz,
/// trapezoid in z with common random numbers across the grid.
inline C5Result estimate_C5(const StepModel& model, const FSpec& f, double lambda, std::size_t k_max, ZGrid grid,
                            std::size_t nsim, const McOptions& opt, double rel_stop = 1e-3) {
  detail::check_nsim(nsim);
  require(lambda > 0 && lambda < f.theta, ErrorKind::Domain, "C5 needs 0 < Lambda < theta_F");
  require(grid.points >= 5 && grid.points % 2 == 1, ErrorKind::Config, "C5: z grid needs an odd count >= 5");
  const StepModel tilted = esscher(model, lambda);
  const double a = -step_mean(tilted);
  require(a > 0, ErrorKind::Domain, "C5 needs the tilted walk to drift down");
  C5Result out;
  // tails: exp(-Lambda z) on the right, exp((theta - Lambda) z) on the left,
  // both shifted by the typical S_k ~ -a k
  const double decay = std::min(lambda, f.theta - lambda);
  out.z_max = grid.z_max > 0 ? grid.z_max : a * static_cast<double>(k_max) + std::log(1e6) / decay + 10.0;
  const std::size_t P = grid.points;
  const double dz = 2.0 * out.z_max / static_cast<double>(P - 1);

  double running = 0.0;
  double var = 0.0;
  with_kernel(tilted, [&](const auto& kernel) {
    for (std::size_t k = 1; k <= k_max; ++k) {
      struct Acc {
        Moments fine, coarse;
        double edge = 0.0, mass = 0.0;
      };
      auto parts = run_batches(nsim, opt, purpose::kC5 | k, [&](std::size_t, std::size_t count, Rng& rng) {
        Acc acc;
        for (std::size_t i = 0; i < count; ++i) {
          PathWalker w(kernel);
          for (std::size_t j = 0; j < k; ++j) w.step(rng);
          const auto hat = sample_I_hat(kernel, 1e-9, 1 << 20, rng);
          const double log_jump = std::log1p(hat.value);
          double fine = 0.0, coarse = 0.0, edge = 0.0;
          for (std::size_t p = 0; p < P; ++p) {
            const double z = -out.z_max + dz * static_cast<double>(p);
            const double u = w.s() + z;
            const double g = std::exp(-lambda * u + detail::log_f(f, log_add_exp(w.log_i(), -u + log_jump)));
            const double wt = (p == 0 || p == P - 1) ? 0.5 : 1.0;
            fine += wt * g;
            if (p % 2 == 0) coarse += ((p == 0 || p == P - 1) ? 0.5 : 1.0) * g;
            if (p == 0 || p == P - 1) edge += 0.5 * g;
          }
          acc.fine.push(fine * dz);
          acc.coarse.push(coarse * 2.0 * dz);
          acc.edge += edge * dz;
          acc.mass += fine * dz;
        }
        return acc;
      });
      Acc all;
      for (const auto& p : parts) {
        all.fine.merge(p.fine);
        all.coarse.merge(p.coarse);
        all.edge += p.edge;
        all.mass += p.mass;
      }
      const auto term = all.fine.estimate("c5-term");
      out.terms.push_back(term);
      out.quad_error.push_back(std::abs(all.fine.mean() - all.coarse.mean()) / 3.0);
      out.edge_fraction.push_back(all.mass > 0 ? all.edge / all.mass : 0.0);
      if (out.edge_fraction.back() > 1e-3) out.z_converged = false;
      running += term.value;
      var += term.std_error * term.std_error;
      if (term.hi95() < rel_stop * running) {
        out.stopped_by_rule = true;
        break;
      }
    }
  });
  if (!out.stopped_by_rule && out.terms.size() >= 4) {
    // geometric tail from the last four terms
    const std::size_t n = out.terms.size();
    const double r = std::pow(out.terms[n - 1].value / out.terms[n - 4].value, 1.0 / 3.0);
    if (r > 0 && r < 1) out.tail = out.terms[n - 1].value * r / (1.0 - r);
  }
  out.value = {running + out.tail, std::sqrt(var), nsim, "c5", false};
  return out;
}

}  // namespace expfun

#endif  // EXPFUN_ESTIMATORS_HPP
