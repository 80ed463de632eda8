#ifndef EXPFUN_CONDITIONED_HPP
#define EXPFUN_CONDITIONED_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "expfun/error.hpp"
#include "expfun/random.hpp"
#include "expfun/renewal.hpp"
#include "expfun/steps.hpp"
#include "expfun/walk.hpp"

namespace expfun {

/// Doob h-transform of the walk killed on leaving [0, inf):
///   sign = +1: S-up,   p(x, dy) = V(y)/V(x) P(x + X in dy)
///   sign = -1: S-down, p(x, dy) = Vhat(y)/Vhat(x) P(x - X in dy)
///
/// Atomic laws sample the exact transition row by inverse transform; the
/// row sum is checked against 1 (harmonicity). Continuous laws use
/// rejection from x + sign*X with the constant envelope V(x + b), b the
/// 1 - 1e-15 quantile of sign*X: V is non-decreasing, so V(x + sign*X) <=
/// V(x + b) except on an event of probability 1e-15.
class HTransform {
 public:
  HTransform(StepModel model, RenewalTable table, int sign)
      : model_(std::move(model)), table_(std::move(table)), sign_(sign >= 0 ? 1 : -1) {
    if (model_.is_atomic()) {
      for (const auto& a : atoms(model_)) {
        if (a.prob > 0) atoms_.push_back({sign_ * a.value, a.prob});
      }
    } else {
      b_ = upper_quantile(1e-15);
    }
  }

  const RenewalTable& table() const { return table_; }
  int sign() const { return sign_; }

  /// Transition probabilities from x over the atoms (atomic laws only).
  std::vector<Atom> row(double x) const {
    require(!atoms_.empty(), ErrorKind::Domain, "h-transform row requires an atomic step law");
    const double vx = table_(x);
    require(vx > 0, ErrorKind::Domain, "h-transform: state outside [0, inf)");
    std::vector<Atom> out;
    double sum = 0.0;
    for (const auto& a : atoms_) {
      const double w = table_(x + a.value) * a.prob / vx;
      if (w <= 0) continue;  // killed
      out.push_back({x + a.value, w});
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-10) {
      if (std::abs(sum - 1.0) > 1e-3) {
        fail(ErrorKind::NumericGuard, "h-transform row sums to " + std::to_string(sum) + " (renewal table too noisy)");
      }
      for (auto& a : out) a.prob /= sum;
    }
    return out;
  }

  double step(double x, Rng& rng) const {
    if (!atoms_.empty()) {
      // same weights as row(), without the allocation
      const double vx = table_(x);
      if (!(vx > 0)) fail(ErrorKind::Domain, "h-transform: state outside [0, inf)");
      constexpr std::size_t kInline = 16;
      double buf[kInline];
      std::vector<double> heap;
      double* w = buf;
      if (atoms_.size() > kInline) {
        heap.resize(atoms_.size());
        w = heap.data();
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        w[i] = table_(x + atoms_[i].value) * atoms_[i].prob;
        sum += w[i];
      }
      const double rel = sum / vx;
      if (std::abs(rel - 1.0) > 1e-3) {
        fail(ErrorKind::NumericGuard, "h-transform row sums to " + std::to_string(rel) + " (renewal table too noisy)");
      }
      // within 1e-10 the row is stochastic as is; beyond that it is renormalized
      double u = rng.uniform() * (std::abs(rel - 1.0) > 1e-10 ? sum : vx);
      double last = x;
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        if (w[i] <= 0) continue;
        last = x + atoms_[i].value;
        if (u < w[i]) return last;
        u -= w[i];
      }
      return last;
    }
    const double envelope = table_(x + std::max(b_, 0.0));
    for (std::size_t tries = 0; tries < 10000000; ++tries) {
      const double y = x + sign_ * sample_step(model_, rng);
      if (y < 0) continue;
      if (rng.uniform() * envelope < table_(y)) return y;
    }
    fail(ErrorKind::NumericGuard, "h-transform rejection sampler exceeded 1e7 proposals");
  }

 private:
  // smallest b with P(sign * X > b) <= p
  double upper_quantile(double p) const {
    auto tail = [&](double b) { return sign_ > 0 ? tail_prob(model_, b) : step_cdf(model_, -b); };
    double lo = -1.0, hi = 1.0;
    while (tail(lo) <= p) lo *= 2.0;
    while (tail(hi) > p) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-9 * std::max(1.0, std::abs(hi)); ++i) {
      const double mid = 0.5 * (lo + hi);
      (tail(mid) > p ? lo : hi) = mid;
    }
    return hi;
  }

  StepModel model_;
  RenewalTable table_;
  int sign_;
  std::vector<Atom> atoms_;
  double b_ = 0.0;
};

/// One transition of S-up from x.
inline double step_up(double x, const StepModel& model, const RenewalTable& v_table, Rng& rng) {
  require(v_table.flavor == RenewalFlavor::Descending, ErrorKind::Domain, "step_up needs a descending (V) table");
  return HTransform(model, v_table, +1).step(x, rng);
}

/// One transition of S-down from x.
inline double step_down(double x, const StepModel& model, const RenewalTable& vhat_table, Rng& rng) {
  require(vhat_table.flavor == RenewalFlavor::Ascending, ErrorKind::Domain, "step_down needs an ascending (V-hat) table");
  return HTransform(model, vhat_table, -1).step(x, rng);
}

struct IUpSample {
  double value = 0.0;      // sum_{k>=1} exp(-S_k) up to the stopping step
  bool truncated = false;  // horizon cap reached before the window rule fired
  std::size_t steps = 0;
  double last_window = 0.0;
  double prev_window = 0.0;
};

inline constexpr std::size_t kIUpWindow = 256;

/// I-infinity of the conditioned walk started at `start`: accumulate
/// exp(-S_k) and stop after the first complete 256-step window whose sum is
/// below eps times the running total, or at horizon_cap (truncated).
inline IUpSample simulate_I_conditioned(const HTransform& h, double start, double eps, std::size_t horizon_cap,
                                        Rng& rng) {
  require(eps > 0, ErrorKind::Domain, "simulate_I: eps must be positive");
  require(horizon_cap >= 1, ErrorKind::Domain, "simulate_I: horizon_cap must be >= 1");
  IUpSample out;
  double x = start;
  double window = 0.0;
  std::size_t in_window = 0;
  while (out.steps < horizon_cap) {
    x = h.step(x, rng);
    const double term = std::exp(-x);
    out.value += term;
    window += term;
    ++out.steps;
    if (++in_window == kIUpWindow) {
      out.prev_window = out.last_window;
      out.last_window = window;
      if (window < eps * out.value) return out;
      window = 0.0;
      in_window = 0;
    }
  }
  out.truncated = true;
  return out;
}

inline IUpSample simulate_I_up(const StepModel& model, const RenewalTable& v_table, double start, double eps,
                               std::size_t horizon_cap, Rng& rng) {
  return simulate_I_conditioned(HTransform(model, v_table, +1), start, eps, horizon_cap, rng);
}

inline IUpSample simulate_I_down(const StepModel& model, const RenewalTable& vhat_table, double start, double eps,
                                 std::size_t horizon_cap, Rng& rng) {
  return simulate_I_conditioned(HTransform(model, vhat_table, -1), start, eps, horizon_cap, rng);
}

/// Exact draws of (S_1..S_k) given tau_0^- > n by plain rejection.
/// Tracks the acceptance rate; once at least 1e6 proposals have been made
/// with acceptance below 1e-6 the guard trips.
class RejectionConditioner {
 public:
  RejectionConditioner(StepModel model, std::size_t k, std::size_t n) : model_(std::move(model)), k_(k), n_(n) {
    require(k >= 1 && n >= k, ErrorKind::Domain, "conditioned_by_rejection needs 1 <= k <= n");
  }

  std::vector<double> draw(Rng& rng) {
    return with_kernel(model_, [&](const auto& kernel) {
      for (;;) {
        ++attempts_;
        PathWalker w(kernel, 0.0, std::nullopt, false);
        std::vector<double> prefix;
        prefix.reserve(k_);
        bool alive = true;
        for (std::size_t i = 0; i < n_ && alive; ++i) {
          w.step(rng);
          if (w.s() < 0) alive = false;
          if (i < k_) prefix.push_back(w.s());
        }
        if (alive) {
          ++accepted_;
          return prefix;
        }
        if (attempts_ >= 1000000 && acceptance() < 1e-6) {
          fail(ErrorKind::NumericGuard, "conditioned_by_rejection: acceptance below 1e-6");
        }
      }
    });
  }

  std::size_t attempts() const { return attempts_; }
  std::size_t accepted() const { return accepted_; }
  double acceptance() const { return attempts_ ? static_cast<double>(accepted_) / static_cast<double>(attempts_) : 0.0; }

 private:
  StepModel model_;
  std::size_t k_, n_;
  std::size_t attempts_ = 0, accepted_ = 0;
};

inline std::vector<double> conditioned_by_rejection(const StepModel& model, std::size_t k, std::size_t n, Rng& rng) {
  RejectionConditioner c(model, k, n);
  return c.draw(rng);
}

}  // namespace expfun

#endif  // EXPFUN_CONDITIONED_HPP
