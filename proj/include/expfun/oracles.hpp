#ifndef EXPFUN_ORACLES_HPP
#define EXPFUN_ORACLES_HPP

// Exact small-instance oracles for lattice walks: forward DP over the
// lattice and exhaustive path enumeration. Both accumulate in long double.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "expfun/error.hpp"
#include "expfun/steps.hpp"

namespace expfun {

enum class DpBoundary {
  None,             // full law of S_k
  KillNegative,     // mass killed on entering (-inf, 0): row k sums to P(tau_0^- > k)
  KillNonPositive,  // mass killed on entering (-inf, 0]
};

struct DpRow {
  std::int64_t lo = 0;  // lattice index of p[0]
  std::vector<long double> p;

  long double at(std::int64_t idx) const {
    if (idx < lo || idx >= lo + static_cast<std::int64_t>(p.size())) return 0.0L;
    return p[static_cast<std::size_t>(idx - lo)];
  }
};

struct LatticeDp {
  double spacing = 1.0;
  // Per k = 0..n, over surviving mass:
  std::vector<long double> mass;  // total (P(tau > k) when killed)
  std::vector<long double> ge0;   // P(S_k >= 0, alive)
  std::vector<long double> gt0;   // P(S_k > 0, alive)
  std::vector<long double> eq0;   // P(S_k = 0, alive)
  std::vector<DpRow> rows;        // every row, only when requested
  DpRow last;
};

/// Forward DP for a Lattice (or lattice-valued TwoPoint) walk started at
/// lattice index `start_index`. Rows are trimmed to their support, so the
/// state count is at most (n * offset range + 1).
inline LatticeDp exact_lattice_dp(const StepModel& model, std::size_t n, DpBoundary boundary = DpBoundary::None,
                                  std::int64_t start_index = 0, bool keep_rows = false,
                                  std::size_t max_states = std::size_t{1} << 22) {
  const auto* lat = model.get_if<Lattice>();
  require(lat != nullptr, ErrorKind::Domain, "exact_lattice_dp requires a Lattice model");

  std::vector<std::pair<int, long double>> steps;
  int lo_off = 0, hi_off = 0;
  bool first = true;
  for (std::size_t i = 0; i < lat->offsets.size(); ++i) {
    if (lat->probs[i] <= 0) continue;
    steps.push_back({lat->offsets[i], static_cast<long double>(lat->probs[i])});
    lo_off = first ? lat->offsets[i] : std::min(lo_off, lat->offsets[i]);
    hi_off = first ? lat->offsets[i] : std::max(hi_off, lat->offsets[i]);
    first = false;
  }
  const auto width_bound = static_cast<double>(n) * (hi_off - lo_off) + 1.0;
  if (width_bound > static_cast<double>(max_states)) {
    fail(ErrorKind::NumericGuard, "exact_lattice_dp: state space exceeds the configured bound");
  }
  if (keep_rows && width_bound * static_cast<double>(n + 1) > 5e7) {
    fail(ErrorKind::NumericGuard, "exact_lattice_dp: keeping every row would exceed the memory bound");
  }

  const std::int64_t kill_below = boundary == DpBoundary::KillNegative ? 0 : 1;
  auto alive = [&](std::int64_t idx) { return boundary == DpBoundary::None || idx >= kill_below; };

  LatticeDp out;
  out.spacing = lat->spacing;
  DpRow row{start_index, {1.0L}};
  auto summarize = [&](const DpRow& r) {
    long double m = 0, ge = 0, gt = 0;
    for (std::size_t i = 0; i < r.p.size(); ++i) {
      const std::int64_t idx = r.lo + static_cast<std::int64_t>(i);
      m += r.p[i];
      if (idx >= 0) ge += r.p[i];
      if (idx > 0) gt += r.p[i];
    }
    out.mass.push_back(m);
    out.ge0.push_back(ge);
    out.gt0.push_back(gt);
    out.eq0.push_back(r.at(0));
    if (keep_rows) out.rows.push_back(r);
  };
  summarize(row);

  for (std::size_t k = 1; k <= n; ++k) {
    DpRow next;
    next.lo = row.lo + lo_off;
    next.p.assign(row.p.size() + static_cast<std::size_t>(hi_off - lo_off), 0.0L);
    for (std::size_t i = 0; i < row.p.size(); ++i) {
      const long double pi = row.p[i];
      if (pi == 0.0L) continue;
      for (const auto& [off, q] : steps) next.p[i + static_cast<std::size_t>(off - lo_off)] += pi * q;
    }
    if (boundary != DpBoundary::None) {
      for (std::size_t i = 0; i < next.p.size(); ++i) {
        if (!alive(next.lo + static_cast<std::int64_t>(i))) next.p[i] = 0.0L;
      }
    }
    // trim zero ends
    std::size_t a = 0, b = next.p.size();
    while (a < b && next.p[a] == 0.0L) ++a;
    while (b > a && next.p[b - 1] == 0.0L) --b;
    if (a > 0 || b < next.p.size()) {
      next.p = std::vector<long double>(next.p.begin() + static_cast<std::ptrdiff_t>(a),
                                        next.p.begin() + static_cast<std::ptrdiff_t>(b));
      next.lo += static_cast<std::int64_t>(a);
    }
    row = std::move(next);
    summarize(row);
  }
  out.last = std::move(row);
  return out;
}

/// sum_k exp(-S_k) over k = 1..n for a recorded path S_0..S_n.
inline long double exp_functional(std::span<const double> s) {
  long double sum = 0.0L;
  for (std::size_t k = 1; k < s.size(); ++k) sum += std::exp(-static_cast<long double>(s[k]));
  return sum;
}

/// Exact E[weight(S_0..S_n)] for an atomic step law, S_0 = start, by
/// visiting every path. Guarded at |support|^n <= 1e7 paths.
inline long double enumerate_paths(const StepModel& model, std::size_t n,
                                   const std::function<long double(std::span<const double>)>& weight,
                                   double start = 0.0) {
  require(model.is_atomic(), ErrorKind::Domain, "enumerate_paths requires an atomic step law");
  std::vector<Atom> support;
  for (const auto& a : atoms(model)) {
    if (a.prob > 0) support.push_back(a);
  }
  if (std::pow(static_cast<double>(support.size()), static_cast<double>(n)) > 1e7) {
    fail(ErrorKind::NumericGuard, "enumerate_paths: |support|^n exceeds 1e7");
  }
  std::vector<double> path(n + 1);
  path[0] = start;
  long double total = 0.0L;
  // Depth-first with an explicit digit counter; lattice positions are
  // accumulated from S_0 at each depth so rounding does not build up.
  std::vector<std::size_t> digit(n, 0);
  std::vector<long double> prob(n + 1, 1.0L);
  if (n == 0) return weight(path);
  std::size_t depth = 0;
  for (;;) {
    const Atom& a = support[digit[depth]];
    path[depth + 1] = path[depth] + a.value;
    prob[depth + 1] = prob[depth] * a.prob;
    if (depth + 1 == n) {
      total += prob[n] * weight(path);
      // advance the odometer
      while (++digit[depth] == support.size()) {
        digit[depth] = 0;
        if (depth == 0) return total;
        --depth;
      }
    } else {
      ++depth;
    }
  }
}

}  // namespace expfun

#endif  // EXPFUN_ORACLES_HPP
