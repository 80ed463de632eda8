#ifndef EXPFUN_WALK_HPP
#define EXPFUN_WALK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <type_traits>
#include <vector>

#include "expfun/error.hpp"
#include "expfun/log_sum_exp.hpp"
#include "expfun/random.hpp"
#include "expfun/steps.hpp"

namespace expfun {

// ---------------------------------------------------------------------------
// Step kernels. A kernel draws increments in its own position type: lattice
// walks move on integer multiples of the spacing (exact ties and exact
// first-argmin bookkeeping); other laws move on doubles.

class LatticeKernel {
 public:
  using Position = std::int64_t;

  explicit LatticeKernel(const Lattice& l) : spacing_(l.spacing), offsets_(l.offsets) {
    double c = 0.0;
    for (double p : l.probs) {
      c += p;
      cum_.push_back(c);
    }
    cum_.back() = 2.0;  // absorb rounding in the last bucket
    const auto n = static_cast<std::size_t>(std::min(std::ceil(746.0 / spacing_) + 1.0, 1048576.0));
    exp_table_.resize(n);
    for (std::size_t g = 0; g < n; ++g) exp_table_[g] = std::exp(-spacing_ * static_cast<double>(g));
    for (std::size_t i = 0; i < l.probs.size(); ++i) {
      if (l.probs[i] > 0) atoms_.push_back({l.offsets[i], l.probs[i]});
    }
  }

  Position draw(Rng& rng) const {
    const double u = rng.uniform();
    std::size_t i = 0;
    while (u >= cum_[i]) ++i;
    return offsets_[i];
  }

  Position draw_tail(double x, Rng& rng) const {
    double mass = 0.0;
    for (const auto& a : atoms_) {
      if (spacing_ * a.offset >= x) mass += a.prob;
    }
    require(mass > 0, ErrorKind::Domain, "conditional tail: P(X >= x) = 0");
    double u = rng.uniform() * mass;
    Position last = 0;
    for (const auto& a : atoms_) {
      if (spacing_ * a.offset < x) continue;
      last = a.offset;
      if (u < a.prob) return a.offset;
      u -= a.prob;
    }
    return last;
  }

  double value(Position p) const { return spacing_ * static_cast<double>(p); }

  // exp(-(value of a non-negative gap))
  double exp_neg(Position gap) const {
    if (static_cast<std::size_t>(gap) < exp_table_.size()) return exp_table_[static_cast<std::size_t>(gap)];
    return std::exp(-spacing_ * static_cast<double>(gap));
  }

  double spacing() const { return spacing_; }

 private:
  struct OffsetAtom {
    int offset;
    double prob;
  };
  double spacing_;
  std::vector<int> offsets_;
  std::vector<double> cum_;
  std::vector<double> exp_table_;
  std::vector<OffsetAtom> atoms_;
};

template <class Law>
class ContinuousKernel {
 public:
  using Position = double;

  ContinuousKernel(const Law& law, const StepModel& model) : law_(law), model_(model) {}

  Position draw(Rng& rng) const {
    if constexpr (std::is_same_v<Law, Gaussian>) {
      return law_.mu + law_.sigma * rng.normal();
    } else if constexpr (std::is_same_v<Law, TwoPoint>) {
      return rng.uniform() < law_.p_up ? law_.up : law_.down;
    } else {
      return law_.shift + law_.scale * (std::pow(rng.uniform(), -1.0 / law_.beta) - 1.0);
    }
  }

  Position draw_tail(double x, Rng& rng) const { return sample_step_conditional_tail(model_, x, rng); }

  double value(Position p) const { return p; }
  double exp_neg(Position gap) const { return std::exp(-gap); }

 private:
  Law law_;
  StepModel model_;
};

/// Call f(kernel) with the concrete kernel for the model's law.
template <class F>
decltype(auto) with_kernel(const StepModel& model, F&& f) {
  if (const auto* l = model.get_if<Lattice>()) return f(LatticeKernel(*l));
  if (const auto* g = model.get_if<Gaussian>()) return f(ContinuousKernel<Gaussian>(*g, model));
  if (const auto* t = model.get_if<TwoPoint>()) return f(ContinuousKernel<TwoPoint>(*t, model));
  return f(ContinuousKernel<ShiftedPareto>(*model.get_if<ShiftedPareto>(), model));
}

// ---------------------------------------------------------------------------

/// Path functionals of one trajectory S_0 = start, S_k = start + X_1 + ... + X_k.
struct PathSample {
  std::size_t n = 0;
  double start = 0.0;
  double s_final = 0.0;
  double i_n_log = kNegInf;  // log I_n, I_n = sum_{k=1}^n exp(-S_k)
  double l_n = 0.0;          // min_{1<=k<=n} S_k
  double m_n = 0.0;          // max_{1<=k<=n} S_k
  std::size_t sigma_minus = 0;  // first index in [0, n] attaining S_0 ^ L_n
  std::size_t sigma_plus = 0;   // first index in [0, n] attaining S_0 v M_n
  std::optional<std::size_t> tau0_minus;  // first k with S_k < 0; empty = censored at n
  std::optional<std::size_t> tau0_plus;   // first k with S_k > 0; empty = censored at n
  std::optional<std::size_t> big_jump_index;  // first k with X_k > threshold
  std::vector<double> path;                   // S_0..S_n when recorded
};

/// Single-pass walker maintaining every path functional in O(1) per step.
///
/// I_n is accumulated as exp(-S_min) * acc where S_min is the running minimum
/// over k >= 1 and acc = sum_k exp(-(S_k - S_min)) lies in [1, n]; a new
/// minimum rescales acc once. No exp(-S_k) is ever formed directly.
template <class Kernel>
class PathWalker {
 public:
  using Position = typename Kernel::Position;

  explicit PathWalker(const Kernel& kernel, double start = 0.0,
                      std::optional<double> jump_threshold = std::nullopt, bool record = false)
      : kernel_(&kernel), start_(start), threshold_(jump_threshold), record_(record) {
    if (record_) path_.push_back(start_);
  }

  void step(Rng& rng) { advance(kernel_->draw(rng)); }
  void step_tail(double x, Rng& rng) { advance(kernel_->draw_tail(x, rng)); }

  void advance(Position dx) {
    ++k_;
    pos_ += dx;
    if (threshold_ && !jump_index_ && kernel_->value(dx) > *threshold_) jump_index_ = k_;

    if (k_ == 1) {
      min1_ = max1_ = pos_;
      acc_ = 1.0;
    } else if (pos_ < min1_) {
      acc_ = acc_ * kernel_->exp_neg(min1_ - pos_) + 1.0;
      min1_ = pos_;
    } else {
      acc_ += kernel_->exp_neg(pos_ - min1_);
      if (pos_ > max1_) max1_ = pos_;
    }
    if (pos_ < min0_) {
      min0_ = pos_;
      sigma_minus_ = k_;
    }
    if (pos_ > max0_) {
      max0_ = pos_;
      sigma_plus_ = k_;
    }
    const double s = start_ + kernel_->value(pos_);
    if (!tau_minus_ && s < 0) tau_minus_ = k_;
    if (!tau_plus_ && s > 0) tau_plus_ = k_;
    if (record_) path_.push_back(s);
  }

  std::size_t time() const { return k_; }
  Position position() const { return pos_; }
  double s() const { return start_ + kernel_->value(pos_); }
  double log_i() const { return k_ == 0 ? kNegInf : -(start_ + kernel_->value(min1_)) + std::log(acc_); }
  double l_n() const { return start_ + kernel_->value(min1_); }
  // True iff S_k is a strict new minimum of S_0..S_k (sigma_k^- = k).
  bool at_strict_minimum() const { return sigma_minus_ == k_; }
  std::size_t sigma_minus() const { return sigma_minus_; }
  std::optional<std::size_t> tau0_minus() const { return tau_minus_; }
  std::optional<std::size_t> big_jump_index() const { return jump_index_; }

  PathSample sample() const {
    PathSample out;
    out.n = k_;
    out.start = start_;
    out.s_final = s();
    out.i_n_log = log_i();
    out.l_n = k_ ? start_ + kernel_->value(min1_) : start_;
    out.m_n = k_ ? start_ + kernel_->value(max1_) : start_;
    out.sigma_minus = sigma_minus_;
    out.sigma_plus = sigma_plus_;
    out.tau0_minus = tau_minus_;
    out.tau0_plus = tau_plus_;
    out.big_jump_index = jump_index_;
    out.path = path_;
    return out;
  }

 private:
  const Kernel* kernel_;
  double start_;
  std::optional<double> threshold_;
  bool record_;
  std::size_t k_ = 0;
  Position pos_{};
  Position min1_{}, max1_{};  // extrema over k >= 1
  Position min0_{}, max0_{};  // extrema over k >= 0
  double acc_ = 0.0;
  std::size_t sigma_minus_ = 0, sigma_plus_ = 0;
  std::optional<std::size_t> tau_minus_, tau_plus_, jump_index_;
  std::vector<double> path_;
};

inline PathSample simulate_path(const StepModel& model, std::size_t n, double start, Rng& rng,
                                std::optional<double> big_jump_threshold = std::nullopt,
                                bool record_path = false) {
  require(n >= 1, ErrorKind::Domain, "simulate_path: n must be >= 1");
  return with_kernel(model, [&](const auto& kernel) {
    PathWalker walker(kernel, start, big_jump_threshold, record_path);
    for (std::size_t k = 0; k < n; ++k) walker.step(rng);
    return walker.sample();
  });
}

/// First k >= 1 with S_k < 0 for S_0 = start; empty when censored at cap.
template <class Kernel>
std::optional<std::size_t> first_passage_below_zero(const Kernel& kernel, double start, std::size_t cap,
                                                    Rng& rng) {
  typename Kernel::Position pos{};
  for (std::size_t k = 1; k <= cap; ++k) {
    pos += kernel.draw(rng);
    if (start + kernel.value(pos) < 0) return k;
  }
  return std::nullopt;
}

inline std::optional<std::size_t> simulate_tau_minus(const StepModel& model, double start, std::size_t cap,
                                                     Rng& rng) {
  require(cap >= 1, ErrorKind::Domain, "simulate_tau_minus: cap must be >= 1");
  require(start >= 0, ErrorKind::Domain, "simulate_tau_minus: start must be >= 0");
  return with_kernel(model, [&](const auto& kernel) { return first_passage_below_zero(kernel, start, cap, rng); });
}

enum class LadderDirection { Descending, Ascending };

/// First strict ladder height magnitude: |S_gamma| where gamma is the first
/// k with S_k < 0 (descending) or S_k > 0 (ascending). Empty when censored.
template <class Kernel>
std::optional<double> first_ladder_height(const Kernel& kernel, LadderDirection dir, std::size_t cap, Rng& rng) {
  typename Kernel::Position pos{};
  for (std::size_t k = 1; k <= cap; ++k) {
    pos += kernel.draw(rng);
    const double s = kernel.value(pos);
    if (dir == LadderDirection::Descending ? s < 0 : s > 0) return std::abs(s);
  }
  return std::nullopt;
}

struct LadderSample {
  std::vector<double> heights;
  std::size_t attempts = 0;
  std::size_t censored = 0;
  double censoring_rate() const { return attempts ? static_cast<double>(censored) / attempts : 0.0; }
};

/// `count` attempts at the first ladder height; censored attempts are
/// dropped and counted. More than half censored means the walk most likely
/// drifts away from the ladder direction.
inline LadderSample ladder_height_samples(const StepModel& model, std::size_t count, std::size_t cap, Rng& rng,
                                          LadderDirection dir = LadderDirection::Descending) {
  LadderSample out;
  with_kernel(model, [&](const auto& kernel) {
    for (std::size_t i = 0; i < count; ++i) {
      ++out.attempts;
      if (auto h = first_ladder_height(kernel, dir, cap, rng)) {
        out.heights.push_back(*h);
      } else {
        ++out.censored;
      }
    }
  });
  if (out.censoring_rate() > 0.5) {
    fail(ErrorKind::NumericGuard, "ladder_height_samples: more than 50% of ladder epochs censored");
  }
  return out;
}

}  // namespace expfun

#endif  // EXPFUN_WALK_HPP
