#ifndef EXPFUN_LOG_SUM_EXP_HPP
#define EXPFUN_LOG_SUM_EXP_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace expfun {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b))
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> args) {
  if (args.empty()) return kNegInf;
  const double m = *std::max_element(args.begin(), args.end());
  if (m == kNegInf || !std::isfinite(m)) return m;
  double sum = 0.0;
  for (double a : args) sum += std::exp(a - m);
  return m + std::log(sum);
}

/// Streaming log-sum-exp: log(sum_k exp(a_k)) without materializing exp(a_k).
///
/// The running sum is stored relative to the largest exponent seen so far,
/// so it always lies in [1, count]. Each push costs one exp.
class LogSumExp {
 public:
  void push(double a) {
    if (a == kNegInf) return;
    if (a <= max_) {
      acc_ += std::exp(a - max_);
    } else {
      acc_ = acc_ * std::exp(max_ - a) + 1.0;
      max_ = a;
    }
  }

  double value() const { return acc_ == 0.0 ? kNegInf : max_ + std::log(acc_); }

 private:
  double max_ = kNegInf;
  double acc_ = 0.0;
};

}  // namespace expfun

#endif  // EXPFUN_LOG_SUM_EXP_HPP
