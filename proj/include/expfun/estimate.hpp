#ifndef EXPFUN_ESTIMATE_HPP
#define EXPFUN_ESTIMATE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "expfun/error.hpp"
#include "expfun/random.hpp"

namespace expfun {

/// Monte Carlo result. With log_domain set, value and std_error describe
/// log of the quantity (delta-method error).
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::string method;
  bool log_domain = false;

  double lo95() const { return value - 1.959963984540054 * std_error; }
  double hi95() const { return value + 1.959963984540054 * std_error; }
  double rel_error() const { return value != 0.0 ? std_error / std::abs(value) : kInfinity; }

  static constexpr double kInfinity = std::numeric_limits<double>::infinity();
};

/// Running mean and centred second moment (Welford), mergeable (Chan et al.).
class Moments {
 public:
  void push(double x) {
    ++n_;
    const long double d = x - mean_;
    mean_ += d / static_cast<long double>(n_);
    m2_ += d * (x - mean_);
  }

  void merge(const Moments& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const long double n = static_cast<long double>(n_ + o.n_);
    const long double d = o.mean_ - mean_;
    mean_ += d * static_cast<long double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<long double>(n_) * static_cast<long double>(o.n_) / n;
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return static_cast<double>(mean_); }
  double variance() const { return n_ > 1 ? static_cast<double>(m2_ / static_cast<long double>(n_ - 1)) : 0.0; }
  double std_error() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

  Estimate estimate(std::string method) const { return {mean(), std_error(), n_, std::move(method), false}; }

 private:
  std::size_t n_ = 0;
  long double mean_ = 0.0L;
  long double m2_ = 0.0L;
};

/// Standard error of a difference of independent estimates.
inline double combined_se(const Estimate& a, const Estimate& b) { return std::hypot(a.std_error, b.std_error); }

/// 95% intervals intersect.
inline bool ci_overlap(const Estimate& a, const Estimate& b) { return a.lo95() <= b.hi95() && b.lo95() <= a.hi95(); }

/// Pool two independent estimates of the same quantity, weighted by sample count.
inline Estimate pool(const Estimate& a, const Estimate& b) {
  require(a.log_domain == b.log_domain, ErrorKind::Domain, "pool: mixed log-domain flags");
  const double na = static_cast<double>(a.n_samples), nb = static_cast<double>(b.n_samples);
  require(na + nb > 0, ErrorKind::Domain, "pool: no samples");
  const double v = (na * a.value + nb * b.value) / (na + nb);
  const double se = std::hypot(na * a.std_error, nb * b.std_error) / (na + nb);
  return {v, se, a.n_samples + b.n_samples, a.method == b.method ? a.method : a.method + "+" + b.method, a.log_domain};
}

/// a / b for independent estimates (delta method).
inline Estimate ratio(const Estimate& a, const Estimate& b) {
  const double r = a.value / b.value;
  const double rel = std::hypot(a.std_error / a.value, b.std_error / b.value);
  return {r, std::abs(r) * rel, std::min(a.n_samples, b.n_samples), a.method + "/" + b.method, false};
}

/// Linear-domain estimate to log-domain (delta method).
inline Estimate to_log(const Estimate& e) {
  if (e.log_domain) return e;
  return {std::log(e.value), e.std_error / e.value, e.n_samples, e.method, true};
}

inline Estimate from_log(const Estimate& e) {
  if (!e.log_domain) return e;
  const double v = std::exp(e.value);
  return {v, v * e.std_error, e.n_samples, e.method, false};
}

struct McOptions {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::size_t batch_size = 4096;
};

/// Stream index for (purpose, batch): distinct purposes within one
/// estimator never share random numbers.
inline std::uint64_t stream_key(std::uint64_t purpose, std::uint64_t batch) { return (purpose << 40) ^ batch; }

/// Split `total` samples into fixed batches, run fn(batch, count, rng) on a
/// worker pool, and return the results in batch order. Batch b always uses
/// Rng::stream(seed, stream_key(purpose, b)) and the batch layout depends
/// only on `total` and the batch size, so the merged result is independent
/// of the number of workers.
template <class Fn>
auto run_batches(std::size_t total, const McOptions& opt, std::uint64_t purpose, Fn&& fn) {
  using Result = decltype(fn(std::size_t{}, std::size_t{}, std::declval<Rng&>()));
  require(opt.batch_size > 0, ErrorKind::Config, "mc.batch_size must be positive");
  const std::size_t nb = (total + opt.batch_size - 1) / opt.batch_size;
  std::vector<Result> out(nb);
  auto run_one = [&](std::size_t b) {
    const std::size_t count = std::min(opt.batch_size, total - b * opt.batch_size);
    Rng rng = Rng::stream(opt.seed, stream_key(purpose, b));
    out[b] = fn(b, count, rng);
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(nb)));
  if (workers <= 1) {
    for (std::size_t b = 0; b < nb; ++b) run_one(b);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t b = next.fetch_add(1);
        if (b >= nb) return;
        try {
          run_one(b);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = nb;
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

/// Moments over `total` draws of sampler(rng), merged in batch order.
template <class Sampler>
Moments sample_moments(std::size_t total, const McOptions& opt, std::uint64_t purpose, Sampler&& sampler) {
  auto parts = run_batches(total, opt, purpose, [&](std::size_t, std::size_t count, Rng& rng) {
    Moments m;
    for (std::size_t i = 0; i < count; ++i) m.push(sampler(rng));
    return m;
  });
  Moments all;
  for (const auto& p : parts) all.merge(p);
  return all;
}

}  // namespace expfun

#endif  // EXPFUN_ESTIMATE_HPP
