#pragma once
// Reproducing kernel of A^2_rho on B_n as a power series in t = <z,w>:
//
//   K(z,w) = sum_d c_d t^d,   c_d = (d+n-1)! / (2 d! n! rho_{2n-1+2d}),
//
// together with the slice function
//
//   g(lambda) = sum_{d>=1} Gamma(d+n) / Gamma(d) * lambda^{d-1} / rho_{2n-1+2d},
//
// the radial derivative RK = t g(t) / (2 n!), and the n-th z-derivative of
// the one-dimensional kernel. Every evaluator chooses its truncation degree
// from a rigorous geometric envelope built on
//
//   rho_x >= (1-eps)^x rho_hat(1-eps).

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bergman/quadrature.hpp"
#include "bergman/weights.hpp"

namespace bergman {

/// The envelope cannot certify the requested tolerance within the degree cap.
class TruncationError : public NumericError {
 public:
  TruncationError(const std::string& what, Complex partial, double bound, long degree)
      : NumericError(what, partial.real(), bound), partial_(partial), degree_(degree) {}

  [[nodiscard]] Complex partial_sum() const noexcept { return partial_; }
  [[nodiscard]] long degree() const noexcept { return degree_; }

 private:
  Complex partial_;
  long degree_;
};

/// Partial sum of a kernel-type series with the degree used and its
/// certified tail bound.
struct SeriesValue {
  Complex value;
  long degree = 0;
  double tail_bound = 0.0;
};

/// Bound exp(log_prefactor) * Gamma(d+shift)/Gamma(d+1) * q^d on the d-th term.
struct Envelope {
  double log_prefactor = 0.0;
  double shift = 1.0;
  double log_q = 0.0;

  [[nodiscard]] double log_term(double d) const {
    return log_prefactor + std::lgamma(d + shift) - std::lgamma(d + 1.0) + d * log_q;
  }

  /// log of a bound on sum_{d > degree} term(d); +inf when unavailable.
  [[nodiscard]] double log_tail(long degree) const {
    const double d = static_cast<double>(degree) + 1.0;
    const double ratio = std::exp(log_q) * (d + shift) / (d + 1.0);
    if (!(ratio < 1.0)) return std::numeric_limits<double>::infinity();
    return log_term(d) - std::log1p(-ratio);
  }

  /// Smallest degree whose tail bound is <= exp(log_target), or cap + 1.
  [[nodiscard]] long min_degree(double log_target, long cap) const {
    if (log_q == -std::numeric_limits<double>::infinity()) return 0;
    const double q = std::exp(log_q);
    if (!(q < 1.0)) return cap + 1;
    // Term ratios drop below one past this degree.
    long lo = std::max(0L, static_cast<long>(std::ceil((q * (1.0 + shift) - 2.0) / (1.0 - q))) + 1);
    if (lo > cap) return cap + 1;
    if (log_tail(lo) <= log_target) return lo;
    if (log_tail(cap) > log_target) return cap + 1;
    long a = lo;
    long b = cap;
    while (b - a > 1) {
      const long mid = a + (b - a) / 2;
      if (log_tail(mid) <= log_target) {
        b = mid;
      } else {
        a = mid;
      }
    }
    return b;
  }
};

/// Truncation decision: the degree and the eps it came from.
struct TruncationPlan {
  long degree = 0;
  double log_bound = -std::numeric_limits<double>::infinity();
  double eps = 0.0;
};

/// Log-space series coefficients of K_rho for dimension n.
///
/// Coefficients up to min(d_max, 256) are built eagerly, the rest on demand.
/// Extension is serialized and idempotent; readers take an immutable
/// snapshot of the arrays.
class KernelCoeffs {
 public:
  static constexpr long kEagerDegree = 256;

  KernelCoeffs(std::shared_ptr<const MomentTable> moments, int n, long d_max = 4096)
      : moments_(std::move(moments)), n_(n), d_max_(d_max) {
    if (!moments_) throw std::invalid_argument("KernelCoeffs: moment table is required");
    if (n_ < 1) throw std::invalid_argument("KernelCoeffs: n must be >= 1");
    if (d_max_ < 1) throw std::invalid_argument("KernelCoeffs: d_max must be >= 1");
    log_n_factorial_ = std::lgamma(n_ + 1.0);
    snapshot_ = std::make_shared<Arrays>();
    ensure(std::min(d_max_, kEagerDegree));
  }

  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] long d_max() const { return d_max_; }
  [[nodiscard]] const MomentTable& moments() const { return *moments_; }
  [[nodiscard]] std::shared_ptr<const MomentTable> moment_table() const { return moments_; }
  [[nodiscard]] const RadialWeight& weight() const { return moments_->weight(); }
  [[nodiscard]] double log_n_factorial() const { return log_n_factorial_; }

  /// Arrays indexed by degree d = 0..size-1.
  struct Arrays {
    std::vector<double> log_moment;  // log rho_{2n-1+2d}
    std::vector<double> log_c;       // log c_d
    std::vector<double> log_b;       // log Gamma(d+n)/(Gamma(d) rho_{2n-1+2d}); -inf at d = 0
  };

  /// Snapshot holding at least degrees 0..degree.
  [[nodiscard]] std::shared_ptr<const Arrays> arrays(long degree) const {
    ensure(degree);
    std::shared_lock lock(mutex_);
    return snapshot_;
  }

  [[nodiscard]] double log_coeff(long d) const { return arrays(d)->log_c[static_cast<std::size_t>(d)]; }
  [[nodiscard]] double coeff(long d) const { return std::exp(log_coeff(d)); }

  /// log c_0 .. log c_degree.
  [[nodiscard]] std::vector<double> log_coeffs(long degree) const {
    auto a = arrays(degree);
    return {a->log_c.begin(), a->log_c.begin() + degree + 1};
  }

  /// log rho_hat(1 - eps_j) with eps_j = 2^{-j/2}.
  [[nodiscard]] double log_tail_at_eps_index(int j) const {
    {
      std::shared_lock lock(mutex_);
      if (auto it = eps_tails_.find(j); it != eps_tails_.end()) return it->second;
    }
    const double v = log_tail_at_gap(weight(), std::exp2(-0.5 * j)).log_value;
    std::unique_lock lock(mutex_);
    eps_tails_.emplace(j, v);
    return v;
  }

  /// Degree needed so that the tail of sum_d F d^e Gamma(d+n)/(Gamma(d+1) 2 n! rho_{2n-1+2d}) |t|^d
  /// is below exp(log_target). `extra_shift` is e in {0,1}; `log_factor` is log F.
  ///
  /// Plans are memoized on a grid: the modulus is rounded up to 1 - 2^{-i/16}
  /// and log_target - log_factor down to a multiple of 1/2, so a cached plan
  /// is always valid for the exact request.
  [[nodiscard]] TruncationPlan plan(double modulus, double extra_shift, double log_factor, double log_target,
                                    long cap) const {
    if (modulus == 0.0) return {0, -std::numeric_limits<double>::infinity(), 0.0};
    constexpr double kSteps = 16.0;
    double level = std::ceil(-std::log2(1.0 - modulus) * kSteps);
    if (1.0 - std::exp2(-level / kSteps) < modulus) level += 1.0;
    const double rounded_modulus = 1.0 - std::exp2(-level / kSteps);
    const double budget = std::floor(2.0 * (log_target - log_factor)) / 2.0;
    const PlanKey key{static_cast<int>(level), static_cast<int>(extra_shift), static_cast<long>(2.0 * budget), cap};
    TruncationPlan p;
    bool cached = false;
    {
      std::shared_lock lock(mutex_);
      if (auto it = plans_.find(key); it != plans_.end()) {
        p = it->second;
        cached = true;
      }
    }
    if (!cached) {
      p = search_plan(rounded_modulus, extra_shift, budget, cap);
      std::unique_lock lock(mutex_);
      plans_.emplace(key, p);
    }
    p.log_bound += log_factor;
    return p;
  }

 private:
  struct PlanKey {
    int level;
    int shift;
    long budget;
    long cap;
    auto operator<=>(const PlanKey&) const = default;
  };

  [[nodiscard]] TruncationPlan search_plan(double modulus, double extra_shift, double log_target, long cap) const {
    TruncationPlan best;
    best.degree = cap + 1;
    best.log_bound = std::numeric_limits<double>::infinity();
    int worse = 0;
    for (int j = 1; j <= 90; ++j) {
      const double eps = std::exp2(-0.5 * j);
      const double shrink = (1.0 - eps) * (1.0 - eps);
      if (!(shrink > modulus)) continue;
      const double log_c_eps = log_tail_at_eps_index(j);
      if (!std::isfinite(log_c_eps)) break;
      Envelope env;
      env.log_prefactor = -std::log(2.0) - log_n_factorial_ - log_c_eps - (2.0 * n_ - 1.0) * std::log1p(-eps);
      env.shift = n_ + extra_shift;
      env.log_q = std::log(modulus) - 2.0 * std::log1p(-eps);
      const long d = env.min_degree(log_target, cap);
      if (d < best.degree) {
        best = {d, env.log_tail(d), eps};
        worse = 0;
      } else if (best.degree <= cap && ++worse >= 6) {
        break;
      }
    }
    return best;
  }

  void ensure(long degree) const {
    if (degree < 0) throw std::invalid_argument("KernelCoeffs: negative degree");
    {
      std::shared_lock lock(mutex_);
      if (static_cast<long>(snapshot_->log_c.size()) > degree) return;
    }
    std::unique_lock lock(mutex_);
    const long have = static_cast<long>(snapshot_->log_c.size());
    if (have > degree) return;
    long target = std::max(degree + 1, 2 * have);
    auto next = std::make_shared<Arrays>(*snapshot_);
    next->log_moment.reserve(static_cast<std::size_t>(target));
    next->log_c.reserve(static_cast<std::size_t>(target));
    next->log_b.reserve(static_cast<std::size_t>(target));
    for (long d = have; d < target; ++d) {
      const double x = 2.0 * n_ - 1.0 + 2.0 * static_cast<double>(d);
      const double lm = moments_->smooth_log_value(x);
      const double dd = static_cast<double>(d);
      next->log_moment.push_back(lm);
      next->log_c.push_back(std::lgamma(dd + n_) - std::lgamma(dd + 1.0) - std::log(2.0) - log_n_factorial_ - lm);
      next->log_b.push_back(d == 0 ? -std::numeric_limits<double>::infinity()
                                   : std::lgamma(dd + n_) - std::lgamma(dd) - lm);
    }
    snapshot_ = std::move(next);
  }

  std::shared_ptr<const MomentTable> moments_;
  int n_;
  long d_max_;
  double log_n_factorial_ = 0.0;
  mutable std::shared_mutex mutex_;
  mutable std::shared_ptr<const Arrays> snapshot_;
  mutable std::map<int, double> eps_tails_;
  mutable std::map<PlanKey, TruncationPlan> plans_;
};

inline KernelCoeffs build_coeffs(std::shared_ptr<const MomentTable> moments, int n, long d_max = 4096) {
  return KernelCoeffs(std::move(moments), n, d_max);
}

namespace detail {

/// Neumaier-compensated complex accumulator.
struct CompensatedSum {
  double re = 0.0;
  double im = 0.0;
  double cre = 0.0;
  double cim = 0.0;

  static void add(double& s, double& c, double v) {
    const double t = s + v;
    if (std::abs(s) >= std::abs(v)) {
      c += (s - t) + v;
    } else {
      c += (v - t) + s;
    }
    s = t;
  }
  void operator+=(Complex v) {
    add(re, cre, v.real());
    add(im, cim, v.imag());
  }
  [[nodiscard]] Complex value() const { return {re + cre, im + cim}; }
};

/// sum_{d=first}^{last} exp(log_coeff[d] + (d - power_offset) log|t|) * unit^(d - power_offset).
inline Complex sum_log_series(std::span<const double> log_coeff, long first, long last, Complex t, long power_offset) {
  const double mod = std::abs(t);
  CompensatedSum acc;
  if (mod == 0.0) {
    for (long d = first; d <= last; ++d) {
      if (d - power_offset == 0) acc += Complex(std::exp(log_coeff[static_cast<std::size_t>(d)]), 0.0);
    }
    return acc.value();
  }
  const Complex unit = t / mod;
  const double log_mod = std::log(mod);
  Complex phase = std::pow(unit, static_cast<double>(first - power_offset));
  if (first - power_offset == 0) phase = Complex(1.0, 0.0);
  for (long d = first; d <= last; ++d) {
    const double lc = log_coeff[static_cast<std::size_t>(d)];
    const double mag = std::exp(lc + static_cast<double>(d - power_offset) * log_mod);
    acc += mag * phase;
    phase *= unit;
  }
  return acc.value();
}

inline long checked_degree(const KernelCoeffs& k, const TruncationPlan& plan, long cap, const char* who,
                           const std::function<Complex(long)>& partial) {
  if (plan.degree > cap) {
    throw TruncationError(std::string(who) + ": tail bound cannot reach tolerance within d_max terms", partial(cap),
                          std::exp(plan.log_bound), cap);
  }
  (void)k;
  return plan.degree;
}

}  // namespace detail

/// sum_d c_d t^d for a given t with |t| < 1; `tol` bounds the discarded tail.
inline SeriesValue eval_kernel_at(const KernelCoeffs& k, Complex t, double tol) {
  const double mod = std::abs(t);
  if (!(mod < 1.0)) throw std::domain_error("eval_kernel: |<z,w>| must be < 1");
  if (!(tol > 0.0)) throw std::invalid_argument("eval_kernel: tol must be > 0");
  const TruncationPlan plan = k.plan(mod, 0.0, 0.0, std::log(tol), k.d_max());
  const long degree = detail::checked_degree(k, plan, k.d_max(), "eval_kernel", [&](long cap) {
    auto a = k.arrays(cap);
    return detail::sum_log_series(a->log_c, 0, cap, t, 0);
  });
  auto a = k.arrays(degree);
  return {detail::sum_log_series(a->log_c, 0, degree, t, 0), degree, std::exp(plan.log_bound)};
}

inline SeriesValue eval_kernel(const KernelCoeffs& k, const BallPoint& z, const BallPoint& w, double tol) {
  if (z.dim() != k.n() || w.dim() != k.n()) throw std::invalid_argument("eval_kernel: dimension mismatch");
  return eval_kernel_at(k, inner(z, w), tol);
}

/// g(lambda) = sum_{d>=1} Gamma(d+n)/Gamma(d) lambda^{d-1} / rho_{2n-1+2d}.
inline SeriesValue eval_g(const KernelCoeffs& k, Complex lambda, double tol) {
  const double mod = std::abs(lambda);
  if (!(mod < 1.0)) throw std::domain_error("eval_g: |lambda| must be < 1");
  if (!(tol > 0.0)) throw std::invalid_argument("eval_g: tol must be > 0");
  if (mod == 0.0) {
    auto a = k.arrays(1);
    return {Complex(std::exp(a->log_b[1]), 0.0), 1, 0.0};
  }
  // b_d |lambda|^{d-1} = (2 n! / |lambda|) d c_d |lambda|^d
  const double log_factor = std::log(2.0) + k.log_n_factorial() - std::log(mod);
  const TruncationPlan plan = k.plan(mod, 1.0, log_factor, std::log(tol), k.d_max());
  const long degree = std::max(1L, detail::checked_degree(k, plan, k.d_max(), "eval_g", [&](long cap) {
                                    auto a = k.arrays(cap);
                                    return detail::sum_log_series(a->log_b, 1, cap, lambda, 1);
                                  }));
  auto a = k.arrays(degree);
  return {detail::sum_log_series(a->log_b, 1, degree, lambda, 1), degree, std::exp(plan.log_bound)};
}

/// RK_rho(z,w) = <z,w> g(<z,w>) / (2 Gamma(n+1)) as a function of t = <z,w>.
inline SeriesValue eval_RK_at(const KernelCoeffs& k, Complex t, double tol) {
  const double mod = std::abs(t);
  if (!(mod < 1.0)) throw std::domain_error("eval_RK: |<z,w>| must be < 1");
  if (mod == 0.0) return {Complex{}, 0, 0.0};
  const double scale = 2.0 * std::exp(k.log_n_factorial());
  SeriesValue g = eval_g(k, t, tol * scale / mod);
  return {t * g.value / scale, g.degree, g.tail_bound * mod / scale};
}

inline SeriesValue eval_RK(const KernelCoeffs& k, const BallPoint& z, const BallPoint& w, double tol) {
  if (z.dim() != k.n() || w.dim() != k.n()) throw std::invalid_argument("eval_RK: dimension mismatch");
  return eval_RK_at(k, inner(z, w), tol);
}

/// R applied to the kernel series term by term: sum_{d>=1} d c_d t^d.
inline SeriesValue eval_RK_direct(const KernelCoeffs& k, Complex t, double tol) {
  const double mod = std::abs(t);
  if (!(mod < 1.0)) throw std::domain_error("eval_RK: |<z,w>| must be < 1");
  if (mod == 0.0) return {Complex{}, 0, 0.0};
  const TruncationPlan plan = k.plan(mod, 1.0, 0.0, std::log(tol), k.d_max());
  auto sum_to = [&](long degree) {
    auto a = k.arrays(degree);
    std::vector<double> lc(static_cast<std::size_t>(degree + 1));
    for (long d = 1; d <= degree; ++d) lc[static_cast<std::size_t>(d)] = std::log(static_cast<double>(d)) + a->log_c[static_cast<std::size_t>(d)];
    return detail::sum_log_series(lc, 1, degree, t, 0);
  };
  const long degree = std::max(1L, detail::checked_degree(k, plan, k.d_max(), "eval_RK_direct", sum_to));
  return {sum_to(degree), degree, std::exp(plan.log_bound)};
}

/// Term-by-term derivative of the disk kernel K^1(z,w) = 1/2 sum_d (z conj w)^d / rho_{2d+1}:
///   d^m/dz^m K^1 = 1/2 sum_{d>=m} d!/(d-m)! z^{d-m} conj(w)^d / rho_{2d+1}.
inline SeriesValue disk_kernel_deriv_series(const KernelCoeffs& k, Complex z, Complex w, int order, double tol) {
  if (order < 0) throw std::invalid_argument("disk_kernel_deriv: order must be >= 0");
  if (!(std::abs(z) < 1.0 && std::abs(w) < 1.0)) throw std::domain_error("disk_kernel_deriv: |z|, |w| must be < 1");
  const double wm = std::abs(w);
  if (wm == 0.0) return {Complex{}, 0, 0.0};
  const MomentTable& t = k.moments();
  const double modulus = std::abs(z) * wm;
  const double m = order;
  // term_s <= 1/2 |w|^m Gamma(s+m+1)/Gamma(s+1) (|z||w|)^s / (C_eps (1-eps)^{2s+2m+1})
  long degree = 0;
  double bound = 0.0;
  if (modulus > 0.0) {
    long best = k.d_max() + 1;
    double best_bound = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= 90; ++j) {
      const double eps = std::exp2(-0.5 * j);
      if (!((1.0 - eps) * (1.0 - eps) > modulus)) continue;
      const double lc = k.log_tail_at_eps_index(j);
      if (!std::isfinite(lc)) break;
      Envelope env;
      env.log_prefactor = std::log(0.5) + m * std::log(wm) - lc - (2.0 * m + 1.0) * std::log1p(-eps);
      env.shift = m + 1.0;
      env.log_q = std::log(modulus) - 2.0 * std::log1p(-eps);
      const long d = env.min_degree(std::log(tol), k.d_max());
      if (d < best) {
        best = d;
        best_bound = std::exp(env.log_tail(d));
      }
    }
    if (best > k.d_max()) {
      throw TruncationError("disk_kernel_deriv: tail bound cannot reach tolerance within d_max terms", Complex{},
                            best_bound, k.d_max());
    }
    degree = best;
    bound = best_bound;
  }
  detail::CompensatedSum acc;
  const Complex wbar = std::conj(w);
  Complex z_power(1.0, 0.0);
  Complex w_power = std::pow(wbar, m);
  if (order == 0) w_power = Complex(1.0, 0.0);
  for (long s = 0; s <= degree; ++s) {
    const double d = static_cast<double>(s) + m;
    const double log_mag = std::lgamma(d + 1.0) - std::lgamma(static_cast<double>(s) + 1.0) -
                           t.smooth_log_value(2.0 * d + 1.0);
    acc += 0.5 * std::exp(log_mag) * z_power * w_power;
    z_power *= z;
    w_power *= wbar;
  }
  return {acc.value(), degree + order, bound};
}

/// d^order/dz^order of the one-dimensional kernel. For order == n this is
/// 1/2 g(z conj w) conj(w)^n; other orders use the term-by-term series.
inline SeriesValue eval_disk_kernel_deriv(const KernelCoeffs& k, Complex z, Complex w, int order, double tol) {
  if (!(std::abs(z) < 1.0 && std::abs(w) < 1.0)) throw std::domain_error("disk_kernel_deriv: |z|, |w| must be < 1");
  if (order != k.n()) return disk_kernel_deriv_series(k, z, w, order, tol);
  const double wm = std::abs(w);
  if (wm == 0.0) return {Complex{}, 0, 0.0};
  const Complex wbar_n = std::pow(std::conj(w), static_cast<double>(order));
  const double scale = 0.5 * std::pow(wm, order);
  SeriesValue g = eval_g(k, z * std::conj(w), tol / scale);
  return {0.5 * g.value * wbar_n, g.degree, g.tail_bound * scale};
}

inline SeriesValue eval_disk_kernel_deriv(const KernelCoeffs& k, Complex z, Complex w, double tol) {
  return eval_disk_kernel_deriv(k, z, w, k.n(), tol);
}

/// ||K(., z)||^2 in A^2_rho = sum_d c_d |z|^{2d} = K(z, z).
inline double kernel_norm_sq(const KernelCoeffs& k, const BallPoint& z, double tol) {
  if (z.dim() != k.n()) throw std::invalid_argument("kernel_norm_sq: dimension mismatch");
  const double mod = z.norm() * z.norm();
  return eval_kernel_at(k, Complex(mod, 0.0), tol).value.real();
}

// ---------------------------------------------------------------------------
// Circle means of |series| on |lambda| = a, for the analysis functionals.

enum class SeriesKind {
  kernel,             // sum_d c_d lambda^d
  radial_derivative,  // sum_d d c_d lambda^d  (RK as a function of <z,w>)
  slice,              // g(lambda)
};

struct CircleMean {
  double mean = 0.0;
  double log_mean = -std::numeric_limits<double>::infinity();
  long degree = 0;
  int nodes = 0;
};

/// mean over theta of |S(a e^{i theta})| to relative accuracy `rel_tol`.
/// Any single Fourier coefficient lower-bounds the mean, which turns the
/// relative tolerance into an absolute truncation target.
inline CircleMean series_circle_mean(const KernelCoeffs& k, SeriesKind kind, double a, double rel_tol, long cap) {
  if (!(a >= 0.0 && a < 1.0)) throw std::domain_error("series_circle_mean: modulus must lie in [0,1)");
  const double log_a = a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity();
  // log of |coefficient_d| a^{power(d)}
  auto log_term = [&](const KernelCoeffs::Arrays& arr, long d) -> double {
    const auto i = static_cast<std::size_t>(d);
    switch (kind) {
      case SeriesKind::kernel: return arr.log_c[i] + (d == 0 ? 0.0 : d * log_a);
      case SeriesKind::radial_derivative:
        return d == 0 ? -std::numeric_limits<double>::infinity() : std::log(static_cast<double>(d)) + arr.log_c[i] + d * log_a;
      case SeriesKind::slice:
        return d == 0 ? -std::numeric_limits<double>::infinity() : arr.log_b[i] + (d == 1 ? 0.0 : (d - 1) * log_a);
    }
    return 0.0;
  };
  const long first = kind == SeriesKind::kernel ? 0 : 1;
  if (a == 0.0) {
    auto arr = k.arrays(1);
    const double lt = kind == SeriesKind::radial_derivative ? -std::numeric_limits<double>::infinity()
                                                            : log_term(*arr, first);
    return {std::exp(lt), lt, first, 1};
  }

  long probe = std::min(cap, 64L);
  double lower = -std::numeric_limits<double>::infinity();
  TruncationPlan plan;
  const double log_factor = kind == SeriesKind::slice ? std::log(2.0) + k.log_n_factorial() - log_a : 0.0;
  const double shift = kind == SeriesKind::kernel ? 0.0 : 1.0;
  while (true) {
    auto arr = k.arrays(probe);
    for (long d = first; d <= probe; ++d) lower = std::max(lower, log_term(*arr, d));
    plan = k.plan(a, shift, log_factor, std::log(0.25 * rel_tol) + lower, cap);
    if (plan.degree > cap) {
      throw TruncationError("series_circle_mean: degree cap reached", Complex{}, std::exp(plan.log_bound), cap);
    }
    if (plan.degree <= probe) break;
    probe = std::min(cap, std::max(plan.degree, 2 * probe));
  }
  const long degree = std::max(plan.degree, first);
  auto arr = k.arrays(degree);
  std::vector<double> coeffs(static_cast<std::size_t>(degree + 1), 0.0);
  for (long d = first; d <= degree; ++d) {
    const double e = log_term(*arr, d) - lower;
    coeffs[static_cast<std::size_t>(d)] = e < -745.0 ? 0.0 : std::exp(e);
  }
  // Shift so index 0 of the folded array is the first power actually present.
  std::span<const double> view(coeffs);
  if (kind == SeriesKind::slice) view = view.subspan(1);
  const SeriesCircleMean m = series_circle_abs_mean(view, 0.25 * rel_tol);
  CircleMean out;
  out.log_mean = std::log(m.mean) + lower;
  out.mean = std::exp(out.log_mean);
  out.degree = degree;
  out.nodes = m.nodes;
  return out;
}

}  // namespace bergman
