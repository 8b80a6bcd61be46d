#pragma once
// Quantities behind "P_rho : L^inf -> Bloch is bounded iff rho in D-hat":
// the Bloch seminorm on a grid, the boundedness functional
//
//   M(r) = (1 - r^2) int_B |RK(r e_1, w)| rho(w) dv(w),
//
// its majorant U(r), the disk-kernel estimate, the moment lower bound and
// its Cesaro averages, and the Hardy-Littlewood coefficient inequalities.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bergman/kernel.hpp"
#include "bergman/parallel.hpp"
#include "bergman/quadrature.hpp"
#include "bergman/weights.hpp"

namespace bergman {

// ---------------------------------------------------------------------------
// Bloch seminorm on a grid

struct BlochEstimate {
  double value = 0.0;  // max over evaluated points; a lower bound for the seminorm
  std::size_t argmax = 0;
  std::vector<std::size_t> skipped;  // grid points where the evaluator failed
};

template <class RadialDerivative>
BlochEstimate bloch_seminorm(RadialDerivative&& rf, std::span<const BallPoint> grid) {
  if (grid.empty()) throw std::invalid_argument("bloch_seminorm: grid is empty");
  BlochEstimate out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double density = 0.0;
    try {
      const double r = grid[i].norm();
      density = (1.0 - r * r) * std::abs(Complex(rf(grid[i])));
    } catch (const std::exception&) {
      out.skipped.push_back(i);
      continue;
    }
    if (!std::isfinite(density)) {
      out.skipped.push_back(i);
      continue;
    }
    if (density > out.value) {
      out.value = density;
      out.argmax = i;
    }
  }
  return out;
}

namespace detail {

/// Analysis quantities are controlled in relative terms; q.tolerance is
/// read as the relative target, floored where double arithmetic stops
/// being meaningful for nested rules.
inline QuadSpec analysis_quad(const QuadSpec& q) {
  QuadSpec r = QuadSpec::relative(std::clamp(q.tolerance, 1e-11, 1e-2), std::max(q.max_subdivisions, 4000));
  r.grading = q.grading;
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Boundedness functional

/// Evaluates M(r) through the reduction
///
///   M(r) = (1 - r^2) int_0^1 W(b) C(r b) db,
///
/// where C(a) is the circle mean of |RK| at modulus a (one FFT per node) and
///   W(b) = 2 b rho(b)                                               (n = 1)
///   W(b) = 4n(n-1) b int_b^1 s^{2n-3} rho(s) (1 - b^2/s^2)^{n-2} ds   (n >= 2)
/// collects the radial and slice weights. W is memoized across radii.
class BoundednessFunctional {
 public:
  BoundednessFunctional(const KernelCoeffs& k, const QuadSpec& q, long degree_cap = 1L << 21)
      : k_(k), q_(detail::analysis_quad(q)), cap_(degree_cap) {}

  [[nodiscard]] double operator()(double r) const {
    if (!(r >= 0.0 && r < 1.0)) throw std::domain_error("boundedness_functional: r must lie in [0,1)");
    if (r == 0.0) return 0.0;
    const double circle_tol = 0.1 * q_.rel_tolerance;
    auto integrand = [&](double u) {
      const double b = 1.0 - u;
      if (b <= 0.0) return 0.0;
      const double wb = slice_weight(b);
      if (wb == 0.0) return 0.0;
      return wb * series_circle_mean(k_, SeriesKind::radial_derivative, r * b, circle_tol, cap_).mean;
    };
    return (1.0 - r * r) * integrate_graded<double>(integrand, 1.0, q_).value;
  }

  /// W(b) above.
  [[nodiscard]] double slice_weight(double b) const {
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(b); it != cache_.end()) return it->second;
    }
    const int n = k_.n();
    const RadialWeight& w = k_.weight();
    double v = 0.0;
    if (n == 1) {
      v = 2.0 * b * w.density_at_gap(1.0 - b);
    } else if (b < 1.0) {
      auto inner = [&](double u) {
        const double s = 1.0 - u;
        if (s <= b) return 0.0;
        const double rho = w.density_at_gap(u);
        if (rho == 0.0) return 0.0;
        const double shrink = n == 2 ? 1.0 : std::pow(1.0 - (b / s) * (b / s), n - 2);
        return std::pow(s, 2 * n - 3) * rho * shrink;
      };
      const double gap = 1.0 - b;
      const double integral = integrate_graded<double>(inner, gap, q_.scaled(0.1)).value;
      v = 4.0 * n * (n - 1.0) * b * integral;
    }
    std::lock_guard lock(mutex_);
    cache_.emplace(b, v);
    return v;
  }

 private:
  const KernelCoeffs& k_;
  QuadSpec q_;
  long cap_;
  mutable std::mutex mutex_;
  mutable std::map<double, double> cache_;
};

inline double boundedness_functional(const KernelCoeffs& k, double r, const QuadSpec& q = {}) {
  return BoundednessFunctional(k, q)(r);
}

// ---------------------------------------------------------------------------
// Majorant and the disk-kernel estimate

/// U(r) = 1 + int_0^r [rho_hat(t/r) / rho_hat(t)] (1-t)^{-2} dt.
inline double majorant(const RadialWeight& w, double r, const QuadSpec& q = {}) {
  if (!(r >= 0.0 && r < 1.0)) throw std::domain_error("majorant: r must lie in [0,1)");
  if (r == 0.0) return 1.0;
  const QuadSpec qa = detail::analysis_quad(q);
  // v = r - t, graded toward t = r where rho_hat(t/r) vanishes.
  auto integrand = [&](double v) {
    const double t = r - v;
    if (t < 0.0) return 0.0;
    const double gap_scaled = v / r;  // 1 - t/r
    const double log_num = log_tail_at_gap(w, gap_scaled).log_value;
    const double log_den = log_tail_at_gap(w, 1.0 - t).log_value;
    const double ratio = std::exp(log_num - log_den);
    return ratio / ((1.0 - t) * (1.0 - t));
  };
  return 1.0 + integrate_graded<double>(integrand, r, qa).value;
}

struct RatioCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

/// lhs = int_D |d^n/dz^n K^1(z, s)| (1-|z|^2)^{n-2} dA(z),
/// rhs = int_0^s dt / (rho_hat(t) (1-t)^2).
inline RatioCheck pr_estimate_check(const KernelCoeffs& k, double s, const QuadSpec& q = {},
                                    long degree_cap = 1L << 21) {
  if (!(s >= 0.5 && s < 1.0)) throw std::domain_error("pr_estimate_check: s must lie in [1/2, 1)");
  const int n = k.n();
  const QuadSpec qa = detail::analysis_quad(q);
  const RadialWeight& w = k.weight();
  // |d^n K^1(z, s)| = 1/2 s^n |g(z s)|, so the angular mean is the circle mean of |g| at modulus p s.
  auto radial = [&](double gap) {
    const double p = 1.0 - gap;
    if (p <= 0.0) return 0.0;
    const double factor = 2.0 * p * std::pow(gap * (2.0 - gap), n - 2);
    if (factor == 0.0) return 0.0;
    return factor * series_circle_mean(k, SeriesKind::slice, p * s, 0.1 * qa.rel_tolerance, degree_cap).mean;
  };
  const double lhs = 0.5 * std::pow(s, n) * integrate_graded<double>(radial, 1.0, qa).value;
  // u = 1 - t runs over [1 - s, 1]; substitute v = u - (1 - s), graded toward t = s.
  auto rhs_integrand = [&](double v) {
    const double u = (1.0 - s) + v;
    return std::exp(-log_tail_at_gap(w, u).log_value) / (u * u);
  };
  const double rhs = integrate_graded<double>(rhs_integrand, s, qa).value;
  return {lhs, rhs, lhs / rhs};
}

// ---------------------------------------------------------------------------
// Moment lower bound and Cesaro averages

struct SeriesTotal {
  double value = 0.0;
  long degree = 0;
  double tail_bound = 0.0;
};

/// sum_{d>=1} rho_{2n-1+d} / rho_{2n-1+2d} r^d, truncated once
///   rho_{2n-1+d} <= rho_hat(0),  rho_x >= (1-eps)^x rho_hat(1-eps)
/// certify the geometric tail below rel_tol times the partial sum.
inline SeriesTotal lower_bound_series(const MomentTable& t, int n, double r, long d_max = 1L << 21,
                                      double rel_tol = 1e-9) {
  if (n < 1) throw std::invalid_argument("lower_bound_series: n must be >= 1");
  if (!(r >= 0.0 && r < 1.0)) throw std::domain_error("lower_bound_series: r must lie in [0,1)");
  if (r == 0.0) return {};
  const double base = 2.0 * n - 1.0;
  auto log_term = [&](long d) {
    const double x = static_cast<double>(d);
    return t.smooth_log_value(base + x) - t.smooth_log_value(base + 2.0 * x) + x * std::log(r);
  };
  const double log_first = log_term(1);
  const double log_total_mass = log_tail_at_gap(t.weight(), 1.0).log_value;
  long best = d_max + 1;
  double best_bound = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= 90; ++j) {
    const double eps = std::exp2(-0.5 * j);
    const double q = r / ((1.0 - eps) * (1.0 - eps));
    if (!(q < 1.0)) continue;
    const double log_c = log_tail_at_gap(t.weight(), eps).log_value;
    if (!std::isfinite(log_c)) break;
    Envelope env;
    env.log_prefactor = log_total_mass - log_c - base * std::log1p(-eps);
    env.shift = 1.0;
    env.log_q = std::log(q);
    const long d = env.min_degree(std::log(0.5 * rel_tol) + log_first, d_max);
    if (d < best) {
      best = d;
      best_bound = std::exp(env.log_tail(d));
    }
  }
  double sum = 0.0;
  double comp = 0.0;
  const long upto = std::min(best, d_max);
  for (long d = 1; d <= upto; ++d) {
    const double v = std::exp(log_term(d));
    const double y = v - comp;
    const double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  if (best > d_max) {
    throw TruncationError("lower_bound_series: tail bound cannot reach tolerance within d_max terms", Complex(sum, 0.0),
                          best_bound, d_max);
  }
  return {sum, best, best_bound};
}

/// (1/N) sum_{d=1}^N rho_{d+2n-1} / rho_{2d+2n-1}.
inline double cesaro_lower(const MomentTable& t, int n, long N) {
  if (n < 1 || N < 1) throw std::invalid_argument("cesaro_lower: n and N must be >= 1");
  const double base = 2.0 * n - 1.0;
  double sum = 0.0;
  for (long d = 1; d <= N; ++d) {
    const double x = static_cast<double>(d);
    sum += std::exp(t.smooth_log_value(base + x) - t.smooth_log_value(base + 2.0 * x));
  }
  return sum / static_cast<double>(N);
}

/// (N, rho_{4N} / rho_{6N}) for each N.
inline std::vector<std::pair<long, double>> moment_doubling_chain(const MomentTable& t, std::span<const long> Ns) {
  std::vector<std::pair<long, double>> out;
  out.reserve(Ns.size());
  for (long N : Ns) {
    if (N < 1) throw std::invalid_argument("moment_doubling_chain: N must be >= 1");
    const double x = static_cast<double>(N);
    out.emplace_back(N, std::exp(t.smooth_log_value(4.0 * x) - t.smooth_log_value(6.0 * x)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hardy-Littlewood coefficient inequalities for polynomials

namespace detail {

/// Trapezoid mean of |f(e^{i theta})|^p; for even integer p with enough
/// nodes it is exact, otherwise nodes double until stable.
inline double circle_p_mean(std::span<const Complex> coeffs, double p, const QuadSpec& q) {
  const int degree = static_cast<int>(coeffs.size()) - 1;
  auto f = [&](double theta) {
    const Complex u = std::polar(1.0, theta);
    Complex acc{};
    for (int j = degree; j >= 0; --j) acc = acc * u + coeffs[static_cast<std::size_t>(j)];
    return std::pow(std::abs(acc), p);
  };
  int nodes = 64;
  while (nodes < static_cast<int>(std::ceil(p)) * (degree + 1) + 1) nodes *= 2;
  QuadSpec rel = QuadSpec::relative(std::max(q.tolerance, 1e-13));
  return circle_mean(f, rel, nodes / 2, 1 << 22);
}

inline void check_coeffs(std::span<const Complex> coeffs) {
  if (coeffs.empty()) throw std::domain_error("Hardy-Littlewood: coefficient list is empty");
}

}  // namespace detail

struct CoefficientCheck {
  double coefficient_sum = 0.0;  // sum_j (j+1)^{p-2} |a_j|^p
  double norm_power = 0.0;       // ||f||_p^p on the unit circle
};

/// p in (0, 2]: sum (j+1)^{p-2}|a_j|^p against ||f||_p^p.
inline CoefficientCheck hardy_littlewood_check(std::span<const Complex> coeffs, double p, const QuadSpec& q = {}) {
  detail::check_coeffs(coeffs);
  if (!(p > 0.0 && p <= 2.0)) throw std::domain_error("hardy_littlewood_check: p must lie in (0, 2]");
  CoefficientCheck out;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    out.coefficient_sum += std::pow(j + 1.0, p - 2.0) * std::pow(std::abs(coeffs[j]), p);
  }
  out.norm_power = detail::circle_p_mean(coeffs, p, q);
  return out;
}

/// q >= 2: ||f||_q^q against sum (j+1)^{q-2}|a_j|^q.
inline CoefficientCheck hardy_littlewood_converse(std::span<const Complex> coeffs, double q_exp, const QuadSpec& q = {}) {
  detail::check_coeffs(coeffs);
  if (!(q_exp >= 2.0)) throw std::domain_error("hardy_littlewood_converse: exponent must be >= 2");
  CoefficientCheck out;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    out.coefficient_sum += std::pow(j + 1.0, q_exp - 2.0) * std::pow(std::abs(coeffs[j]), q_exp);
  }
  out.norm_power = detail::circle_p_mean(coeffs, q_exp, q);
  return out;
}

// ---------------------------------------------------------------------------
// Sphere moments of |<xi, w>|^d by slice quadrature

/// int_S |<xi, w>|^d dsigma(xi) computed by the slice reduction.
inline double sphere_power_mean(const BallPoint& w, double d, const QuadSpec& q = {}) {
  return sphere_slice_average([&](Complex t) { return std::pow(std::abs(t), d); }, w, detail::analysis_quad(q));
}

// ---------------------------------------------------------------------------
// Theorem report

enum class Conclusion { consistent_bounded, consistent_unbounded, inconsistent, inconclusive };

inline const char* to_string(Conclusion c) {
  switch (c) {
    case Conclusion::consistent_bounded: return "CONSISTENT_BOUNDED";
    case Conclusion::consistent_unbounded: return "CONSISTENT_UNBOUNDED";
    case Conclusion::inconsistent: return "INCONSISTENT";
    case Conclusion::inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

struct TheoremConfig {
  int k_max = 12;           // functional radii 1 - 2^{-k}, k = 1..k_max
  int tail_k_max = 24;      // diagnostic radii 1 - 2^{-k}, k = 0..tail_k_max
  int cesaro_min_exp = 4;   // N = 2^cesaro_min_exp .. 2^cesaro_max_exp
  int cesaro_max_exp = 12;
  int moment_n_max = 1024;
  long degree_cap = 1L << 21;
  double tolerance = 1e-7;  // relative target for the profiles
  unsigned threads = 1;
  DivergenceRule rule{};
};

struct ProfilePoint {
  double parameter = 0.0;
  double value = 0.0;
};

struct TrendVerdict {
  bool divergent = false;
  bool bounded = false;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double max_value = std::numeric_limits<double>::quiet_NaN();
};

struct TheoremReport {
  std::string weight_label;
  int n = 0;
  DiagnosticsReport dhat_verdict;      // tail-halving, the canonical criterion
  DiagnosticsReport moment_verdict;    // moment doubling cross-check
  std::vector<ProfilePoint> functional_profile;  // (r, M(r))
  std::vector<ProfilePoint> majorant_profile;    // (r, U(r))
  std::vector<ProfilePoint> lower_profile;       // (r, (1-r^2) lower_bound_series(r))
  std::vector<ProfilePoint> cesaro_profile;      // (N, cesaro_lower(N))
  TrendVerdict functional_trend;
  TrendVerdict cesaro_trend;
  double sandwich_lower = std::numeric_limits<double>::quiet_NaN();  // max (1-r^2) LB / M
  double sandwich_upper = std::numeric_limits<double>::quiet_NaN();  // max M / ((1-r^2) U)
  Conclusion conclusion = Conclusion::inconclusive;
  std::vector<std::string> notes;
  std::vector<std::string> failures;
};

namespace detail {

/// Last-quartile log-slope of a positive profile against `scale(parameter)`.
template <class Scale>
TrendVerdict profile_trend(std::span<const ProfilePoint> profile, Scale&& scale, const DivergenceRule& rule) {
  TrendVerdict t;
  if (profile.size() < 4) return t;
  std::vector<double> xs;
  std::vector<double> ys;
  double mx = 0.0;
  for (const auto& p : profile) {
    if (!(p.value > 0.0) || !std::isfinite(p.value)) return t;
    xs.push_back(scale(p.parameter));
    ys.push_back(std::log(p.value));
    mx = std::max(mx, p.value);
  }
  const TrendSummary tr = last_quartile_trend(xs, ys);
  t.slope = tr.slope;
  t.max_value = mx;
  t.divergent = tr.slope > rule.slope_threshold && tr.increasing;
  t.bounded = tr.slope <= rule.slope_threshold && mx < rule.max_ratio;
  return t;
}

}  // namespace detail

inline TheoremReport theorem_check(const RadialWeight& w, int n, const TheoremConfig& config = {}) {
  if (n < 1) throw std::invalid_argument("theorem_check: n must be >= 1");
  if (config.k_max < 4) throw std::invalid_argument("theorem_check: k_max must be >= 4");
  TheoremReport rep;
  rep.weight_label = w.label();
  rep.n = n;
  auto table = std::make_shared<const MomentTable>(w);
  const KernelCoeffs k(table, n, config.degree_cap);
  QuadSpec q;
  q.tolerance = config.tolerance;

  auto guarded = [&](const char* what, auto&& body) {
    try {
      body();
      return true;
    } catch (const std::exception& e) {
      rep.failures.push_back(std::string(what) + ": " + e.what());
      return false;
    }
  };

  guarded("dhat_tail", [&] { rep.dhat_verdict = is_dhat_tail(w, dyadic_radii(config.tail_k_max), config.rule); });
  guarded("dhat_moments", [&] { rep.moment_verdict = is_dhat_moments(*table, config.moment_n_max, config.rule); });
  if (rep.dhat_verdict.verdict != rep.moment_verdict.verdict) {
    rep.notes.push_back(std::string("moment-doubling verdict ") + to_string(rep.moment_verdict.verdict) +
                        " differs from tail-halving verdict " + to_string(rep.dhat_verdict.verdict));
  }

  // Radial sweeps. A truncation failure near the boundary ends the M profile
  // there: the kernel degree needed has outgrown the cap, which for weights
  // outside the class is itself expected.
  std::vector<double> radii;
  for (int kk = 1; kk <= config.k_max; ++kk) radii.push_back(1.0 - std::exp2(-kk));
  const std::size_t count = radii.size();
  std::vector<std::optional<double>> m_values(count);
  std::vector<std::optional<double>> u_values(count);
  std::vector<std::optional<double>> lb_values(count);
  std::vector<std::string> sweep_errors(count);
  std::vector<bool> truncated(count, false);
  const BoundednessFunctional functional(k, q, config.degree_cap);
  parallel_for(count, config.threads, [&](std::size_t i) {
    const double r = radii[i];
    try {
      m_values[i] = functional(r);
    } catch (const TruncationError&) {
      truncated[i] = true;
    } catch (const std::exception& e) {
      sweep_errors[i] = std::string("functional at r=") + std::to_string(r) + ": " + e.what();
    }
    try {
      u_values[i] = majorant(w, r, q);
    } catch (const std::exception& e) {
      if (sweep_errors[i].empty()) sweep_errors[i] = std::string("majorant at r=") + std::to_string(r) + ": " + e.what();
    }
    try {
      lb_values[i] = (1.0 - r * r) * lower_bound_series(*table, n, r, config.degree_cap).value;
    } catch (const TruncationError&) {
    } catch (const std::exception& e) {
      if (sweep_errors[i].empty()) sweep_errors[i] = std::string("lower bound at r=") + std::to_string(r) + ": " + e.what();
    }
  });
  for (const auto& e : sweep_errors) {
    if (!e.empty()) rep.failures.push_back(e);
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (truncated[i]) {
      rep.notes.push_back("functional profile stops at r=" + std::to_string(radii[i]) + ": kernel degree cap " +
                          std::to_string(config.degree_cap) + " reached");
      break;
    }
    if (m_values[i]) rep.functional_profile.push_back({radii[i], *m_values[i]});
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (u_values[i]) rep.majorant_profile.push_back({radii[i], *u_values[i]});
    if (lb_values[i]) rep.lower_profile.push_back({radii[i], *lb_values[i]});
  }

  guarded("cesaro", [&] {
    for (int e = config.cesaro_min_exp; e <= config.cesaro_max_exp; ++e) {
      const long N = 1L << e;
      rep.cesaro_profile.push_back({static_cast<double>(N), cesaro_lower(*table, n, N)});
    }
  });

  rep.functional_trend =
      detail::profile_trend(rep.functional_profile, [](double r) { return -std::log1p(-r); }, config.rule);
  rep.cesaro_trend = detail::profile_trend(rep.cesaro_profile, [](double N) { return std::sqrt(N); }, config.rule);

  // Sandwich constants over radii where all three quantities exist.
  for (const auto& m : rep.functional_profile) {
    for (const auto& u : rep.majorant_profile) {
      if (u.parameter != m.parameter) continue;
      const double envelope = (1.0 - m.parameter * m.parameter) * u.value;
      const double up = m.value / envelope;
      rep.sandwich_upper = std::isnan(rep.sandwich_upper) ? up : std::max(rep.sandwich_upper, up);
    }
    for (const auto& l : rep.lower_profile) {
      if (l.parameter != m.parameter) continue;
      const double lo = l.value / m.value;
      rep.sandwich_lower = std::isnan(rep.sandwich_lower) ? lo : std::max(rep.sandwich_lower, lo);
    }
  }

  const Verdict v = rep.dhat_verdict.verdict;
  if (!rep.failures.empty()) {
    rep.conclusion = Conclusion::inconclusive;
  } else if (v == Verdict::in_class && rep.functional_trend.bounded && !rep.cesaro_trend.divergent) {
    rep.conclusion = Conclusion::consistent_bounded;
  } else if (v == Verdict::not_in_class && rep.cesaro_trend.divergent) {
    rep.conclusion = Conclusion::consistent_unbounded;
  } else if ((v == Verdict::in_class && (rep.functional_trend.divergent || rep.cesaro_trend.divergent)) ||
             (v == Verdict::not_in_class && rep.cesaro_trend.bounded && rep.functional_trend.bounded)) {
    rep.conclusion = Conclusion::inconsistent;
  } else {
    rep.conclusion = Conclusion::inconclusive;
  }
  return rep;
}

}  // namespace bergman
