#pragma once
// Radial weights on [0,1), their tails rho_hat(r) = int_r^1 rho and moments
// rho_x = int_0^1 t^x rho(t) dt, and numerical class tests for D-hat and for
// regular weights.
//
// Integrals are computed in log-scaled form on the gap variable u = 1 - r so
// that weights decaying like exp(-c/(1-r)) stay representable near the
// boundary.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

// Boost 1.74 pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "bergman/quadrature.hpp"

namespace bergman {

/// (1 - r^2)^alpha, alpha > -1.
struct StandardWeight {
  double alpha = 0.0;
};

/// exp(-c / (1 - r)^beta).
struct ExponentialWeight {
  double c = 1.0;
  double beta = 1.0;
};

/// (1 - r)^gamma * log(e / (1 - r))^-2, gamma > -1.
struct LogarithmicWeight {
  double gamma = 0.0;
};

/// Samples (r_i, value_i) joined by a monotone cubic (PCHIP) interpolant of
/// log(value); outside the sample range the end segments are extended.
class TabulatedWeight {
 public:
  TabulatedWeight(std::vector<double> r, std::vector<double> values) : r_(std::move(r)), v_(std::move(values)) {
    if (r_.size() != v_.size()) throw std::invalid_argument("tabulated weight: r and value columns differ in length");
    if (r_.size() < 4) throw std::invalid_argument("tabulated weight: at least 4 samples are required");
    for (std::size_t i = 0; i < r_.size(); ++i) {
      if (!(r_[i] >= 0.0 && r_[i] < 1.0)) throw std::invalid_argument("tabulated weight: r must lie in [0,1)");
      if (i > 0 && !(r_[i] > r_[i - 1])) throw std::invalid_argument("tabulated weight: r must be strictly increasing");
      if (!(v_[i] > 0.0) || !std::isfinite(v_[i])) throw std::invalid_argument("tabulated weight: values must be finite and > 0");
    }
    std::vector<double> xs = r_;
    std::vector<double> ys(v_.size());
    std::transform(v_.begin(), v_.end(), ys.begin(), [](double v) { return std::log(v); });
    log_values_ = ys;
    spline_ = std::make_shared<Spline>(std::move(xs), std::move(ys));
    first_slope_ = spline_->prime(r_.front());
    last_slope_ = spline_->prime(r_.back());
  }

  [[nodiscard]] const std::vector<double>& r() const { return r_; }
  [[nodiscard]] const std::vector<double>& values() const { return v_; }
  [[nodiscard]] double last_sample() const { return r_.back(); }
  [[nodiscard]] double first_sample() const { return r_.front(); }

  [[nodiscard]] double log_value(double r) const {
    if (r >= r_.front() && r <= r_.back()) return (*spline_)(r);
    if (r > r_.back()) {
      const std::size_t n = r_.size();
      return hermite(r_[n - 2], r_[n - 1], log_values_[n - 2], log_values_[n - 1], spline_->prime(r_[n - 2]),
                     last_slope_, r);
    }
    return hermite(r_[0], r_[1], log_values_[0], log_values_[1], first_slope_, spline_->prime(r_[1]), r);
  }

 private:
  using Spline = boost::math::interpolators::pchip<std::vector<double>>;

  static double hermite(double x0, double x1, double y0, double y1, double s0, double s1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * s0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * s1;
  }

  std::vector<double> r_;
  std::vector<double> v_;
  std::vector<double> log_values_;
  std::shared_ptr<Spline> spline_;
  double first_slope_ = 0.0;
  double last_slope_ = 0.0;
};

using WeightKind = std::variant<StandardWeight, ExponentialWeight, LogarithmicWeight, TabulatedWeight>;

/// A positive integrable radial weight on [0,1).
class RadialWeight {
 public:
  RadialWeight(WeightKind kind, std::string label) : kind_(std::move(kind)), label_(std::move(label)) { validate(); }

  static RadialWeight standard(double alpha, std::string label = {}) {
    return {StandardWeight{alpha}, label.empty() ? "standard(alpha=" + num(alpha) + ")" : std::move(label)};
  }
  static RadialWeight exponential(double c, double beta, std::string label = {}) {
    return {ExponentialWeight{c, beta},
            label.empty() ? "exponential(c=" + num(c) + ",beta=" + num(beta) + ")" : std::move(label)};
  }
  static RadialWeight logarithmic(double gamma, std::string label = {}) {
    return {LogarithmicWeight{gamma}, label.empty() ? "logarithmic(gamma=" + num(gamma) + ")" : std::move(label)};
  }
  static RadialWeight tabulated(std::vector<double> r, std::vector<double> values, std::string label = {}) {
    return {TabulatedWeight(std::move(r), std::move(values)), label.empty() ? "tabulated" : std::move(label)};
  }

  [[nodiscard]] const WeightKind& kind() const { return kind_; }
  [[nodiscard]] const std::string& label() const { return label_; }

  [[nodiscard]] std::string kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, StandardWeight>) return "standard";
          if constexpr (std::is_same_v<K, ExponentialWeight>) return "exponential";
          if constexpr (std::is_same_v<K, LogarithmicWeight>) return "logarithmic";
          if constexpr (std::is_same_v<K, TabulatedWeight>) return "tabulated";
        },
        kind_);
  }

  /// log rho(1 - u) for u in (0, 1].
  [[nodiscard]] double log_density_at_gap(double u) const {
    return std::visit(
        [u](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, StandardWeight>) {
            return k.alpha == 0.0 ? 0.0 : k.alpha * (std::log(u) + std::log(2.0 - u));
          } else if constexpr (std::is_same_v<K, ExponentialWeight>) {
            return -k.c * std::pow(u, -k.beta);
          } else if constexpr (std::is_same_v<K, LogarithmicWeight>) {
            const double lu = std::log(u);
            return k.gamma * lu - 2.0 * std::log(1.0 - lu);
          } else {
            return k.log_value(1.0 - u);
          }
        },
        kind_);
  }

  [[nodiscard]] double density_at_gap(double u) const {
    if (std::holds_alternative<StandardWeight>(kind_) && std::get<StandardWeight>(kind_).alpha == 0.0) return 1.0;
    return std::exp(log_density_at_gap(u));
  }

  /// rho(r) on [0,1).
  [[nodiscard]] double operator()(double r) const {
    if (!(r >= 0.0 && r < 1.0)) throw std::domain_error("eval_weight: r must lie in [0,1)");
    return std::visit(
        [r, this](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, StandardWeight>) {
            return std::pow(1.0 - r * r, k.alpha);
          } else if constexpr (std::is_same_v<K, ExponentialWeight>) {
            return std::exp(-k.c / std::pow(1.0 - r, k.beta));
          } else if constexpr (std::is_same_v<K, LogarithmicWeight>) {
            const double g = 1.0 - r;
            const double l = std::log(std::numbers::e / g);
            return std::pow(g, k.gamma) / (l * l);
          } else {
            return std::exp(k.log_value(r));
          }
        },
        kind_);
  }

  /// Tabulated weights are extended past their last sample; diagnostics note it.
  [[nodiscard]] std::optional<double> extrapolated_beyond() const {
    if (const auto* t = std::get_if<TabulatedWeight>(&kind_)) return t->last_sample();
    return std::nullopt;
  }

 private:
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

  void validate() const {
    std::visit(
        [](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, StandardWeight>) {
            if (!(k.alpha > -1.0)) throw std::invalid_argument("standard weight: alpha must be > -1");
          } else if constexpr (std::is_same_v<K, ExponentialWeight>) {
            if (!(k.c > 0.0) || !(k.beta > 0.0)) throw std::invalid_argument("exponential weight: c and beta must be > 0");
          } else if constexpr (std::is_same_v<K, LogarithmicWeight>) {
            if (!(k.gamma > -1.0)) throw std::invalid_argument("logarithmic weight: gamma must be > -1");
          }
        },
        kind_);
  }

  WeightKind kind_;
  std::string label_;
};

inline double eval_weight(const RadialWeight& w, double r) { return w(r); }

/// log of an integral, with a relative error estimate.
struct LogIntegral {
  double log_value = -std::numeric_limits<double>::infinity();
  double rel_error = 0.0;

  [[nodiscard]] double value() const { return std::exp(log_value); }
};

/// log int_0^upper exp(log_f(u)) du. The integrand is rescaled by its largest
/// panel mass, found by probing u = upper 2^{-k/2}, before integrating.
template <class LogF>
LogIntegral log_integrate_gap(LogF&& log_f, double upper, const QuadSpec& q) {
  double scale = -std::numeric_limits<double>::infinity();
  constexpr double kDrop = 60.0;
  for (int k = 0; k < 2200; ++k) {
    const double u = upper * std::exp2(-0.5 * k);
    if (u < 1e-300) break;
    const double mass = log_f(u) + std::log(u);
    if (mass > scale) scale = mass;
    if (std::isfinite(scale) && mass < scale - kDrop && k > 8) break;
  }
  if (!std::isfinite(scale)) return {};
  const auto result = integrate_graded<double>(
      [&](double u) {
        const double e = log_f(u) - scale;
        return e < -745.0 ? 0.0 : std::exp(e);
      },
      upper, q);
  if (!(result.value > 0.0)) return {};
  return {scale + std::log(result.value), result.error_estimate / result.value};
}

inline QuadSpec default_weight_quad() { return QuadSpec::relative(1e-12, 20000); }

/// log rho_hat(1 - gap).
inline LogIntegral log_tail_at_gap(const RadialWeight& w, double gap, const QuadSpec& q = default_weight_quad()) {
  if (!(gap > 0.0 && gap <= 1.0)) throw std::domain_error("tail: r must lie in [0,1)");
  try {
    return log_integrate_gap([&](double u) { return w.log_density_at_gap(u); }, gap, q);
  } catch (const NumericError& e) {
    throw NumericError("tail: " + std::string(e.what()), e.partial_value(), e.error_estimate());
  }
}

/// rho_hat(r) = int_r^1 rho(s) ds.
inline double tail(const RadialWeight& w, double r, const QuadSpec& q = default_weight_quad()) {
  if (!(r >= 0.0 && r < 1.0)) throw std::domain_error("tail: r must lie in [0,1)");
  return log_tail_at_gap(w, 1.0 - r, q).value();
}

inline double log_tail(const RadialWeight& w, double r, const QuadSpec& q = default_weight_quad()) {
  if (!(r >= 0.0 && r < 1.0)) throw std::domain_error("tail: r must lie in [0,1)");
  return log_tail_at_gap(w, 1.0 - r, q).log_value;
}

struct MomentEntry {
  double value = 0.0;
  double log_value = 0.0;
  double abs_error_estimate = 0.0;
};

/// Memoized rho_x = int_0^1 t^x rho(t) dt for real x >= 1.
///
/// `tolerance` is relative. Reads are concurrent; inserting the same
/// exponent twice stores identical values.
class MomentTable {
 public:
  /// Moments past this exponent are interpolated by `smooth_log_value`.
  static constexpr double kExactLimit = 16384.0;
  static constexpr int kKnotsPerOctave = 32;

  explicit MomentTable(RadialWeight weight, double tolerance = 1e-12)
      : weight_(std::move(weight)), tolerance_(tolerance) {
    if (!(tolerance_ > 0.0)) throw std::invalid_argument("MomentTable: tolerance must be > 0");
  }

  [[nodiscard]] const RadialWeight& weight() const { return weight_; }
  [[nodiscard]] double tolerance() const { return tolerance_; }

  [[nodiscard]] MomentEntry entry(double x) const {
    if (!(x >= 1.0) || !std::isfinite(x)) throw std::domain_error("moment: x must be >= 1");
    {
      std::shared_lock lock(mutex_);
      if (auto it = entries_.find(x); it != entries_.end()) return it->second;
    }
    const MomentEntry e = compute(x);
    std::unique_lock lock(mutex_);
    entries_.emplace(x, e);
    return e;
  }

  [[nodiscard]] double value(double x) const { return entry(x).value; }
  [[nodiscard]] double log_value(double x) const { return entry(x).log_value; }

  /// log rho_x; exact quadrature up to kExactLimit, beyond that cubic
  /// interpolation in log x of exact values on a geometric knot grid.
  [[nodiscard]] double smooth_log_value(double x) const {
    if (x <= kExactLimit) return log_value(x);
    const double pos = std::log2(x / kExactLimit) * kKnotsPerOctave;
    const int base = std::max(1, static_cast<int>(std::floor(pos)));
    double log_x[4];
    double log_m[4];
    for (int i = 0; i < 4; ++i) {
      const int j = base - 1 + i;
      const double xk = kExactLimit * std::exp2(static_cast<double>(j) / kKnotsPerOctave);
      log_x[i] = std::log(xk);
      log_m[i] = log_value(xk);
    }
    const double lx = std::log(x);
    double result = 0.0;
    for (int i = 0; i < 4; ++i) {
      double basis = 1.0;
      for (int j = 0; j < 4; ++j) {
        if (j != i) basis *= (lx - log_x[j]) / (log_x[i] - log_x[j]);
      }
      result += basis * log_m[i];
    }
    return result;
  }

  [[nodiscard]] std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  [[nodiscard]] std::vector<std::pair<double, MomentEntry>> snapshot() const {
    std::shared_lock lock(mutex_);
    return {entries_.begin(), entries_.end()};
  }

 private:
  [[nodiscard]] MomentEntry compute(double x) const {
    const QuadSpec q = QuadSpec::relative(tolerance_, 20000);
    LogIntegral li;
    try {
      li = log_integrate_gap([&](double u) { return x * std::log1p(-u) + weight_.log_density_at_gap(u); }, 1.0, q);
    } catch (const NumericError& e) {
      throw NumericError("moment: " + std::string(e.what()), e.partial_value(), e.error_estimate());
    }
    if (!std::isfinite(li.log_value)) throw NumericError("moment: integral vanished numerically", 0.0, 0.0);
    const double v = li.value();
    return {v, li.log_value, v * li.rel_error};
  }

  RadialWeight weight_;
  double tolerance_;
  mutable std::shared_mutex mutex_;
  mutable std::map<double, MomentEntry> entries_;
};

inline double moment(const MomentTable& t, double x) { return t.value(x); }

// ---------------------------------------------------------------------------
// Class diagnostics

enum class Verdict { in_class, not_in_class, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::in_class: return "IN_CLASS";
    case Verdict::not_in_class: return "NOT_IN_CLASS";
    case Verdict::inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

struct Evidence {
  double parameter = 0.0;
  double ratio = 0.0;
  double log_ratio = 0.0;
  bool flagged = false;  // a value under/overflowed; excluded from the max
};

struct DiagnosticsReport {
  Verdict verdict = Verdict::inconclusive;
  double estimated_constant = std::numeric_limits<double>::quiet_NaN();
  std::vector<Evidence> evidence;
  std::string criterion_id;
  double last_quartile_slope = std::numeric_limits<double>::quiet_NaN();
  double window_min = std::numeric_limits<double>::quiet_NaN();
  double window_max = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> c0_ratio;  // rho_hat(0) / rho_hat(1/2), moment criterion only
  std::vector<std::string> notes;
};

/// Bounded vs divergent decision on a ratio sequence. Slopes are taken of
/// log(ratio) against the log of the parameter scale over the last quartile.
struct DivergenceRule {
  double slope_threshold = 0.05;
  double max_ratio = 1e6;
};

/// Least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

/// Indices of the last quartile (at least three points) of a sequence.
inline std::size_t last_quartile_start(std::size_t count) {
  const std::size_t q = std::max<std::size_t>(3, (count + 3) / 4);
  return count > q ? count - q : 0;
}

struct TrendSummary {
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool increasing = false;
  std::size_t points = 0;
};

/// Slope and monotonicity of y over the last quartile of (x, y).
inline TrendSummary last_quartile_trend(std::span<const double> x, std::span<const double> y) {
  TrendSummary s;
  s.points = x.size();
  if (x.size() < 3) return s;
  const std::size_t start = last_quartile_start(x.size());
  s.slope = ls_slope(x.subspan(start), y.subspan(start));
  s.increasing = true;
  for (std::size_t i = start + 1; i < y.size(); ++i) {
    if (!(y[i] > y[i - 1])) s.increasing = false;
  }
  return s;
}

/// Fills verdict, slope and constants of `report` from its evidence.
/// `scale(parameter)` is the abscissa for the slope. One-sided checks ask
/// for boundedness above; two-sided checks ask for a window [1/C, C].
template <class Scale>
void classify(DiagnosticsReport& report, Scale&& scale, bool two_sided, const DivergenceRule& rule) {
  std::vector<double> xs;
  std::vector<double> ys;
  double max_ratio = -std::numeric_limits<double>::infinity();
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& e : report.evidence) {
    if (std::isfinite(e.log_ratio)) {
      xs.push_back(scale(e.parameter));
      ys.push_back(e.log_ratio);
    }
    if (!e.flagged) {
      max_ratio = std::max(max_ratio, e.ratio);
      min_ratio = std::min(min_ratio, e.ratio);
    }
  }
  report.window_min = min_ratio;
  report.window_max = max_ratio;
  report.estimated_constant = max_ratio;
  const TrendSummary trend = last_quartile_trend(xs, ys);
  report.last_quartile_slope = trend.slope;
  if (trend.points < 4 || !std::isfinite(trend.slope) || !std::isfinite(max_ratio)) {
    report.verdict = Verdict::inconclusive;
    report.notes.emplace_back("too few usable evidence points for a trend decision");
    return;
  }
  if (!two_sided) {
    if (trend.slope <= rule.slope_threshold && max_ratio < rule.max_ratio) {
      report.verdict = Verdict::in_class;
    } else if (trend.slope > rule.slope_threshold && trend.increasing) {
      report.verdict = Verdict::not_in_class;
    } else {
      report.verdict = Verdict::inconclusive;
    }
    return;
  }
  const double width = max_ratio / min_ratio;
  if (std::abs(trend.slope) <= rule.slope_threshold && width < rule.max_ratio && min_ratio > 0.0) {
    report.verdict = Verdict::in_class;
  } else if (std::abs(trend.slope) > rule.slope_threshold) {
    bool monotone = true;
    const std::size_t start = last_quartile_start(ys.size());
    const bool up = trend.slope > 0.0;
    for (std::size_t i = start + 1; i < ys.size(); ++i) {
      if (up ? !(ys[i] > ys[i - 1]) : !(ys[i] < ys[i - 1])) monotone = false;
    }
    report.verdict = monotone ? Verdict::not_in_class : Verdict::inconclusive;
  } else {
    report.verdict = Verdict::inconclusive;
  }
}

/// r_k = 1 - 2^-k for k = k_min..k_max.
inline std::vector<double> dyadic_radii(int k_max = 24, int k_min = 0) {
  std::vector<double> r;
  for (int k = k_min; k <= k_max; ++k) r.push_back(1.0 - std::exp2(-k));
  return r;
}

namespace detail {

inline void check_radii(std::span<const double> radii) {
  if (radii.empty()) throw std::invalid_argument("radii grid must be nonempty");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] >= 0.0 && radii[i] < 1.0)) throw std::domain_error("radii grid must lie in [0,1)");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw std::invalid_argument("radii grid must be strictly increasing");
  }
}

inline Evidence ratio_evidence(double parameter, double log_num, double log_den) {
  constexpr double kLogMin = -708.0;
  Evidence e;
  e.parameter = parameter;
  e.log_ratio = log_num - log_den;
  e.ratio = std::exp(e.log_ratio);
  e.flagged = !(log_num > kLogMin) || !(log_den > kLogMin) || !std::isfinite(e.ratio) || e.ratio == 0.0;
  return e;
}

inline double boundary_scale(double r) { return -std::log1p(-r); }

inline void note_extrapolation(const RadialWeight& w, DiagnosticsReport& report) {
  if (auto last = w.extrapolated_beyond()) {
    report.notes.push_back("tabulated weight extrapolated beyond r=" + std::to_string(*last));
  }
}

}  // namespace detail

/// Tail-halving test: rho_hat(r) / rho_hat((1+r)/2) over the grid.
inline DiagnosticsReport is_dhat_tail(const RadialWeight& w, std::span<const double> radii,
                                      const DivergenceRule& rule = {}) {
  detail::check_radii(radii);
  DiagnosticsReport report;
  report.criterion_id = "dhat_tail_halving";
  for (double r : radii) {
    const double gap = 1.0 - r;
    const double num = log_tail_at_gap(w, gap).log_value;
    const double den = log_tail_at_gap(w, 0.5 * gap).log_value;
    report.evidence.push_back(detail::ratio_evidence(r, num, den));
  }
  classify(report, detail::boundary_scale, false, rule);
  detail::note_extrapolation(w, report);
  return report;
}

/// Moment-doubling test: rho_n / rho_2n for n = 1, 2, 4, ..., n_max, plus
/// the rho_hat(0) <= C0 rho_hat(1/2) condition.
inline DiagnosticsReport is_dhat_moments(const MomentTable& t, int n_max = 1024, const DivergenceRule& rule = {}) {
  if (n_max < 4) throw std::invalid_argument("is_dhat_moments: n_max must be >= 4");
  DiagnosticsReport report;
  report.criterion_id = "dhat_moment_doubling";
  std::vector<int> ns;
  for (int m = 1; m <= n_max; m *= 2) ns.push_back(m);
  if (ns.back() != n_max) ns.push_back(n_max);
  for (int m : ns) {
    const double num = t.log_value(static_cast<double>(m));
    const double den = t.log_value(2.0 * m);
    report.evidence.push_back(detail::ratio_evidence(m, num, den));
  }
  classify(report, [](double m) { return std::log(m); }, false, rule);
  const double c0 = std::exp(log_tail_at_gap(t.weight(), 1.0).log_value - log_tail_at_gap(t.weight(), 0.5).log_value);
  report.c0_ratio = c0;
  if (!std::isfinite(c0)) report.verdict = Verdict::inconclusive;
  detail::note_extrapolation(t.weight(), report);
  return report;
}

/// rho_x / rho_hat(1 - 1/x).
inline double moment_tail_ratio(const MomentTable& t, double x) {
  if (!(x >= 1.0)) throw std::domain_error("moment_tail_ratio: x must be >= 1");
  return std::exp(t.log_value(x) - log_tail_at_gap(t.weight(), 1.0 / x).log_value);
}

/// Two-sided window test of moment_tail_ratio over the exponents `xs`.
inline DiagnosticsReport moment_tail_window(const MomentTable& t, std::span<const double> xs,
                                            const DivergenceRule& rule = {}) {
  DiagnosticsReport report;
  report.criterion_id = "dhat_moment_tail";
  for (double x : xs) {
    if (!(x >= 1.0)) throw std::domain_error("moment_tail_window: x must be >= 1");
    report.evidence.push_back(
        detail::ratio_evidence(x, t.log_value(x), log_tail_at_gap(t.weight(), 1.0 / x).log_value));
  }
  classify(report, [](double x) { return std::log(x); }, true, rule);
  detail::note_extrapolation(t.weight(), report);
  return report;
}

/// Regularity test: rho_hat(r) / ((1-r) rho(r)) must stay in a window.
inline DiagnosticsReport is_regular(const RadialWeight& w, std::span<const double> radii,
                                    const DivergenceRule& rule = {}) {
  detail::check_radii(radii);
  DiagnosticsReport report;
  report.criterion_id = "regular";
  for (double r : radii) {
    const double gap = 1.0 - r;
    const double num = log_tail_at_gap(w, gap).log_value;
    const double den = std::log(gap) + w.log_density_at_gap(gap);
    report.evidence.push_back(detail::ratio_evidence(r, num, den));
  }
  classify(report, detail::boundary_scale, true, rule);
  detail::note_extrapolation(w, report);
  return report;
}

struct BetaEstimate {
  bool admissible = false;
  double beta0 = std::numeric_limits<double>::quiet_NaN();
  double constant = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<double, double>> sup_by_beta;  // (beta, sup over all pairs)
};

/// Smallest grid beta with
///   sup_{r <= t} rho_hat(r) (1-t)^beta / (rho_hat(t) (1-r)^beta)
/// bounded, where "bounded" means the running sup over growing radii has a
/// last-quartile log-slope within the rule and stays below max_ratio.
inline BetaEstimate dhat_beta_estimate(const RadialWeight& w, std::span<const double> radii,
                                       std::span<const double> betas, const DivergenceRule& rule = {}) {
  detail::check_radii(radii);
  std::vector<double> log_tails(radii.size());
  std::vector<double> log_gaps(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    log_gaps[i] = std::log1p(-radii[i]);
    log_tails[i] = log_tail_at_gap(w, 1.0 - radii[i]).log_value;
  }
  std::vector<double> sorted(betas.begin(), betas.end());
  std::sort(sorted.begin(), sorted.end());
  BetaEstimate out;
  for (double beta : sorted) {
    // running[k] = log sup over pairs i <= j <= k
    std::vector<double> running(radii.size());
    std::vector<double> scales(radii.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < radii.size(); ++j) {
      for (std::size_t i = 0; i <= j; ++i) {
        const double v = log_tails[i] - log_tails[j] + beta * (log_gaps[j] - log_gaps[i]);
        best = std::max(best, v);
      }
      running[j] = best;
      scales[j] = -log_gaps[j];
    }
    const double sup = std::exp(best);
    out.sup_by_beta.emplace_back(beta, sup);
    const TrendSummary trend = last_quartile_trend(scales, running);
    const bool bounded = std::isfinite(trend.slope) && trend.slope <= rule.slope_threshold && sup < rule.max_ratio;
    if (bounded && !out.admissible) {
      out.admissible = true;
      out.beta0 = beta;
      out.constant = sup;
    }
  }
  return out;
}

}  // namespace bergman
