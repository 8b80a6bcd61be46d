#pragma once
// One-dimensional graded quadrature, disk and sphere-slice integration,
// and polar integration over the unit ball B_n.
//
// All measures are normalized: dA on the disk, dsigma on the sphere and dv
// on the ball each have total mass 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <limits>
#include <mutex>
#include <numbers>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <fftw3.h>

namespace bergman {

using Complex = std::complex<double>;

/// Tolerances and limits for the adaptive rules.
///
/// `tolerance` is absolute. `rel_tolerance` (0 disables it) is relative to
/// the running value; a rule stops once the error estimate is below the
/// larger of the two. `grading` sets the geometric panel ratio
/// 1/(1+grading) toward a singular endpoint, so the default 1 reproduces the
/// breakpoints 1 - 2^-k.
struct QuadSpec {
  double tolerance = 1e-10;
  double rel_tolerance = 0.0;
  int max_subdivisions = 4000;
  double grading = 1.0;

  void validate() const {
    if (!(tolerance > 0.0) || !(rel_tolerance >= 0.0)) {
      throw std::invalid_argument("QuadSpec: tolerance must be > 0 and rel_tolerance >= 0");
    }
    if (max_subdivisions < 8) {
      throw std::invalid_argument("QuadSpec: max_subdivisions must be >= 8");
    }
    if (!(grading >= 1.0)) {
      throw std::invalid_argument("QuadSpec: grading must be >= 1");
    }
  }

  [[nodiscard]] double target(double magnitude) const {
    return std::max(tolerance, rel_tolerance * std::abs(magnitude));
  }

  /// Pure relative control; the absolute floor is the smallest normal double.
  static QuadSpec relative(double rel, int max_subdivisions = 4000) {
    QuadSpec q;
    q.tolerance = std::numeric_limits<double>::min();
    q.rel_tolerance = rel;
    q.max_subdivisions = max_subdivisions;
    return q;
  }

  /// Same limits with both tolerances scaled (used for nested rules).
  [[nodiscard]] QuadSpec scaled(double factor) const {
    QuadSpec q = *this;
    q.tolerance = std::max(tolerance * factor, std::numeric_limits<double>::min());
    q.rel_tolerance = rel_tolerance * factor;
    return q;
  }
};

template <class T = double>
struct QuadResult {
  T value{};
  double error_estimate = 0.0;
  int subdivisions = 0;
};

/// Raised when a numerical procedure cannot meet its tolerance; carries the
/// best value reached so far.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double partial_value, double error_estimate)
      : std::runtime_error(what), partial_(partial_value), error_(error_estimate) {}

  [[nodiscard]] double partial_value() const noexcept { return partial_; }
  [[nodiscard]] double error_estimate() const noexcept { return error_; }

 private:
  double partial_;
  double error_;
};

namespace detail {

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const Complex& v) { return std::abs(v); }

template <class T>
struct Panel {
  double lo = 0.0;
  double hi = 0.0;
  T value{};
  double error = 0.0;
};

template <class T>
struct PanelOrder {
  bool operator()(const Panel<T>& a, const Panel<T>& b) const { return a.error < b.error; }
};

/// 15-point Gauss-Kronrod on [lo, hi] with the QUADPACK error heuristic.
template <class T, class F>
Panel<T> gauss_kronrod15(F& f, double lo, double hi) {
  using boost::math::quadrature::gauss;
  using boost::math::quadrature::gauss_kronrod;
  static const auto& xk = gauss_kronrod<double, 15>::abscissa();
  static const auto& wk = gauss_kronrod<double, 15>::weights();
  static const auto& wg = gauss<double, 7>::weights();

  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  std::array<T, 15> fv{};
  fv[0] = f(center);
  for (std::size_t i = 1; i < 8; ++i) {
    const double dx = half * xk[i];
    fv[2 * i - 1] = f(center - dx);
    fv[2 * i] = f(center + dx);
  }

  T kronrod = wk[0] * fv[0];
  T gauss_sum = wg[0] * fv[0];
  double abs_sum = wk[0] * magnitude(fv[0]);
  for (std::size_t i = 1; i < 8; ++i) {
    const T pair = fv[2 * i - 1] + fv[2 * i];
    kronrod += wk[i] * pair;
    abs_sum += wk[i] * (magnitude(fv[2 * i - 1]) + magnitude(fv[2 * i]));
    if (i % 2 == 0) gauss_sum += wg[i / 2] * pair;
  }
  const T mean = kronrod * 0.5;
  double asc = wk[0] * magnitude(fv[0] - mean);
  for (std::size_t i = 1; i < 8; ++i) {
    asc += wk[i] * (magnitude(fv[2 * i - 1] - mean) + magnitude(fv[2 * i] - mean));
  }

  const double scale = std::abs(half);
  double err = magnitude(kronrod - gauss_sum) * scale;
  const double resasc = asc * scale;
  const double resabs = abs_sum * scale;
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) {
    err = std::max(50.0 * eps * resabs, err);
  }
  if (!std::isfinite(magnitude(kronrod))) err = std::numeric_limits<double>::infinity();
  return Panel<T>{lo, hi, kronrod * scale, err};
}

/// Global adaptive bisection of the worst panel until the summed error
/// meets the target. `extra_error` is error that refinement cannot reduce
/// (e.g. an extrapolated remainder).
template <class T, class F>
QuadResult<T> refine_panels(F& f, std::vector<Panel<T>> initial, T extra_value, double extra_error,
                            const QuadSpec& q, const char* who) {
  std::priority_queue<Panel<T>, std::vector<Panel<T>>, PanelOrder<T>> heap(PanelOrder<T>{},
                                                                           std::move(initial));
  auto totals = [&]() {
    T value = extra_value;
    double err = extra_error;
    auto copy = heap;
    while (!copy.empty()) {
      value += copy.top().value;
      err += copy.top().error;
      copy.pop();
    }
    return std::pair{value, err};
  };

  auto [value, err] = totals();
  if (extra_error > q.target(magnitude(value))) {
    throw NumericError(std::string(who) + ": extrapolated remainder too uncertain", std::real(value), err);
  }
  int subdivisions = 0;
  while (err > q.target(magnitude(value))) {
    if (subdivisions >= q.max_subdivisions) {
      throw NumericError(std::string(who) + ": max_subdivisions reached", std::real(value), err);
    }
    Panel<T> worst = heap.top();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      throw NumericError(std::string(who) + ": panel cannot be bisected further", std::real(value),
                         err);
    }
    heap.pop();
    Panel<T> left = gauss_kronrod15<T>(f, worst.lo, mid);
    Panel<T> right = gauss_kronrod15<T>(f, mid, worst.hi);
    value += (left.value + right.value) - worst.value;
    err += (left.error + right.error) - worst.error;
    heap.push(left);
    heap.push(right);
    ++subdivisions;
    if (subdivisions % 64 == 0) std::tie(value, err) = totals();
  }
  std::tie(value, err) = totals();
  return QuadResult<T>{value, err, subdivisions};
}

}  // namespace detail

/// Integrates f over (0, upper] where f may have an integrable singularity
/// at 0. Panels are laid out geometrically toward 0; once their masses decay
/// geometrically the remaining piece is extrapolated. Panels never go below
/// `min_gap`.
template <class T = double, class F>
QuadResult<T> integrate_graded(F&& f, double upper, const QuadSpec& q, double min_gap = 0.0) {
  q.validate();
  if (!(upper > 0.0)) throw std::invalid_argument("integrate_graded: upper must be > 0");
  const double ratio = 1.0 / (1.0 + q.grading);
  const double floor_gap = std::max(min_gap, 1e-300);

  std::vector<detail::Panel<T>> panels;
  T sum{};
  T remainder{};
  double remainder_error = 0.0;
  double prev_mag = -1.0;
  double prev_ratio = -1.0;
  double prev_drift = 1.0;
  bool seen_mass = false;
  int zero_run = 0;
  double hi = upper;
  T prev_value{};
  for (int k = 0; k < 4000; ++k) {
    const double lo = hi * ratio;
    if (lo <= floor_gap) {
      // Remaining piece (0, hi]: extrapolate from the last two full panels
      // when their masses decay geometrically.
      if (prev_mag > 0.0 && prev_ratio > 0.0 && prev_ratio < 1.0) {
        const double r = prev_ratio;
        remainder = prev_value * (r / (1.0 - r));
        remainder_error = detail::magnitude(remainder) * (4.0 * prev_drift / (1.0 - r) + 1e-14);
      } else {
        remainder_error = std::max(prev_mag, 0.0);
      }
      break;
    }
    auto panel = detail::gauss_kronrod15<T>(f, lo, hi);
    panels.push_back(panel);
    sum += panel.value;
    const double mag = detail::magnitude(panel.value);
    if (mag > 0.0) seen_mass = true;
    if (prev_mag > 0.0 && mag > 0.0) {
      const double r = mag / prev_mag;
      prev_drift = prev_ratio > 0.0 ? std::abs(r - prev_ratio) : 1.0;
      if (k >= 1) prev_ratio = r;
    }

    if (seen_mass && k >= 2) {
      if (mag == 0.0) {
        if (++zero_run >= 2) break;
      } else {
        zero_run = 0;
        if (prev_mag > 0.0) {
          const double r = mag / prev_mag;
          if (r < 0.95) {
            const double tail = mag * r / (1.0 - r);
            const double goal = q.target(detail::magnitude(sum));
            if (tail <= 0.01 * goal) {
              remainder = panel.value * (r / (1.0 - r));
              remainder_error = detail::magnitude(remainder);
              break;
            }
            // Stable geometric decay (in size and phase): extrapolate with a
            // drift-based error instead of marching further.
            if (prev_ratio > 0.0 && k >= 4) {
              const double phase_gap = detail::magnitude(panel.value - prev_value * r) / mag;
              const double rel = 4.0 * (prev_drift + phase_gap) / (1.0 - r) + 1e-14;
              if (tail * rel <= 0.1 * goal) {
                remainder = panel.value * (r / (1.0 - r));
                remainder_error = tail * rel;
                break;
              }
            }
          }
        }
      }
    }
    prev_mag = mag;
    prev_value = panel.value;
    hi = lo;
  }
  auto result = detail::refine_panels<T>(f, std::move(panels), remainder, remainder_error, q,
                                         "integrate_graded");
  return result;
}

/// Adaptive Gauss-Kronrod on a finite interval [a, b].
template <class T = double, class F>
QuadResult<T> integrate_interval(F&& f, double a, double b, const QuadSpec& q) {
  q.validate();
  if (a == b) return {};
  std::vector<detail::Panel<T>> panels;
  constexpr int kInitial = 4;
  for (int i = 0; i < kInitial; ++i) {
    const double lo = a + (b - a) * i / kInitial;
    const double hi = i + 1 == kInitial ? b : a + (b - a) * (i + 1) / kInitial;
    panels.push_back(detail::gauss_kronrod15<T>(f, lo, hi));
  }
  return detail::refine_panels<T>(f, std::move(panels), T{}, 0.0, q, "integrate_interval");
}

/// Integrates f(t) over [0, 1) with an integrable singularity allowed at 1,
/// by geometric subdivision toward 1.
template <class F>
QuadResult<double> integrate_radial(F&& f, const QuadSpec& q) {
  // Below this gap 1 - u loses too many digits for f to see distinct points.
  constexpr double kMinGap = 1e-12;
  return integrate_graded<double>([&](double u) { return f(1.0 - u); }, 1.0, q, kMinGap);
}

/// Trapezoid mean over theta in [0, 2pi) of h(theta), doubling the node
/// count from `initial_nodes` until successive results agree.
template <class T = double, class H>
T circle_mean(H&& h, const QuadSpec& q, int initial_nodes = 256, int max_nodes = 1 << 16) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  int nodes = initial_nodes;
  T sum{};
  for (int j = 0; j < nodes; ++j) sum += h(two_pi * j / nodes);
  T mean = sum / static_cast<double>(nodes);
  while (true) {
    T odd{};
    for (int j = 0; j < nodes; ++j) odd += h(two_pi * (j + 0.5) / nodes);
    sum += odd;
    nodes *= 2;
    const T refined = sum / static_cast<double>(nodes);
    const double diff = detail::magnitude(refined - mean);
    mean = refined;
    if (diff <= q.target(detail::magnitude(mean))) return mean;
    if (nodes >= max_nodes) {
      throw NumericError("circle_mean: angular rule did not converge", std::real(mean), diff);
    }
  }
}

/// Integral over the unit disk of h(lambda) (1 - |lambda|^2)^m dA(lambda),
/// dA normalized to unit mass. Polar form: trapezoid in angle, graded
/// adaptive rule in radius.
template <class T = double, class H>
T integrate_disk(H&& h, int m, const QuadSpec& q) {
  if (m < 0) throw std::invalid_argument("integrate_disk: m must be >= 0");
  const QuadSpec inner = q.scaled(0.25);
  auto radial = [&](double gap) -> T {
    const double p = 1.0 - gap;
    if (p <= 0.0) return T{};
    const double factor = 2.0 * p * std::pow(gap * (2.0 - gap), m);
    if (factor == 0.0) return T{};
    const T avg = circle_mean<T>([&](double theta) { return h(std::polar(p, theta)); }, inner);
    return factor * avg;
  };
  return integrate_graded<T>(radial, 1.0, q).value;
}

/// Point of the open unit ball in C^n.
class BallPoint {
 public:
  explicit BallPoint(std::vector<Complex> coords) : coords_(std::move(coords)) {
    if (coords_.empty()) throw std::domain_error("BallPoint: dimension must be >= 1");
    double s = 0.0;
    for (const auto& c : coords_) s += std::norm(c);
    norm_ = std::sqrt(s);
    if (!(norm_ < 1.0)) throw std::domain_error("BallPoint: |z| must be < 1");
  }

  /// (z1, 0, ..., 0) in C^n.
  static BallPoint along_e1(int n, Complex z1) {
    if (n < 1) throw std::domain_error("BallPoint: dimension must be >= 1");
    std::vector<Complex> c(static_cast<std::size_t>(n));
    c[0] = z1;
    return BallPoint(std::move(c));
  }

  [[nodiscard]] int dim() const { return static_cast<int>(coords_.size()); }
  [[nodiscard]] double norm() const { return norm_; }
  [[nodiscard]] std::span<const Complex> coords() const { return coords_; }
  [[nodiscard]] const Complex& operator[](std::size_t j) const { return coords_[j]; }

 private:
  std::vector<Complex> coords_;
  double norm_ = 0.0;
};

/// <z, w> = sum_j z_j conj(w_j).
inline Complex inner(std::span<const Complex> z, std::span<const Complex> w) {
  if (z.size() != w.size()) throw std::invalid_argument("inner: dimension mismatch");
  Complex s{};
  for (std::size_t j = 0; j < z.size(); ++j) s += z[j] * std::conj(w[j]);
  return s;
}

inline Complex inner(const BallPoint& z, const BallPoint& w) { return inner(z.coords(), w.coords()); }

/// Sphere average of h(<z, xi>) over xi in S_n, via the slice identity
///   int_S h(<z,xi>) dsigma = (n-1) int_D h(|z| lambda) (1-|lambda|^2)^(n-2) dA
/// for n >= 2, and the circle average of h(|z| e^{i theta}) for n = 1.
template <class T = double, class H>
T sphere_slice_average(H&& h, const BallPoint& z, const QuadSpec& q) {
  const int n = z.dim();
  const double r = z.norm();
  if (n == 1) {
    return circle_mean<T>([&](double theta) { return h(std::polar(r, theta)); }, q);
  }
  return static_cast<double>(n - 1) *
         integrate_disk<T>([&](Complex lambda) { return h(r * lambda); }, n - 2, q);
}

/// Same reduction when the caller already has the circle mean
/// p -> mean_theta h(|z| p e^{i theta}) in closed or fast form.
template <class C>
double sphere_slice_average_radial(C&& circle_mean_at, int n, const QuadSpec& q) {
  if (n < 1) throw std::invalid_argument("sphere_slice_average_radial: n must be >= 1");
  if (n == 1) return circle_mean_at(1.0);
  auto radial = [&](double gap) {
    const double p = 1.0 - gap;
    return 2.0 * p * std::pow(gap * (2.0 - gap), n - 2) * circle_mean_at(p);
  };
  return static_cast<double>(n - 1) * integrate_graded<double>(radial, 1.0, q).value;
}

/// Anything that evaluates a radial density from the gap u = 1 - r.
template <class W>
concept GapDensity = requires(const W& w, double u) {
  { w.density_at_gap(u) } -> std::convertible_to<double>;
};

/// 2n int_0^1 r^{2n-1} rho(r) F(r) dr, i.e. the ball integral of a function
/// whose sphere average at radius r is F(r). With F = 1 this is 2n rho_{2n-1}.
template <class T = double, GapDensity W, class F>
QuadResult<T> integrate_ball_radial(F&& sphere_average, const W& weight, int n, const QuadSpec& q) {
  if (n < 1) throw std::invalid_argument("integrate_ball_radial: n must be >= 1");
  auto integrand = [&](double gap) -> T {
    const double r = 1.0 - gap;
    const double rho = weight.density_at_gap(gap);
    if (rho == 0.0 || r <= 0.0) return T{};
    return (2.0 * n * std::pow(r, 2 * n - 1) * rho) * sphere_average(r);
  };
  return integrate_graded<T>(integrand, 1.0, q);
}

/// Gauss-Legendre nodes and weights on [0, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussRule gauss_legendre01(int points) {
  if (points < 1) throw std::invalid_argument("gauss_legendre01: points must be >= 1");
  const auto zeros = boost::math::legendre_p_zeros<double>(points);
  GaussRule rule;
  auto add = [&](double x) {
    const double dp = boost::math::legendre_p_prime(points, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes.push_back(0.5 * (x + 1.0));
    rule.weights.push_back(0.5 * w);
  };
  for (double x : zeros) {
    if (x == 0.0) {
      add(0.0);
    } else {
      add(x);
      add(-x);
    }
  }
  return rule;
}

/// Product cubature on S_n using |xi_j|^2 uniform on the simplex and
/// independent uniform phases. With `phase_nodes` > degree and
/// `simplex_nodes` >= degree/2 + n the rule is exact for polynomials in
/// xi, conj(xi) of total degree <= degree.
template <class F>
Complex sphere_cubature(F&& f, int n, int phase_nodes, int simplex_nodes) {
  if (n < 1 || n > 4) throw std::invalid_argument("sphere_cubature: supports 1 <= n <= 4");
  const GaussRule gl = gauss_legendre01(simplex_nodes);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<Complex> xi(static_cast<std::size_t>(n));
  std::vector<int> phase(static_cast<std::size_t>(n), 0);
  Complex total{};

  // Collapsed coordinates: x_1 = u_1, x_2 = (1-u_1) u_2, ...
  auto over_phases = [&](double w_simplex) {
    std::fill(phase.begin(), phase.end(), 0);
    std::vector<double> amp(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) amp[static_cast<std::size_t>(j)] = std::sqrt(std::max(x[static_cast<std::size_t>(j)], 0.0));
    const double w = w_simplex / std::pow(static_cast<double>(phase_nodes), n);
    while (true) {
      for (int j = 0; j < n; ++j) {
        xi[static_cast<std::size_t>(j)] =
            std::polar(amp[static_cast<std::size_t>(j)], two_pi * phase[static_cast<std::size_t>(j)] / phase_nodes);
      }
      total += w * f(std::span<const Complex>(xi));
      int j = 0;
      while (j < n && ++phase[static_cast<std::size_t>(j)] == phase_nodes) phase[static_cast<std::size_t>(j++)] = 0;
      if (j == n) break;
    }
  };

  // Recursive walk over the collapsed simplex coordinates.
  auto recurse = [&](auto&& self, int level, double remaining, double weight) -> void {
    if (level == n - 1) {
      x[static_cast<std::size_t>(level)] = remaining;
      over_phases(weight);
      return;
    }
    const double jac = remaining;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      x[static_cast<std::size_t>(level)] = remaining * gl.nodes[i];
      self(self, level + 1, remaining * (1.0 - gl.nodes[i]), weight * gl.weights[i] * jac);
    }
  };
  double factorial = 1.0;
  for (int j = 2; j < n; ++j) factorial *= j;
  recurse(recurse, 0, 1.0, factorial);
  return total;
}

/// Closed form int_S prod_j |xi_j|^{2 a_j} dsigma = (n-1)! prod Gamma(a_j+1) / Gamma(n + sum a_j),
/// valid for real a_j > -1.
inline double sphere_abs_moment(std::span<const double> half_exponents) {
  const int n = static_cast<int>(half_exponents.size());
  double log_val = std::lgamma(static_cast<double>(n));
  double sum = 0.0;
  for (double a : half_exponents) {
    log_val += std::lgamma(a + 1.0);
    sum += a;
  }
  log_val -= std::lgamma(n + sum);
  return std::exp(log_val);
}

/// Mean over theta of |sum_d a_d e^{i d theta}| for nonnegative real
/// coefficients a_d (already including any modulus powers). Values on N
/// equispaced nodes are exact trapezoid samples, obtained by folding the
/// coefficients mod N and one FFT; N doubles until two successive means agree
/// to `rel_tol`.
struct SeriesCircleMean {
  double mean = 0.0;
  int nodes = 0;
  double error_estimate = 0.0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Trapezoid means of |values| on N nodes and on the N/2 even nodes.
inline std::pair<double, double> folded_abs_means(std::span<const double> coeffs, int nodes) {
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(nodes)));
  if (buf == nullptr) throw std::bad_alloc();
  for (int j = 0; j < nodes; ++j) {
    buf[j][0] = 0.0;
    buf[j][1] = 0.0;
  }
  for (std::size_t d = 0; d < coeffs.size(); ++d) buf[d % static_cast<std::size_t>(nodes)][0] += coeffs[d];
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(nodes, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  double all = 0.0;
  double even = 0.0;
  for (int j = 0; j < nodes; ++j) {
    const double a = std::hypot(buf[j][0], buf[j][1]);
    all += a;
    if (j % 2 == 0) even += a;
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return {all / nodes, even / (nodes / 2)};
}

}  // namespace detail

inline SeriesCircleMean series_circle_abs_mean(std::span<const double> coeffs, double rel_tol,
                                               int initial_nodes = 256, int max_nodes = 1 << 23) {
  if (coeffs.empty()) return {};
  int nodes = initial_nodes;
  while (true) {
    auto [fine, coarse] = detail::folded_abs_means(coeffs, nodes);
    const double diff = std::abs(fine - coarse);
    if (diff <= rel_tol * fine || fine == 0.0) return {fine, nodes, diff};
    if (nodes >= max_nodes) {
      throw NumericError("series_circle_abs_mean: node doubling did not converge", fine, diff);
    }
    nodes *= 2;
  }
}

}  // namespace bergman
