#pragma once
// Weighted Bergman projection of bounded symbols,
//
//   P f(z) = int_B K(z,w) f(w) rho(w) dv(w),
//
// and a direct check of the monomial reproducing formula. Symbols built from
// monomials and unimodular phases are integrated in angle by orthogonality,
// so only a radial quadrature remains. Custom symbols are slice functions
// phi(w) = Phi(|w|, w_1/|w|) sampled on a polar grid and cost a radial x disk
// quadrature.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bergman/kernel.hpp"
#include "bergman/parallel.hpp"
#include "bergman/quadrature.hpp"
#include "bergman/weights.hpp"

namespace bergman {

struct MonomialSymbol {
  std::vector<int> index;  // w^index
};

struct ConjMonomialSymbol {
  std::vector<int> index;  // conj(w)^index
};

struct RadialIndicatorSymbol {
  double r_lo = 0.0;
  double r_hi = 1.0;  // indicator of r_lo <= |w| < r_hi
};

/// prod_j (w_j/|w_j|)^{holomorphic_j} conj(w_j/|w_j|)^{antiholomorphic_j}
struct UnimodularPhaseSymbol {
  std::vector<int> holomorphic;
  std::vector<int> antiholomorphic;
};

/// Phi(s, lambda) with s = |w| and lambda = w_1/|w|, either sampled on a
/// product grid (s, |lambda|, arg lambda) with linear interpolation, or
/// given by a callable.
class CustomSymbol {
 public:
  using Slice = std::function<Complex(double s, Complex lambda)>;

  /// values[(i * p_nodes.size() + j) * angles + a] at (s_i, p_j, 2 pi a / angles).
  static CustomSymbol from_grid(std::vector<double> s_nodes, std::vector<double> p_nodes, int angles,
                                std::vector<Complex> values) {
    auto check_nodes = [](const std::vector<double>& v, const char* what) {
      if (v.empty()) throw std::invalid_argument(std::string("CustomSymbol: ") + what + " grid is empty");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= 0.0 && v[i] <= 1.0)) throw std::invalid_argument(std::string("CustomSymbol: ") + what + " nodes must lie in [0,1]");
        if (i > 0 && !(v[i] > v[i - 1])) throw std::invalid_argument(std::string("CustomSymbol: ") + what + " nodes must increase");
      }
    };
    check_nodes(s_nodes, "radius");
    check_nodes(p_nodes, "slice modulus");
    if (angles < 1) throw std::invalid_argument("CustomSymbol: angle count must be >= 1");
    if (values.size() != s_nodes.size() * p_nodes.size() * static_cast<std::size_t>(angles)) {
      throw std::invalid_argument("CustomSymbol: expected " +
                                  std::to_string(s_nodes.size() * p_nodes.size() * static_cast<std::size_t>(angles)) +
                                  " grid values, got " + std::to_string(values.size()));
    }
    double bound = 0.0;
    for (const Complex& v : values) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw std::invalid_argument("CustomSymbol: non-finite grid value");
      bound = std::max(bound, std::abs(v));
    }
    CustomSymbol c;
    c.grid_ = std::make_shared<const Grid>(Grid{std::move(s_nodes), std::move(p_nodes), angles, std::move(values)});
    c.bound_ = bound;
    return c;
  }

  static CustomSymbol from_function(Slice f, double sup_bound) {
    if (!f) throw std::invalid_argument("CustomSymbol: empty slice function");
    if (!(sup_bound >= 0.0)) throw std::invalid_argument("CustomSymbol: sup bound must be >= 0");
    CustomSymbol c;
    c.fn_ = std::move(f);
    c.bound_ = sup_bound;
    return c;
  }

  [[nodiscard]] double sup_bound() const { return bound_; }
  [[nodiscard]] bool sampled() const { return static_cast<bool>(grid_); }

  [[nodiscard]] Complex operator()(double s, Complex lambda) const {
    if (fn_) return fn_(s, lambda);
    const Grid& g = *grid_;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    auto bracket = [](const std::vector<double>& nodes, double x) -> std::pair<std::size_t, double> {
      if (nodes.size() == 1 || x <= nodes.front()) return {0, 0.0};
      if (x >= nodes.back()) return {nodes.size() - 2, 1.0};
      const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - nodes.begin()) - 1;
      return {i, (x - nodes[i]) / (nodes[i + 1] - nodes[i])};
    };
    const auto [is, ts] = bracket(g.s, s);
    const auto [ip, tp] = bracket(g.p, std::abs(lambda));
    double angle = std::arg(lambda);
    if (angle < 0.0) angle += two_pi;
    const double pos = angle / two_pi * g.angles;
    const int a0 = static_cast<int>(std::floor(pos)) % g.angles;
    const int a1 = (a0 + 1) % g.angles;
    const double ta = pos - std::floor(pos);
    auto at = [&](std::size_t i, std::size_t j, int a) {
      i = std::min(i, g.s.size() - 1);
      j = std::min(j, g.p.size() - 1);
      return g.values[(i * g.p.size() + j) * static_cast<std::size_t>(g.angles) + static_cast<std::size_t>(a)];
    };
    auto along_angle = [&](std::size_t i, std::size_t j) { return (1.0 - ta) * at(i, j, a0) + ta * at(i, j, a1); };
    auto along_p = [&](std::size_t i) { return (1.0 - tp) * along_angle(i, ip) + tp * along_angle(i, ip + 1); };
    return (1.0 - ts) * along_p(is) + ts * along_p(is + 1);
  }

 private:
  struct Grid {
    std::vector<double> s;
    std::vector<double> p;
    int angles;
    std::vector<Complex> values;
  };
  std::shared_ptr<const Grid> grid_;
  Slice fn_;
  double bound_ = 0.0;
};

using SymbolKind =
    std::variant<MonomialSymbol, ConjMonomialSymbol, RadialIndicatorSymbol, UnimodularPhaseSymbol, CustomSymbol>;

/// A bounded function on B_n together with a bound on its sup norm.
class BoundedSymbol {
 public:
  static BoundedSymbol monomial(std::vector<int> index) {
    check_index(index, "Monomial");
    return BoundedSymbol(MonomialSymbol{std::move(index)}, 1.0);
  }
  static BoundedSymbol conj_monomial(std::vector<int> index) {
    check_index(index, "ConjMonomial");
    return BoundedSymbol(ConjMonomialSymbol{std::move(index)}, 1.0);
  }
  static BoundedSymbol radial_indicator(double r_lo, double r_hi) {
    if (!(r_lo >= 0.0 && r_lo < r_hi && r_hi <= 1.0)) {
      throw std::invalid_argument("RadialIndicator: need 0 <= r_lo < r_hi <= 1");
    }
    return BoundedSymbol(RadialIndicatorSymbol{r_lo, r_hi}, 1.0);
  }
  static BoundedSymbol unimodular_phase(std::vector<int> holomorphic, std::vector<int> antiholomorphic) {
    check_index(holomorphic, "UnimodularPhase");
    check_index(antiholomorphic, "UnimodularPhase");
    if (holomorphic.size() != antiholomorphic.size()) {
      throw std::invalid_argument("UnimodularPhase: index lengths differ");
    }
    return BoundedSymbol(UnimodularPhaseSymbol{std::move(holomorphic), std::move(antiholomorphic)}, 1.0);
  }
  static BoundedSymbol custom(CustomSymbol c) {
    const double b = c.sup_bound();
    return BoundedSymbol(std::move(c), b);
  }

  [[nodiscard]] const SymbolKind& kind() const { return kind_; }
  [[nodiscard]] double sup_norm_bound() const { return bound_; }

  [[nodiscard]] std::string kind_name() const {
    return std::visit(
        [](const auto& s) -> std::string {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, MonomialSymbol>) return "Monomial";
          if constexpr (std::is_same_v<S, ConjMonomialSymbol>) return "ConjMonomial";
          if constexpr (std::is_same_v<S, RadialIndicatorSymbol>) return "RadialIndicator";
          if constexpr (std::is_same_v<S, UnimodularPhaseSymbol>) return "UnimodularPhase";
          return "Custom";
        },
        kind_);
  }

  /// phi(w).
  [[nodiscard]] Complex operator()(const BallPoint& w) const {
    return std::visit(
        [&](const auto& s) -> Complex {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, MonomialSymbol>) {
            require_dim(s.index.size(), w.dim());
            Complex v(1.0, 0.0);
            for (std::size_t j = 0; j < s.index.size(); ++j) v *= std::pow(w[j], s.index[j]);
            return v;
          } else if constexpr (std::is_same_v<S, ConjMonomialSymbol>) {
            require_dim(s.index.size(), w.dim());
            Complex v(1.0, 0.0);
            for (std::size_t j = 0; j < s.index.size(); ++j) v *= std::pow(std::conj(w[j]), s.index[j]);
            return v;
          } else if constexpr (std::is_same_v<S, RadialIndicatorSymbol>) {
            return (w.norm() >= s.r_lo && w.norm() < s.r_hi) ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<S, UnimodularPhaseSymbol>) {
            require_dim(s.holomorphic.size(), w.dim());
            Complex v(1.0, 0.0);
            for (std::size_t j = 0; j < s.holomorphic.size(); ++j) {
              const int m = s.holomorphic[j] - s.antiholomorphic[j];
              if (m == 0) continue;
              const double a = std::abs(w[j]);
              // The phase of 0 is taken as 1 (a null set).
              const Complex u = a > 0.0 ? w[j] / a : Complex(1.0, 0.0);
              v *= std::pow(u, m);
            }
            return v;
          } else {
            const double r = w.norm();
            return s(r, r > 0.0 ? w[0] / r : Complex{});
          }
        },
        kind_);
  }

 private:
  BoundedSymbol(SymbolKind k, double bound) : kind_(std::move(k)), bound_(bound) {}

  static void check_index(const std::vector<int>& index, const char* who) {
    if (index.empty()) throw std::invalid_argument(std::string(who) + ": multi-index is empty");
    for (int a : index) {
      if (a < 0) throw std::invalid_argument(std::string(who) + ": multi-index entries must be >= 0");
    }
  }
  static void require_dim(std::size_t got, int n) {
    if (static_cast<int>(got) != n) {
      throw std::invalid_argument("symbol multi-index has length " + std::to_string(got) + ", expected n = " +
                                  std::to_string(n));
    }
  }

  SymbolKind kind_;
  double bound_;
};

namespace detail {

/// Relative control on radial moments: the callers multiply them by large
/// coefficients, so an absolute floor would not translate.
inline QuadSpec radial_quad(const QuadSpec& q) {
  QuadSpec r = QuadSpec::relative(std::max(std::min(q.tolerance, 1e-6), 1e-14), std::max(q.max_subdivisions, 2000));
  r.grading = q.grading;
  return r;
}

/// 2n int_0^1 s^{2n-1+power} rho(s) ds by fresh quadrature.
inline double radial_moment(const RadialWeight& w, int n, double power, const QuadSpec& q) {
  return integrate_ball_radial([&](double s) { return std::pow(s, power); }, w, n, radial_quad(q)).value;
}

inline double log_multinomial(std::span<const int> m) {
  double total = 0.0;
  double v = 0.0;
  for (int a : m) {
    v -= std::lgamma(a + 1.0);
    total += a;
  }
  return v + std::lgamma(total + 1.0);
}

inline Complex power_product(const BallPoint& z, std::span<const int> m) {
  Complex v(1.0, 0.0);
  for (std::size_t j = 0; j < m.size(); ++j) v *= std::pow(z[j], m[j]);
  return v;
}

/// Coefficient (a Taylor coefficient times a degree weight) for series of the
/// form sum_d c_d <z,w>^d or sum_d d c_d <z,w>^d.
inline double series_coeff(const KernelCoeffs& k, long d, bool radial_derivative) {
  const double c = k.coeff(d);
  return radial_derivative ? static_cast<double>(d) * c : c;
}

inline Complex project_custom(const KernelCoeffs& k, const RadialWeight& rho, const CustomSymbol& phi,
                              const BallPoint& z, const QuadSpec& q, bool radial_derivative);

/// Projection of `phi` at z through the kernel series (`radial_derivative`
/// selects R applied in z).
inline Complex project_series(const KernelCoeffs& k, const RadialWeight& rho, const BoundedSymbol& phi,
                              const BallPoint& z, const QuadSpec& q, bool radial_derivative) {
  const int n = k.n();
  if (z.dim() != n) throw std::invalid_argument("project: point dimension does not match the kernel");
  return std::visit(
      [&](const auto& s) -> Complex {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, MonomialSymbol>) {
          if (static_cast<int>(s.index.size()) != n) throw std::invalid_argument("Monomial: multi-index length must equal n");
          const int d = std::accumulate(s.index.begin(), s.index.end(), 0);
          // int_B w^b <z,w>^d rho dv = 2n rho_{2n-1+2d} d!(n-1)!/(d+n-1)! z^b
          const double radial = radial_moment(rho, n, 2.0 * d, q);
          const double angular = std::exp(std::lgamma(d + 1.0) + std::lgamma(static_cast<double>(n)) - std::lgamma(d + n + 0.0));
          return series_coeff(k, d, radial_derivative) * radial * angular * power_product(z, s.index);
        } else if constexpr (std::is_same_v<S, ConjMonomialSymbol>) {
          if (static_cast<int>(s.index.size()) != n) throw std::invalid_argument("ConjMonomial: multi-index length must equal n");
          if (std::any_of(s.index.begin(), s.index.end(), [](int a) { return a != 0; })) return Complex{};
          return radial_derivative ? Complex{} : Complex(k.coeff(0) * radial_moment(rho, n, 0.0, q), 0.0);
        } else if constexpr (std::is_same_v<S, RadialIndicatorSymbol>) {
          if (radial_derivative) return Complex{};
          const RadialIndicatorSymbol ind = s;
          // The jumps defeat the graded rule's error model, so integrate the
          // window directly.
          QuadSpec rq = radial_quad(q);
          auto dens = [&](double r) { return 2.0 * n * std::pow(r, 2 * n - 1) * rho.density_at_gap(1.0 - r); };
          double value = 0.0;
          if (ind.r_hi < 1.0) {
            value = integrate_interval<double>(dens, ind.r_lo, ind.r_hi, rq).value;
          } else {
            value = integrate_graded<double>([&](double u) { return dens(1.0 - u); }, 1.0 - ind.r_lo, rq).value;
          }
          return Complex(k.coeff(0) * value, 0.0);
        } else if constexpr (std::is_same_v<S, UnimodularPhaseSymbol>) {
          if (static_cast<int>(s.holomorphic.size()) != n) throw std::invalid_argument("UnimodularPhase: multi-index length must equal n");
          std::vector<int> m(static_cast<std::size_t>(n));
          for (int j = 0; j < n; ++j) {
            m[static_cast<std::size_t>(j)] = s.holomorphic[static_cast<std::size_t>(j)] - s.antiholomorphic[static_cast<std::size_t>(j)];
            if (m[static_cast<std::size_t>(j)] < 0) return Complex{};
          }
          const int d = std::accumulate(m.begin(), m.end(), 0);
          std::vector<double> half(m.size());
          for (std::size_t j = 0; j < m.size(); ++j) half[j] = 0.5 * m[j];
          const double radial = radial_moment(rho, n, static_cast<double>(d), q);
          const double angular = std::exp(log_multinomial(m)) * sphere_abs_moment(half);
          return series_coeff(k, d, radial_derivative) * radial * angular * power_product(z, m);
        } else {
          return project_custom(k, rho, s, z, q, radial_derivative);
        }
      },
      phi.kind());
}

inline Complex project_custom(const KernelCoeffs& k, const RadialWeight& rho, const CustomSymbol& phi,
                              const BallPoint& z, const QuadSpec& q, bool radial_derivative) {
  const int n = k.n();
  for (int j = 1; j < n; ++j) {
    if (z[static_cast<std::size_t>(j)] != Complex{}) {
      throw std::invalid_argument("project: Custom symbols are slice functions of w_1/|w|; z must lie on the e1 axis");
    }
  }
  const Complex z1 = z[0];
  const double tol = std::max(q.tolerance, 1e-14) * 1e-2;
  auto kernel_at = [&](Complex t) {
    return radial_derivative ? eval_RK_at(k, t, tol).value : eval_kernel_at(k, t, tol).value;
  };
  const QuadSpec inner = q.scaled(0.25);
  auto sphere_part = [&](double s) -> Complex {
    auto h = [&](Complex lambda) { return kernel_at(z1 * s * std::conj(lambda)) * phi(s, lambda); };
    if (n == 1) return circle_mean<Complex>([&](double th) { return h(std::polar(1.0, th)); }, inner, 32);
    const QuadSpec qi = inner;
    auto radial = [&](double gap) -> Complex {
      const double p = 1.0 - gap;
      if (p <= 0.0) return Complex{};
      const double factor = 2.0 * p * std::pow(gap * (2.0 - gap), n - 2);
      if (factor == 0.0) return Complex{};
      return factor * circle_mean<Complex>([&](double th) { return h(std::polar(p, th)); }, qi.scaled(0.25), 32);
    };
    return static_cast<double>(n - 1) * integrate_graded<Complex>(radial, 1.0, qi).value;
  };
  return integrate_ball_radial<Complex>(sphere_part, rho, n, q).value;
}

}  // namespace detail

/// P phi(z).
inline Complex project(const KernelCoeffs& k, const RadialWeight& rho, const BoundedSymbol& phi, const BallPoint& z,
                       const QuadSpec& q = {}) {
  return detail::project_series(k, rho, phi, z, q, false);
}

/// R(P phi)(z), by projecting against RK instead of K.
inline Complex project_radial_derivative(const KernelCoeffs& k, const RadialWeight& rho, const BoundedSymbol& phi,
                                         const BallPoint& z, const QuadSpec& q = {}) {
  return detail::project_series(k, rho, phi, z, q, true);
}

struct StarCheck {
  Complex lhs;
  Complex rhs;
  double abs_gap = 0.0;
};

/// Compares z^a with c_d int_B w^a <z,w>^d rho dv, d = |a|. The radial part
/// is a fresh quadrature; the angular part is an exact product cubature on
/// the sphere for n <= 4 and the multinomial expansion beyond.
inline StarCheck verify_star(const KernelCoeffs& k, const RadialWeight& rho, std::span<const int> alpha,
                             const BallPoint& z, const QuadSpec& q = {}) {
  const int n = k.n();
  if (static_cast<int>(alpha.size()) != n || z.dim() != n) {
    throw std::invalid_argument("verify_star: multi-index and point must have length n");
  }
  for (int a : alpha) {
    if (a < 0) throw std::invalid_argument("verify_star: multi-index entries must be >= 0");
  }
  const int d = std::accumulate(alpha.begin(), alpha.end(), 0);
  const Complex lhs = detail::power_product(z, alpha);
  const double radial = detail::radial_moment(rho, n, 2.0 * d, q);
  Complex angular;
  if (n <= 4) {
    angular = sphere_cubature(
        [&](std::span<const Complex> xi) {
          Complex t{};
          Complex mono(1.0, 0.0);
          for (int j = 0; j < n; ++j) {
            t += z[static_cast<std::size_t>(j)] * std::conj(xi[static_cast<std::size_t>(j)]);
            mono *= std::pow(xi[static_cast<std::size_t>(j)], alpha[static_cast<std::size_t>(j)]);
          }
          return mono * std::pow(t, d);
        },
        n, 2 * d + 1, d + n);
  } else {
    // <z,xi>^d = sum_{|b|=d} d!/b! z^b conj(xi)^b; only b = alpha survives.
    std::vector<double> half(alpha.begin(), alpha.end());
    angular = std::exp(detail::log_multinomial(alpha)) * sphere_abs_moment(half) * lhs;
  }
  const Complex rhs = k.coeff(d) * radial * angular;
  return {lhs, rhs, std::abs(lhs - rhs)};
}

struct BlochSample {
  double r = 0.0;
  double density = 0.0;  // (1 - r^2) |R(P phi)(r e_1)|
};

/// (1 - r^2)|R(P phi)(r e_1)| along `radii`, evaluated in parallel.
inline std::vector<BlochSample> project_bloch_image(const KernelCoeffs& k, const RadialWeight& rho,
                                                   const BoundedSymbol& phi, std::span<const double> radii,
                                                   const QuadSpec& q = {}, unsigned threads = 1) {
  std::vector<BlochSample> out(radii.size());
  parallel_for(radii.size(), threads, [&](std::size_t i) {
    const double r = radii[i];
    if (!(r >= 0.0 && r < 1.0)) throw std::domain_error("project_bloch_image: radii must lie in [0,1)");
    const Complex rf = project_radial_derivative(k, rho, phi, BallPoint::along_e1(k.n(), r), q);
    out[i] = {r, (1.0 - r * r) * std::abs(rf)};
  });
  return out;
}

}  // namespace bergman
