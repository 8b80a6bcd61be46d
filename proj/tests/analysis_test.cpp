#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <vector>

#include "bergman/analysis.hpp"

using namespace bergman;

namespace {

struct WeightedSpace {
  RadialWeight weight;
  std::shared_ptr<const MomentTable> table;
  KernelCoeffs coeffs;
  WeightedSpace(RadialWeight w, int n, long d_max = 1L << 21)
      : weight(w), table(std::make_shared<const MomentTable>(w)), coeffs(table, n, d_max) {}
};

std::vector<BallPoint> radial_grid(int n, int count) {
  std::vector<BallPoint> grid;
  for (int i = 1; i < count; ++i) grid.push_back(BallPoint::along_e1(n, static_cast<double>(i) / count));
  return grid;
}

std::vector<Complex> random_poly(std::mt19937_64& rng, int terms) {
  std::normal_distribution<double> g;
  std::vector<Complex> c(static_cast<std::size_t>(terms));
  for (auto& v : c) v = {g(rng), g(rng)};
  return c;
}

QuadSpec rel(double tol) { return QuadSpec::relative(tol, 20000); }

// Unweighted n = 2: RK(z, w) = 3t / (1 - t)^4 with t = <z, w>, and the circle
// mean of |RK| at modulus m is 3m(1 + m^2) / (1 - m^2)^3.
double unweighted_rk_circle_mean(double m) {
  const double m2 = m * m;
  return 3.0 * m * (1.0 + m2) / std::pow(1.0 - m2, 3);
}

// Sphere average of |RK(z, s xi)| for z = (z1, z2): with |xi_1|^2 = x uniform
// and independent phases, <z, s xi> = s e^{i theta}(a e^{i psi} + b), so the
// average is int_0^1 mean_psi C(s |a e^{i psi} + b|) dx.
double unweighted_sphere_average(double abs_z1, double abs_z2, double s) {
  auto psi_mean = [&](double x) {
    const double a = abs_z1 * std::sqrt(x);
    const double b = abs_z2 * std::sqrt(1.0 - x);
    auto h = [&](double psi) {
      const double m2 = a * a + b * b + 2.0 * a * b * std::cos(psi);
      return unweighted_rk_circle_mean(s * std::sqrt(std::max(m2, 0.0)));
    };
    return integrate_interval(h, 0.0, std::numbers::pi, rel(1e-12)).value / std::numbers::pi;
  };
  const double total = abs_z1 * abs_z1 + abs_z2 * abs_z2;
  if (abs_z2 == 0.0 || abs_z1 == 0.0) return integrate_interval(psi_mean, 0.0, 1.0, rel(1e-12)).value;
  const double x_star = abs_z2 * abs_z2 / total;  // a = b there
  return integrate_interval(psi_mean, 0.0, x_star, rel(1e-12)).value +
         integrate_interval(psi_mean, x_star, 1.0, rel(1e-12)).value;
}

double unweighted_functional_direct(double abs_z1, double abs_z2) {
  const double r2 = abs_z1 * abs_z1 + abs_z2 * abs_z2;
  const RadialWeight one = RadialWeight::standard(0.0);
  auto sphere = [&](double s) { return unweighted_sphere_average(abs_z1, abs_z2, s); };
  return (1.0 - r2) * integrate_ball_radial(sphere, one, 2, rel(1e-11)).value;
}

}  // namespace

TEST(BlochSeminorm, ConstantAndCoordinate) {
  const auto grid = radial_grid(2, 2000);
  EXPECT_EQ(bloch_seminorm([](const BallPoint&) { return Complex{}; }, grid).value, 0.0);
  const BlochEstimate e = bloch_seminorm([](const BallPoint& z) { return z[0]; }, grid);
  EXPECT_NEAR(e.value, 2.0 / (3.0 * std::sqrt(3.0)), 1e-6);
  EXPECT_TRUE(e.skipped.empty());
}

TEST(BlochSeminorm, LogarithmApproachesTwo) {
  std::vector<BallPoint> grid;
  for (int k = 1; k <= 12; ++k) grid.push_back(BallPoint::along_e1(2, 1.0 - std::exp2(-k)));
  const BlochEstimate e = bloch_seminorm([](const BallPoint& z) { return z[0] / (1.0 - z[0]); }, grid);
  EXPECT_GE(e.value, 1.9);
  EXPECT_LE(e.value, 2.0);
}

TEST(BlochSeminorm, FailingPointsAreSkipped) {
  const auto grid = radial_grid(1, 10);
  auto rf = [](const BallPoint& z) -> Complex {
    if (z.norm() > 0.75) throw NumericError("diverged", 0.0, INFINITY);
    return z[0];
  };
  const BlochEstimate e = bloch_seminorm(rf, grid);
  EXPECT_EQ(e.skipped.size(), 2u);
  EXPECT_NEAR(e.value, (1.0 - 0.36) * 0.6, 1e-15);
  EXPECT_THROW((void)bloch_seminorm(rf, std::span<const BallPoint>{}), std::invalid_argument);
}

TEST(BoundednessFunctional, MatchesClosedFormQuadrature) {
  WeightedSpace sp(RadialWeight::standard(0.0), 2);
  EXPECT_EQ(boundedness_functional(sp.coeffs, 0.0), 0.0);
  // Literal ball quadrature of (1-r^2)|3t/(1-t)^4| with t = <r e1, w>.
  const double r = 0.5;
  const RadialWeight one = RadialWeight::standard(0.0);
  auto sphere = [&](double s) {
    auto h = [](Complex t) { return std::abs(3.0 * t / std::pow(1.0 - t, 4)); };
    return sphere_slice_average(h, BallPoint::along_e1(2, r * s), rel(1e-10));
  };
  const double direct = (1.0 - r * r) * integrate_ball_radial(sphere, one, 2, rel(1e-9)).value;
  EXPECT_NEAR(boundedness_functional(sp.coeffs, r) / direct, 1.0, 1e-3);
}

TEST(BoundednessFunctional, UnitaryInvariance) {
  WeightedSpace sp(RadialWeight::standard(0.0), 2);
  const double r = 0.7;
  QuadSpec q;
  q.tolerance = 1e-10;
  const double fast = boundedness_functional(sp.coeffs, r, q);
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2; ++trial) {
    // |z1|^2 of a uniformly random unit direction in C^2 is uniform on [0, 1].
    const double x = u(rng);
    const double direct = unweighted_functional_direct(r * std::sqrt(x), r * std::sqrt(1.0 - x));
    EXPECT_NEAR(direct / fast, 1.0, 1e-6) << "split " << x;
  }
}

TEST(BoundednessFunctional, UnweightedProfileIsFlat) {
  WeightedSpace sp(RadialWeight::standard(0.0), 2);
  QuadSpec q;
  q.tolerance = 1e-7;
  const BoundednessFunctional M(sp.coeffs, q);
  double lo = INFINITY, hi = 0.0;
  for (int k = 2; k <= 10; ++k) {
    const double v = M(1.0 - std::exp2(-k));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT(hi / lo, 3.1);  // the profile climbs from 1.95 to 5.88 before flattening
  EXPECT_LT(hi, 6.0);
}

TEST(BoundednessFunctional, InClassWeightsHaveFlatTail) {
  QuadSpec q;
  q.tolerance = 1e-7;
  for (const auto& w : {RadialWeight::standard(0.0), RadialWeight::standard(1.0), RadialWeight::standard(2.0),
                        RadialWeight::standard(5.0), RadialWeight::logarithmic(0.0)}) {
    WeightedSpace sp(w, 2);
    const BoundednessFunctional M(sp.coeffs, q);
    std::vector<ProfilePoint> profile;
    for (int k = 1; k <= 12; ++k) {
      const double r = 1.0 - std::exp2(-k);
      profile.push_back({r, M(r)});
    }
    const TrendVerdict t = detail::profile_trend(profile, [](double r) { return -std::log1p(-r); }, DivergenceRule{});
    EXPECT_LE(t.slope, 0.05) << w.label();
  }
}

TEST(Majorant, UnweightedValues) {
  const RadialWeight one = RadialWeight::standard(0.0);
  const double u5 = majorant(one, 0.5);
  EXPECT_GE(u5, 1.5);
  EXPECT_LE(u5, 2.0);
  EXPECT_LE((1.0 - 0.9) * majorant(one, 0.9), 1.0);
  EXPECT_NEAR(majorant(one, 1e-9), 1.0, 1e-8);
  // ratio (1 - t/r)/(1 - t) integrates to r / (2(1 - r)) against (1-t)^{-2}
  for (double r : {0.3, 0.9, 0.999}) EXPECT_NEAR(majorant(one, r), 1.0 + r / (2.0 * (1.0 - r)), 1e-8 / (1.0 - r));
}

TEST(Majorant, SandwichWithFunctional) {
  WeightedSpace sp(RadialWeight::standard(0.0), 2);
  QuadSpec q;
  q.tolerance = 1e-7;
  const BoundednessFunctional M(sp.coeffs, q);
  for (int k = 1; k <= 10; ++k) {
    const double r = 1.0 - std::exp2(-k);
    const double m = M(r);
    EXPECT_LE(m, 10.0 * (1.0 - r * r) * majorant(sp.weight, r)) << r;
    const double lower = (1.0 - r * r) * lower_bound_series(*sp.table, 2, r).value;
    EXPECT_LE(lower, 2.0 * m) << r;
  }
}

TEST(PrEstimate, UnweightedClosedForms) {
  WeightedSpace sp(RadialWeight::standard(0.0), 2);
  double lo = INFINITY, hi = 0.0;
  double previous_rhs = 0.0;
  for (double s : {0.5, 0.7, 0.9, 0.99}) {
    const RatioCheck c = pr_estimate_check(sp.coeffs, s);
    EXPECT_NEAR(c.lhs / (6.0 * s * s / std::pow(1.0 - s * s, 2)), 1.0, 1e-8) << s;
    EXPECT_NEAR(c.rhs / ((std::pow(1.0 - s, -2) - 1.0) / 2.0), 1.0, 1e-8) << s;
    EXPECT_GT(c.rhs, previous_rhs);
    previous_rhs = c.rhs;
    lo = std::min(lo, c.ratio);
    hi = std::max(hi, c.ratio);
  }
  EXPECT_NEAR(pr_estimate_check(sp.coeffs, 0.9).rhs, 49.5, 1e-7);
  EXPECT_LT(hi / lo, 20.0);
  EXPECT_THROW((void)pr_estimate_check(sp.coeffs, 0.4), std::domain_error);
}

TEST(LowerBound, UnweightedSeries) {
  WeightedSpace sp(RadialWeight::standard(0.0), 2);
  EXPECT_EQ(lower_bound_series(*sp.table, 2, 0.0).value, 0.0);
  double oracle = 0.0;
  for (int d = 1; d < 200; ++d) oracle += (2.0 * d + 4.0) / (d + 4.0) * std::pow(0.5, d);
  const double v = lower_bound_series(*sp.table, 2, 0.5).value;
  EXPECT_NEAR(v, oracle, 1e-8);
  EXPECT_GT(v, 1.3);
  EXPECT_LT(v, 2.0);
  for (double r : dyadic_radii(12, 1)) EXPECT_LE((1.0 - r) * lower_bound_series(*sp.table, 2, r).value, 2.5) << r;
  EXPECT_THROW((void)lower_bound_series(*sp.table, 2, 1.0 - 1e-6, 1000), TruncationError);
}

TEST(Cesaro, UnweightedAndExponential) {
  WeightedSpace one(RadialWeight::standard(0.0), 2, 4096);
  EXPECT_NEAR(cesaro_lower(*one.table, 2, 1), 1.2, 1e-12);
  for (long N : {16L, 256L, 4096L}) {
    const double v = cesaro_lower(*one.table, 2, N);
    EXPECT_GE(v, 1.2);
    EXPECT_LE(v, 2.0);
  }
  const MomentTable ex(RadialWeight::exponential(1.0, 1.0));
  const double a = cesaro_lower(ex, 2, 64), b = cesaro_lower(ex, 2, 256), c = cesaro_lower(ex, 2, 1024);
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_GT(c / a, 5.0);
}

TEST(Cesaro, ExponentialFamilyDivergesOnSqrtScale) {
  for (double c : {1.0, 2.0}) {
    const MomentTable t(RadialWeight::exponential(c, 1.0));
    std::vector<ProfilePoint> profile;
    for (int e = 4; e <= 12; ++e) profile.push_back({std::exp2(e), cesaro_lower(t, 2, 1L << e)});
    const TrendVerdict v = detail::profile_trend(profile, [](double N) { return std::sqrt(N); }, DivergenceRule{});
    EXPECT_GE(v.slope, 0.05) << c;
  }
}

TEST(MomentDoubling, ClosedFormsAndDivergence) {
  const MomentTable one(RadialWeight::standard(0.0));
  const std::vector<long> Ns{4, 16, 64, 256};
  for (const auto& [N, ratio] : moment_doubling_chain(one, Ns)) EXPECT_NEAR(ratio, (6.0 * N + 1) / (4.0 * N + 1), 1e-10);

  const MomentTable two(RadialWeight::standard(2.0));
  std::vector<long> grid;
  for (long N = 8; N <= 1024; N *= 2) grid.push_back(N);
  for (const auto& [N, ratio] : moment_doubling_chain(two, grid)) EXPECT_LT(ratio, 4.0) << N;

  // rho_x ~ C x^{-3/4} e^{-2 sqrt x} for exp(-1/(1-r)), so the log ratio is
  // 2(sqrt 6 - 2) sqrt N + (3/4) log 1.5 + O(N^{-1/2}).
  const MomentTable ex(RadialWeight::exponential(1.0, 1.0));
  const auto chain = moment_doubling_chain(ex, grid);
  for (std::size_t i = 1; i < chain.size(); ++i) EXPECT_GT(chain[i].second, chain[i - 1].second);
  const double N = 1024.0;
  const double predicted = 2.0 * (std::sqrt(6.0) - 2.0) * std::sqrt(N) + 0.75 * std::log(1.5);
  EXPECT_NEAR(std::log(chain.back().second) / predicted, 1.0, 0.01);
}

TEST(HardyLittlewood, Examples) {
  const std::vector<Complex> one{1.0};
  auto c = hardy_littlewood_check(one, 1.0);
  EXPECT_NEAR(c.coefficient_sum, 1.0, 1e-15);
  EXPECT_NEAR(c.norm_power, 1.0, 1e-12);
  const std::vector<Complex> cube{0.0, 0.0, 0.0, 1.0};
  c = hardy_littlewood_check(cube, 1.0);
  EXPECT_NEAR(c.coefficient_sum, 0.25, 1e-15);
  EXPECT_NEAR(c.norm_power, 1.0, 1e-12);
  const std::vector<Complex> two_terms{0.0, 1.0, 1.0};
  c = hardy_littlewood_converse(two_terms, 2.0);
  EXPECT_NEAR(c.norm_power, 2.0, 1e-10);
  EXPECT_NEAR(c.coefficient_sum, 2.0, 1e-15);
  EXPECT_THROW((void)hardy_littlewood_check(std::vector<Complex>{}, 1.0), std::domain_error);
  EXPECT_THROW((void)hardy_littlewood_converse(one, 1.5), std::domain_error);
}

TEST(HardyLittlewood, RandomPolynomials) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto coeffs = random_poly(rng, 20);
    const auto lower = hardy_littlewood_check(coeffs, 1.0);
    EXPECT_LE(lower.coefficient_sum, 2.0 * lower.norm_power);
    const auto upper = hardy_littlewood_converse(coeffs, 4.0);
    EXPECT_LE(upper.norm_power, 2.0 * upper.coefficient_sum);
    const auto parseval = hardy_littlewood_converse(coeffs, 2.0);
    EXPECT_NEAR(parseval.norm_power, parseval.coefficient_sum, 1e-10 * parseval.coefficient_sum);
  }
}

TEST(SphereMoments, MatchGammaAsymptotic) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int n : {2, 3}) {
    std::vector<Complex> c(static_cast<std::size_t>(n));
    double s = 0.0;
    for (auto& v : c) {
      v = {g(rng), g(rng)};
      s += std::norm(v);
    }
    for (auto& v : c) v *= 0.8 / std::sqrt(s);
    const BallPoint w(c);
    for (int d = 0; d <= 64; ++d) {
      const double scale = std::exp(std::lgamma(d / 2.0 + 1.0) + std::lgamma(n) - std::lgamma(d / 2.0 + n)) *
                           std::pow(w.norm(), d);
      EXPECT_NEAR(sphere_power_mean(w, d) / scale, 1.0, 1e-8) << n << " " << d;
    }
  }
}

TEST(SphereMoments, GammaRatioWindow) {
  for (int n : {2, 3}) {
    double lo = INFINITY, hi = 0.0;
    for (int d = 1; d <= 10000; ++d) {
      const double v = std::exp(std::lgamma(d + n) + std::lgamma(d / 2.0 + 1.0) - std::log(d + 1.0) -
                                std::lgamma(d) - std::lgamma(d / 2.0 + n));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    // tends to 2^{n-1}; smallest at d = 1
    EXPECT_GT(lo, 0.25);
    EXPECT_LT(hi, std::exp2(n - 1) * 1.01);
  }
}

TEST(TheoremCheck, UnweightedBallIsBounded) {
  const TheoremReport rep = theorem_check(RadialWeight::standard(0.0), 2);
  EXPECT_EQ(rep.conclusion, Conclusion::consistent_bounded) << (rep.failures.empty() ? "" : rep.failures[0]);
  EXPECT_EQ(rep.functional_profile.size(), 12u);
  EXPECT_EQ(rep.cesaro_profile.size(), 9u);
  EXPECT_LE(rep.sandwich_upper, 10.0);
}

TEST(TheoremCheck, UnweightedDiskIsBounded) {
  const TheoremReport rep = theorem_check(RadialWeight::standard(0.0), 1);
  EXPECT_EQ(rep.conclusion, Conclusion::consistent_bounded) << (rep.failures.empty() ? "" : rep.failures[0]);
}

TEST(TheoremCheck, ExponentialIsUnbounded) {
  TheoremConfig cfg;
  cfg.k_max = 8;
  const TheoremReport rep = theorem_check(RadialWeight::exponential(1.0, 1.0), 2, cfg);
  EXPECT_EQ(rep.dhat_verdict.verdict, Verdict::not_in_class);
  EXPECT_TRUE(rep.cesaro_trend.divergent);
  EXPECT_EQ(rep.conclusion, Conclusion::consistent_unbounded);
}

TEST(TheoremCheck, ThreadCountDoesNotChangeResults) {
  TheoremConfig cfg;
  cfg.k_max = 6;
  const TheoremReport a = theorem_check(RadialWeight::standard(1.0), 2, cfg);
  cfg.threads = 3;
  const TheoremReport b = theorem_check(RadialWeight::standard(1.0), 2, cfg);
  ASSERT_EQ(a.functional_profile.size(), b.functional_profile.size());
  for (std::size_t i = 0; i < a.functional_profile.size(); ++i) {
    EXPECT_EQ(a.functional_profile[i].value, b.functional_profile[i].value);
  }
}
