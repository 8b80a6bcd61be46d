#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include "bergman/kernel.hpp"

using namespace bergman;

namespace {

std::shared_ptr<const MomentTable> table(RadialWeight w) { return std::make_shared<const MomentTable>(std::move(w)); }

KernelCoeffs standard_coeffs(double alpha, int n, long d_max = 4096) {
  return build_coeffs(table(RadialWeight::standard(alpha)), n, d_max);
}

BallPoint random_point(std::mt19937_64& rng, int n, double radius) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  std::vector<Complex> c(static_cast<std::size_t>(n));
  double s = 0.0;
  for (auto& v : c) {
    v = {g(rng), g(rng)};
    s += std::norm(v);
  }
  const double target = radius * std::pow(u(rng), 1.0 / (2 * n));
  for (auto& v : c) v *= target / std::sqrt(s);
  return BallPoint(c);
}

}  // namespace

TEST(Kernel, CoefficientsForConstantWeight) {
  const auto k2 = standard_coeffs(0.0, 2);
  EXPECT_NEAR(k2.coeff(0), 1.0, 1e-12);
  EXPECT_NEAR(k2.coeff(1), 3.0, 1e-11);
  EXPECT_NEAR(k2.coeff(2), 6.0, 1e-11);
  EXPECT_NEAR(k2.coeff(500), 501.0 * 502.0 / 2.0, 1e-6);
  const auto k1 = standard_coeffs(0.0, 1);
  for (int d : {0, 1, 7, 300}) EXPECT_NEAR(k1.coeff(d) / (d + 1.0), 1.0, 1e-11) << d;
}

TEST(Kernel, LazyExtensionPastEagerBlock) {
  const auto k = standard_coeffs(0.0, 2, 20000);
  const auto coeffs = k.log_coeffs(3000);
  ASSERT_EQ(coeffs.size(), 3001u);
  EXPECT_NEAR(std::exp(coeffs[3000]) / (3001.0 * 3002.0 / 2.0), 1.0, 1e-10);
  for (double c : coeffs) EXPECT_TRUE(std::isfinite(c));
}

TEST(Kernel, SpecExamples) {
  const auto k = standard_coeffs(0.0, 2);
  const auto z = BallPoint::along_e1(2, 0.5);
  EXPECT_NEAR(eval_kernel(k, z, z, 1e-12).value.real(), 1.0 / std::pow(0.75, 3), 1e-10);
  EXPECT_NEAR(std::abs(eval_kernel(k, BallPoint({0.3, 0.0}), BallPoint({0.0, 0.4}), 1e-12).value - 1.0), 0.0, 1e-12);
  EXPECT_NEAR(eval_g(k, 0.0, 1e-12).value.real(), 12.0, 1e-10);
  EXPECT_NEAR(eval_g(k, 0.25, 1e-12).value.real(), 12.0 / std::pow(0.75, 4), 1e-9);
  EXPECT_NEAR(eval_RK_at(k, 0.25, 1e-12).value.real(), 0.75 / std::pow(0.75, 4), 1e-10);
  EXPECT_NEAR(eval_RK_at(k, 0.5, 1e-12).value.real(), 24.0, 1e-9);
  EXPECT_EQ(eval_RK_at(k, 0.0, 1e-12).value, Complex{});
  EXPECT_NEAR(eval_disk_kernel_deriv(k, 0.0, 0.5, 1e-12).value.real(), 1.5, 1e-11);
  EXPECT_NEAR(eval_disk_kernel_deriv(k, 0.5, 0.5, 1e-12).value.real(), 0.5 * 12.0 / std::pow(0.75, 4) * 0.25, 1e-9);
  EXPECT_EQ(eval_disk_kernel_deriv(k, 0.5, 0.0, 1e-12).value, Complex{});
  EXPECT_NEAR(kernel_norm_sq(k, BallPoint({0.3, 0.4}), 1e-12), 1.0 / std::pow(0.75, 3), 1e-10);
  EXPECT_NEAR(kernel_norm_sq(k, BallPoint({0.0, 0.0}), 1e-12), k.coeff(0), 0.0);
}

TEST(Kernel, SliceFunctionInOneDimension) {
  // n = 1, rho = 1: g(l) = sum d (2d+2) l^{d-1} = 4 / (1-l)^3
  const auto k = standard_coeffs(0.0, 1);
  EXPECT_NEAR(eval_g(k, 0.5, 1e-12).value.real(), 4.0 / 0.125, 1e-9);
}

TEST(Kernel, WeightOnlyEntersThroughFirstTerm) {
  const auto k = build_coeffs(table(RadialWeight::logarithmic(0.5)), 2);
  const double c0 = 1.0 / (4.0 * k.moments().value(3.0));
  EXPECT_NEAR(eval_kernel(k, BallPoint({0.3, 0.2}), BallPoint({0.0, 0.0}), 1e-12).value.real(), c0, 1e-12 * c0);
}

TEST(Kernel, ClosedFormForStandardWeights) {
  std::mt19937_64 rng(7);
  for (double alpha : {0.0, 1.0, 2.0}) {
    for (int n : {1, 2, 3}) {
      const auto k = standard_coeffs(alpha, n);
      const double c0 = k.coeff(0);
      int checked = 0;
      while (checked < 50) {
        const BallPoint z = random_point(rng, n, 0.99);
        const BallPoint w = random_point(rng, n, 0.99);
        const Complex t = inner(z, w);
        if (std::abs(t) > 0.9) continue;
        const Complex exact = c0 * std::pow(1.0 - t, -(n + 1.0 + alpha));
        const SeriesValue v = eval_kernel(k, z, w, 1e-11 * c0);
        EXPECT_LT(std::abs(v.value - exact) / std::abs(exact), 1e-8) << "alpha=" << alpha << " n=" << n;
        ++checked;
      }
    }
  }
}

TEST(Kernel, TailBoundIsHonestUnderDoubling) {
  const auto k = build_coeffs(table(RadialWeight::logarithmic(0.0)), 2, 20000);
  for (double m : {0.3, 0.8, 0.95}) {
    const Complex t = std::polar(m, 0.7);
    const double tol = 1e-9;
    const SeriesValue v = eval_kernel_at(k, t, tol);
    EXPECT_LT(v.tail_bound, tol);
    auto arr = k.arrays(2 * v.degree + 1);
    Complex longer{};
    for (long d = 0; d <= 2 * v.degree + 1; ++d) longer += std::exp(arr->log_c[static_cast<std::size_t>(d)]) * std::pow(t, static_cast<double>(d));
    EXPECT_LT(std::abs(longer - v.value), 2 * tol) << m;
  }
}

TEST(Kernel, RadialDerivativeMatchesFiniteDifference) {
  const auto k = build_coeffs(table(RadialWeight::standard(1.0)), 2);
  for (double t : {0.1, 0.5, 0.8}) {
    const double h = 1e-5;
    const double fd = t * (eval_kernel_at(k, t + h, 1e-14).value.real() - eval_kernel_at(k, t - h, 1e-14).value.real()) / (2 * h);
    const double rk = eval_RK_at(k, t, 1e-12).value.real();
    EXPECT_LT(std::abs(rk - fd) / rk, 1e-5) << t;
    EXPECT_NEAR(eval_RK_direct(k, t, 1e-12).value.real(), rk, 1e-10 * rk);
  }
}

TEST(Kernel, DiskDerivativeRoutesAgree) {
  const auto k = build_coeffs(table(RadialWeight::exponential(1.0, 1.0)), 2);
  const Complex z(0.3, 0.2);
  const Complex w(-0.4, 0.5);
  const SeriesValue viag = eval_disk_kernel_deriv(k, z, w, 1e-10);
  const SeriesValue series = disk_kernel_deriv_series(k, z, w, 2, 1e-10);
  EXPECT_LT(std::abs(viag.value - series.value), 1e-9 * std::abs(series.value));
  // order 1 against a finite difference of order 0
  const double h = 1e-5;
  const Complex fd = (disk_kernel_deriv_series(k, z + h, w, 0, 1e-13).value -
                      disk_kernel_deriv_series(k, z - h, w, 0, 1e-13).value) / (2 * h);
  const Complex d1 = eval_disk_kernel_deriv(k, z, w, 1, 1e-12).value;
  EXPECT_LT(std::abs(fd - d1) / std::abs(d1), 1e-6);
}

TEST(Kernel, HermitianAndDiagonalPositivity) {
  std::mt19937_64 rng(11);
  const auto k = build_coeffs(table(RadialWeight::logarithmic(1.0)), 3);
  for (int i = 0; i < 20; ++i) {
    const BallPoint z = random_point(rng, 3, 0.9);
    const BallPoint w = random_point(rng, 3, 0.9);
    const Complex a = eval_kernel(k, z, w, 1e-10).value;
    const Complex b = eval_kernel(k, w, z, 1e-10).value;
    EXPECT_EQ(a, std::conj(b));
    const Complex diag = eval_kernel(k, z, z, 1e-10).value;
    EXPECT_EQ(diag.imag(), 0.0);
    EXPECT_GE(diag.real(), k.coeff(0));
  }
}

TEST(Kernel, NormMatchesBallQuadrature) {
  const auto k = standard_coeffs(0.0, 2);
  const BallPoint z = BallPoint::along_e1(2, 0.5);
  QuadSpec q;
  q.tolerance = 1e-6;
  const RadialWeight rho = RadialWeight::standard(0.0);
  const double integral =
      integrate_ball_radial(
          [&](double s) {
            return sphere_slice_average_radial(
                [&](double p) {
                  return circle_mean(
                      [&](double th) { return std::norm(eval_kernel_at(k, std::polar(0.5 * s * p, th), 1e-10).value); },
                      q, 16);
                },
                2, q);
          },
          rho, 2, q)
          .value;
  EXPECT_NEAR(integral, kernel_norm_sq(k, z, 1e-12), 1e-4);
}

TEST(Kernel, TruncationErrorCarriesPartialSum) {
  const auto k = build_coeffs(table(RadialWeight::standard(0.0)), 2, 64);
  try {
    (void)eval_kernel_at(k, 0.99, 1e-12);
    FAIL() << "expected TruncationError";
  } catch (const TruncationError& e) {
    EXPECT_EQ(e.degree(), 64);
    EXPECT_GT(e.partial_sum().real(), 0.0);
  }
  EXPECT_THROW((void)eval_kernel_at(k, 1.0, 1e-12), std::domain_error);
}

TEST(Kernel, ConcurrentExtensionIsConsistent) {
  const auto k = build_coeffs(table(RadialWeight::logarithmic(0.0)), 2, 8192);
  std::vector<std::thread> pool;
  std::vector<double> seen(4);
  for (int i = 0; i < 4; ++i) {
    pool.emplace_back([&, i] { seen[static_cast<std::size_t>(i)] = k.log_coeff(600 + 100 * i); });
  }
  for (auto& t : pool) t.join();
  for (int i = 0; i < 4; ++i) EXPECT_EQ(seen[static_cast<std::size_t>(i)], k.log_coeff(600 + 100 * i));
}
