#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "bergman/weights.hpp"

using namespace bergman;

namespace {
double beta_fn(double a, double b) { return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)); }
}  // namespace

TEST(Weights, StandardTailClosedForm) {
  // int_{1/2}^1 (1 - r^2) dr = 5/24
  EXPECT_NEAR(tail(RadialWeight::standard(1.0), 0.5), 5.0 / 24.0, 1e-12);
  EXPECT_NEAR(tail(RadialWeight::standard(-0.5), 0.9), 0.451026811796262378, 1e-11);
}

TEST(Weights, StandardMomentsAreBetaFunctions) {
  for (double alpha : {-0.5, 0.0, 1.0, 2.5}) {
    MomentTable t(RadialWeight::standard(alpha));
    for (double x : {1.0, 3.0, 10.0, 101.0, 2000.0}) {
      const double exact = 0.5 * beta_fn((x + 1.0) / 2.0, alpha + 1.0);
      EXPECT_NEAR(t.value(x) / exact, 1.0, 1e-10) << "alpha=" << alpha << " x=" << x;
    }
  }
}

TEST(Weights, OtherFamiliesAgainstHighPrecision) {
  EXPECT_NEAR(tail(RadialWeight::logarithmic(0.0), 0.5) / 0.0903629824105416840, 1.0, 1e-10);
  EXPECT_NEAR(tail(RadialWeight::exponential(1.0, 1.0), 0.5) / 0.0187671309102452264, 1.0, 1e-10);
  MomentTable e(RadialWeight::exponential(1.0, 1.0));
  EXPECT_NEAR(e.value(5.0) / 0.00214434638699692999, 1.0, 1e-10);
  EXPECT_NEAR(e.value(1000.0) / 2.0024415206581476238e-30, 1.0, 1e-9);
  MomentTable l(RadialWeight::logarithmic(0.0));
  EXPECT_NEAR(l.value(3.0) / 0.0382532763124983005, 1.0, 1e-10);
}

TEST(Weights, MomentsAreMemoized) {
  MomentTable t(RadialWeight::standard(1.0));
  const double a = t.value(7.0);
  const std::size_t size = t.size();
  EXPECT_EQ(t.value(7.0), a);
  EXPECT_EQ(t.size(), size);
}

TEST(Weights, InterpolatedMomentsAreSmooth) {
  MomentTable t(RadialWeight::standard(1.0));
  for (double x : {20000.0, 50000.0, 300001.0}) {
    const double exact = std::log(0.5 * beta_fn((x + 1.0) / 2.0, 2.0));
    EXPECT_NEAR(t.smooth_log_value(x), exact, 1e-9) << x;
  }
}

TEST(Weights, InvalidParametersRejected) {
  EXPECT_THROW(RadialWeight::standard(-1.0), std::invalid_argument);
  EXPECT_THROW(RadialWeight::exponential(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(RadialWeight::tabulated({0.0, 0.5}, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW((void)RadialWeight::standard(0.0)(1.0), std::domain_error);
  MomentTable t(RadialWeight::standard(0.0));
  EXPECT_THROW((void)t.value(0.5), std::domain_error);
}

TEST(Weights, TabulatedReproducesSampledWeight) {
  std::vector<double> r;
  std::vector<double> v;
  for (int i = 0; i <= 200; ++i) {
    const double x = 1.0 - std::exp2(-i / 10.0);
    r.push_back(x);
    v.push_back(1.0 - x * x);
  }
  const RadialWeight w = RadialWeight::tabulated(r, v);
  EXPECT_NEAR(w(0.3), 1.0 - 0.09, 5e-5);
  EXPECT_NEAR(tail(w, 0.5) / (5.0 / 24.0), 1.0, 1e-5);
  ASSERT_TRUE(w.extrapolated_beyond().has_value());
}

TEST(Diagnostics, TailHalvingVerdicts) {
  const auto radii = dyadic_radii(24);
  const auto std0 = is_dhat_tail(RadialWeight::standard(0.0), radii);
  EXPECT_EQ(std0.verdict, Verdict::in_class);
  EXPECT_NEAR(std0.estimated_constant, 2.0, 1e-8);
  const auto lg = is_dhat_tail(RadialWeight::logarithmic(0.0), radii);
  EXPECT_EQ(lg.verdict, Verdict::in_class);
  const auto ex = is_dhat_tail(RadialWeight::exponential(1.0, 1.0), radii);
  EXPECT_EQ(ex.verdict, Verdict::not_in_class);
}

TEST(Diagnostics, MomentDoublingVerdicts) {
  MomentTable s(RadialWeight::standard(3.0));
  EXPECT_EQ(is_dhat_moments(s).verdict, Verdict::in_class);
  MomentTable e(RadialWeight::exponential(1.0, 1.0));
  EXPECT_EQ(is_dhat_moments(e).verdict, Verdict::not_in_class);
}

TEST(Diagnostics, RegularityVerdicts) {
  const auto radii = dyadic_radii(24);
  EXPECT_EQ(is_regular(RadialWeight::standard(1.0), radii).verdict, Verdict::in_class);
  EXPECT_EQ(is_regular(RadialWeight::exponential(1.0, 1.0), radii).verdict, Verdict::not_in_class);
}

TEST(Diagnostics, BetaEstimateForStandardWeight) {
  const auto radii = dyadic_radii(20);
  const std::vector<double> betas = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0};
  const auto est = dhat_beta_estimate(RadialWeight::standard(0.0), radii, betas);
  ASSERT_TRUE(est.admissible);
  EXPECT_NEAR(est.beta0, 1.0, 1e-12);
  EXPECT_LE(est.constant, 1.0 + 1e-9);
}
