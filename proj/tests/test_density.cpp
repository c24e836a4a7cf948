#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "steininfo/density.hpp"

using namespace steininfo;

namespace {

const std::vector<std::string> kBuiltins = {"gaussian", "exponential", "uniform", "semicircle", "arcsine", "quartic"};

// 12^(1/4) Gamma(1/4) / 2, from t = x^4/12.
const double kQuarticZ = std::pow(12.0, 0.25) * std::tgamma(0.25) / 2.0;

TEST(Builtin, GaussianScore) { EXPECT_DOUBLE_EQ(builtin_density("gaussian", {0, 1}).score(1.0), -1.0); }

TEST(Builtin, ExponentialAtZero) {
  const auto p = builtin_density("exponential", {1});
  EXPECT_DOUBLE_EQ(p.pdf(0.0), 1.0);
  EXPECT_EQ(p.pdf(-1e-12), 0.0);
  EXPECT_TRUE(p.support().a_closed);
}

TEST(Builtin, QuarticNormalization) {
  const auto p = builtin_density("quartic");
  EXPECT_NEAR(std::exp(p.log_partition()), kQuarticZ, 1e-9);
  const double mass = oracle::simpson([&](double x) { return p.pdf(x); }, -12.0, 12.0);
  EXPECT_NEAR(mass, 1.0, 1e-9);
}

TEST(Builtin, Supports) {
  EXPECT_EQ(builtin_density("gaussian").support(), Support::real_line());
  EXPECT_EQ(builtin_density("exponential").support(), Support::make(0, kInf, true, false));
  EXPECT_EQ(builtin_density("uniform").support(), Support::make(0, 1, true, true));
  EXPECT_EQ(builtin_density("semicircle").support(), Support::make(-2, 2));
  EXPECT_EQ(builtin_density("arcsine").support(), Support::make(0, 1));
  EXPECT_EQ(builtin_density("quartic").support(), Support::real_line());
}

TEST(Builtin, Errors) {
  EXPECT_THROW(builtin_density("exponential", {0.0}), InvalidParameter);
  EXPECT_THROW(builtin_density("exponential", {-1.0}), InvalidParameter);
  EXPECT_THROW(builtin_density("gaussian", {0.0, 0.0}), InvalidParameter);
  EXPECT_THROW(builtin_density("quartic", {0.0, -2.0}), InvalidParameter);
  EXPECT_THROW(builtin_density("cauchy"), UnknownFamily);
  EXPECT_THROW(builtin_density("uniform", {1.0, 0.0}), InvalidParameter);
}

TEST(Builtin, ZeroOffSupport) {
  for (const auto& name : kBuiltins) {
    const auto p = builtin_density(name);
    const Support& s = p.support();
    if (s.finite_a()) {
      EXPECT_EQ(p.pdf(s.a - 0.5), 0.0) << name;
      EXPECT_EQ(p.score(s.a - 0.5), 0.0) << name;
      EXPECT_EQ(p.cdf(s.a - 0.5), 0.0) << name;
    }
    if (s.finite_b()) {
      EXPECT_EQ(p.pdf(s.b + 0.5), 0.0) << name;
      EXPECT_EQ(p.cdf(s.b + 0.5), 1.0) << name;
    }
  }
}

TEST(Builtin, UnitMass) {
  for (const auto& name : kBuiltins) {
    const auto p = builtin_density(name);
    const auto r = integrate([&](double x) { return p.pdf(x); }, p.support(), detail::tight_spec());
    EXPECT_NEAR(r.value, 1.0, 1e-9) << name;
  }
}

TEST(Builtin, AnalyticScoreMatchesLogDerivative) {
  for (const auto& name : kBuiltins) {
    const auto p = builtin_density(name);
    for (double x : p.quantile_grid(101, 0.01, 0.99)) {
      const Support& sp = p.support();
      double h = 1e-3 * std::max(1.0, std::abs(x));
      if (sp.finite_a()) h = std::min(h, 1e-3 * (x - sp.a));
      if (sp.finite_b()) h = std::min(h, 1e-3 * (sp.b - x));
      const double num = (p.log_pdf(x + h) - p.log_pdf(x - h)) / (2.0 * h);
      const double s = p.score(x);
      EXPECT_LE(std::abs(s - num), 1e-5 * std::max(1.0, std::abs(s))) << name << " x=" << x;
    }
  }
}

TEST(Cdf, SpotValues) {
  EXPECT_NEAR(cdf_at(builtin_density("gaussian"), 0.0), 0.5, 1e-15);
  EXPECT_NEAR(cdf_at(builtin_density("exponential", {1}), std::log(2.0)), 0.5, 1e-15);
  EXPECT_NEAR(cdf_at(builtin_density("uniform"), 0.25), 0.25, 1e-15);
  EXPECT_NEAR(cdf_at(builtin_density("gaussian"), 1.3), oracle::normal_cdf(1.3), 1e-12);
}

TEST(Cdf, EndpointsAndMonotone) {
  for (const auto& name : kBuiltins) {
    const auto p = builtin_density(name);
    const Support& s = p.support();
    const double lo = s.finite_a() ? s.a : p.quantile(1e-12);
    const double hi = s.finite_b() ? s.b : p.quantile(1 - 1e-12);
    // arcsine keeps about 2 sqrt(ulp) / pi of mass in the last ulp
    EXPECT_LE(p.cdf(std::nextafter(lo, hi)), 1e-8) << name;
    EXPECT_GE(p.cdf(std::nextafter(hi, lo)), 1.0 - 1e-8) << name;
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double v = p.cdf(lo + (hi - lo) * i / 1000.0);
      EXPECT_GE(v, prev) << name << " i=" << i;
      prev = v;
    }
  }
}

TEST(Cdf, QuarticTableAgainstQuadrature) {
  const auto p = builtin_density("quartic");
  for (double x : {-3.0, -1.0, -0.2, 0.0, 0.7, 2.0, 4.5}) {
    const double ref = oracle::simpson([&](double u) { return std::exp(-u * u * u * u / 12.0) / kQuarticZ; }, -12.0, x);
    EXPECT_NEAR(p.cdf(x), ref, 5e-10) << x;
    EXPECT_NEAR(p.sf(x), 1.0 - ref, 5e-10) << x;
  }
  EXPECT_NEAR(p.cdf(0.0), 0.5, 1e-12);
  EXPECT_GT(p.sf(6.0), 0.0);
  EXPECT_LT(p.sf(6.0), 1e-20);
}

TEST(Cdf, QuantileRoundTrip) {
  for (const auto& name : kBuiltins) {
    const auto p = builtin_density(name);
    for (double u : {1e-6, 0.05, 0.3, 0.5, 0.77, 0.999}) EXPECT_NEAR(p.cdf(p.quantile(u)), u, 1e-9) << name;
  }
}

TEST(Cdf, ConcurrentLazyTable) {
  const auto p = builtin_density("quartic", {0.3, 1.1});
  std::vector<double> out(8);
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) ts.emplace_back([&, i] { out[static_cast<std::size_t>(i)] = p.cdf(0.1 * i); });
  for (auto& t : ts) t.join();
  for (int i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(out[static_cast<std::size_t>(i)], p.cdf(0.1 * i));
}

TEST(Pearson, GaussianSpec) {
  const auto p = pearson_density({Polynomial{{1.0}}, Polynomial{{0.0, -1.0}}, Support::real_line()});
  const auto g = builtin_density("gaussian");
  for (double x : g.quantile_grid(101)) EXPECT_NEAR(p.pdf(x), g.pdf(x), 1e-9);
  EXPECT_NEAR(p.score(1.5), -1.5, 1e-14);
}

TEST(Pearson, GammaSpec) {
  // s = x, tau = 2 - x on (0, inf): p = x e^-x.
  const auto p = pearson_density({Polynomial{{0.0, 1.0}}, Polynomial{{2.0, -1.0}}, Support::make(0.0, kInf)});
  for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 12.0}) EXPECT_NEAR(p.pdf(x), x * std::exp(-x), 1e-9) << x;
  EXPECT_NEAR(p.score(2.0), 1.0 / 2.0 - 1.0, 1e-14);
}

TEST(Pearson, SemicircleSpec) {
  const auto p = pearson_density({Polynomial{{4.0, 0.0, -1.0}}, Polynomial{{0.0, -3.0}}, Support::make(-2.0, 2.0)});
  const auto sc = builtin_density("semicircle");
  for (double x : sc.quantile_grid(101)) EXPECT_NEAR(p.pdf(x), sc.pdf(x), 1e-9);
}

TEST(Pearson, BetaLikeSpecWithPositiveDiscriminant) {
  // s = x(1-x), tau = 2 - 4x on (0,1): (s p)' = tau p gives p ~ x(1-x), i.e. Beta(2,2).
  const auto p = pearson_density({Polynomial{{0.0, 1.0, -1.0}}, Polynomial{{2.0, -4.0}}, Support::make(0.0, 1.0)});
  for (double x : {0.1, 0.3, 0.5, 0.9}) EXPECT_NEAR(p.pdf(x), 6.0 * x * (1.0 - x), 1e-9) << x;
}

TEST(Pearson, Errors) {
  EXPECT_THROW(pearson_density({Polynomial{{1.0}}, Polynomial{{1.0}}, Support::real_line()}), InvalidParameter);
  EXPECT_THROW(pearson_density({Polynomial{{1.0, 0.0, 0.0, 1.0}}, Polynomial{{0.0, -1.0}}, Support::real_line()}),
               InvalidParameter);
  EXPECT_THROW(pearson_density({Polynomial{{0.0, 1.0}}, Polynomial{{0.0, -1.0}}, Support::real_line()}),
               InvalidParameter);  // s = x is not positive on the line
  // s = 1, tau = +x: e^{x^2/2} is not integrable.
  EXPECT_THROW(pearson_density({Polynomial{{1.0}}, Polynomial{{0.0, 1.0}}, Support::real_line()}), NonIntegrable);
}

TEST(Unnormalized, ExponentialAndScaleInvariance) {
  const Support half = Support::make(0.0, kInf, true, false);
  const auto e = builtin_density("exponential", {1});
  const auto a = density_from_unnormalized([](double x) { return std::exp(-x); }, half);
  const auto b = density_from_unnormalized([](double x) { return 2.0 * std::exp(-x); }, half);
  for (double x : e.quantile_grid(51)) {
    EXPECT_NEAR(a.pdf(x), e.pdf(x), 1e-9);
    EXPECT_NEAR(b.pdf(x), e.pdf(x), 1e-9);
  }
  EXPECT_FALSE(a.analytic_score());
  EXPECT_NEAR(a.score(1.0), -1.0, 1e-7);
  EXPECT_NEAR(a.score(1e-9), -1.0, 1e-6);  // one-sided near the closed end
}

TEST(Unnormalized, QuarticPartition) {
  const auto p = density_from_unnormalized([](double x) { return std::exp(-std::pow(x, 4) / 12.0); }, Support::real_line());
  EXPECT_NEAR(std::exp(p.log_partition()), kQuarticZ, 1e-9);
}

TEST(Unnormalized, NonIntegrable) {
  EXPECT_THROW(density_from_unnormalized([](double x) { return 1.0 / (1.0 + std::abs(x)); }, Support::real_line()),
               NonIntegrable);
}

TEST(SupportType, Invariants) {
  EXPECT_THROW(Support::make(1.0, 1.0), InvalidParameter);
  EXPECT_THROW(Support::make(0.0, kInf, false, true), InvalidParameter);
  const Support s = Support::make(0.0, 1.0, true, false);
  EXPECT_TRUE(s.contains(0.0));
  EXPECT_FALSE(s.contains(1.0));
  EXPECT_FALSE(s.interior(0.0));
}

TEST(Grids, ScanGridReachesTails) {
  const auto g = builtin_density("gaussian");
  const auto xs = g.scan_grid(101);
  EXPECT_LT(xs.front(), -5.5);
  EXPECT_GT(xs.back(), 5.5);
  const auto e = builtin_density("exponential");
  EXPECT_EQ(e.scan_grid(11).front(), 0.0);
}

}  // namespace
