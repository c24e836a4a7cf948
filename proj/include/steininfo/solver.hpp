#pragma once

// Stein equation T(f, p) = l - E_p[l] on S, solved by integration:
//   f(x) =  (1/p(x)) int_a^x (l(u) - E_p l) p(u) du     (x <= median)
//   f(x) = -(1/p(x)) int_x^b (l(u) - E_p l) p(u) du     (x >  median)
// Both forms agree because the centred observable integrates to zero. The
// ratio p(u)/p(x) is taken in log space so tails never underflow.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "steininfo/density.hpp"
#include "steininfo/errors.hpp"
#include "steininfo/quadrature.hpp"
#include "steininfo/report.hpp"
#include "steininfo/stein.hpp"
#include "steininfo/test_function.hpp"

namespace steininfo {

enum class ObservableKind { smooth, indicator_halfline, tv_sign, dirac };

struct Observable {
  ObservableKind kind = ObservableKind::smooth;
  std::function<double(double)> l;
  std::string label;
  std::vector<double> breakpoints;  // discontinuities of l
  bool constant = false;
  double constant_value = 0.0;
  double location = 0.0;  // z for indicators, x0 for Dirac

  double operator()(double x) const { return l(x); }
  bool discontinuous() const {
    return kind == ObservableKind::indicator_halfline || kind == ObservableKind::tv_sign;
  }

  static Observable smooth(std::function<double(double)> fn, std::string label) {
    Observable o;
    o.l = std::move(fn);
    o.label = std::move(label);
    return o;
  }

  static Observable polynomial(std::vector<double> coeffs) {
    Observable o;
    o.label = "poly:";
    for (std::size_t i = 0; i < coeffs.size(); ++i) o.label += (i ? "," : "") + detail::fmt_num(coeffs[i]);
    const Polynomial poly{coeffs};
    o.l = [poly](double x) { return poly(x); };
    o.constant = poly.degree() <= 0;
    o.constant_value = poly.coeff(0);
    return o;
  }

  static Observable constant_observable(double c) { return polynomial({c}); }

  static Observable indicator(double z) {
    Observable o;
    o.kind = ObservableKind::indicator_halfline;
    o.location = z;
    o.l = [z](double u) { return u <= z ? 1.0 : 0.0; };
    o.label = "indicator:" + detail::fmt_num(z);
    o.breakpoints = {z};
    return o;
  }

  /// l = I{p <= q} - I{p >= q}, compared in log space.
  static Observable tv_sign(const Density& p, const Density& q);

  /// Point mass observable; never evaluated as a function (see kappa2).
  static Observable dirac(double x0) {
    Observable o;
    o.kind = ObservableKind::dirac;
    o.location = x0;
    o.label = "dirac:" + detail::fmt_num(x0);
    return o;
  }
};

/// Sign changes of log p - log q on a merged scan grid, refined by bisection.
inline std::vector<double> density_crossings(const Density& p, const Density& q, std::size_t grid = 801) {
  std::vector<double> xs = p.scan_grid(grid);
  const auto qs = q.scan_grid(grid);
  xs.insert(xs.end(), qs.begin(), qs.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  auto diff = [&](double x) {
    const double d = p.log_pdf(x) - q.log_pdf(x);
    return std::isnan(d) ? 0.0 : d;
  };
  std::vector<double> roots;
  double prev_x = 0.0, prev_d = 0.0;
  bool have_prev = false;
  for (double x : xs) {
    if (!p.support().interior(x) || !q.support().interior(x)) continue;
    const double d = diff(x);
    if (d == 0.0) continue;
    if (have_prev && (d > 0) != (prev_d > 0)) {
      double lo = prev_x, hi = x;
      const bool lo_pos = prev_d > 0;
      for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double dm = diff(mid);
        if (dm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((dm > 0) == lo_pos) lo = mid; else hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_x = x;
    prev_d = d;
    have_prev = true;
  }
  return roots;
}

inline Observable Observable::tv_sign(const Density& p, const Density& q) {
  Observable o;
  o.kind = ObservableKind::tv_sign;
  o.label = "tv_sign";
  o.l = [p, q](double u) {
    const double d = q.log_pdf(u) - p.log_pdf(u);
    if (std::isnan(d) || d == 0.0) return 0.0;
    return d > 0.0 ? 1.0 : -1.0;
  };
  o.breakpoints = density_crossings(p, q);
  return o;
}

struct SolverOptions {
  QuadratureSpec inner{1e-13, 1e-12, 400, Transform::automatic};
  QuadratureSpec mean{1e-13, 1e-12, 4000, Transform::automatic};
  double unbounded_threshold = 1e6;
};

struct SteinSolution {
  TestFunction f;  // full solution; for factored targets f = f0 * s
  double centered_mean = 0.0;
  double split_point = 0.0;  // left integral form at or below, right form above
  std::optional<TestFunction> f0;
  std::optional<TestFunction> factor;
  std::function<double(double)> left_form;
  std::function<double(double)> right_form;
  double quad_error = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

struct SolverCore {
  Density p;
  Observable l;
  double mean = 0.0;
  double median = 0.0;
  std::vector<double> cuts;
  QuadratureSpec spec;

  double centered(double u) const { return l.constant ? 0.0 : l(u) - mean; }

  double left(double x) const {
    const Support& s = p.support();
    if (!(x > s.a) || l.constant) return 0.0;
    const double lp = p.log_pdf(x);
    if (lp == -kInf) return 0.0;
    const double hi = std::min(x, s.b);
    auto g = [&](double u) {
      const double c = centered(u);
      return c == 0.0 ? 0.0 : c * std::exp(p.log_pdf(u) - lp);
    };
    return integrate(g, s.a, hi, spec, cuts).value;
  }

  double right(double x) const {
    const Support& s = p.support();
    if (!(x < s.b) || l.constant) return 0.0;
    const double lp = p.log_pdf(x);
    if (lp == -kInf) return 0.0;
    const double lo = std::max(x, s.a);
    auto g = [&](double u) {
      const double c = centered(u);
      return c == 0.0 ? 0.0 : c * std::exp(p.log_pdf(u) - lp);
    };
    return -integrate(g, lo, s.b, spec, cuts).value;
  }

  double value(double x) const {
    if (!p.support().contains(x)) return 0.0;
    return x <= median ? left(x) : right(x);
  }
};

inline Estimate observable_mean(const Density& p, const Observable& l, const QuadratureSpec& spec) {
  if (l.kind == ObservableKind::dirac) throw InvalidParameter("Dirac observables have no pointwise Stein solution");
  if (l.constant) return {l.constant_value, 0.0};
  const QuadResult num = expect(p, l.l, l.breakpoints, spec);
  const QuadResult mass = expect(p, [](double) { return 1.0; }, l.breakpoints, spec);
  if (!usable(num) || !usable(mass)) throw NonConvergence("E_p[l] did not converge for " + l.label);
  return {num.value / mass.value, num.error_estimate + std::abs(num.value) * mass.error_estimate};
}

}  // namespace detail

/// Solution of T(f,p) = l - E_p[l]; the derivative comes from the equation itself.
inline SteinSolution solve_stein_equation(const Density& p, const Observable& l, const SolverOptions& opt = {}) {
  auto core = std::make_shared<detail::SolverCore>();
  core->p = p;
  core->l = l;
  const Estimate mean = detail::observable_mean(p, l, opt.mean);
  core->mean = mean.value;
  core->median = p.quantile(0.5);
  core->spec = opt.inner;
  core->cuts.assign(p.landmarks().begin(), p.landmarks().end());
  core->cuts.insert(core->cuts.end(), l.breakpoints.begin(), l.breakpoints.end());

  SteinSolution sol;
  sol.centered_mean = core->mean;
  sol.split_point = core->median;
  sol.quad_error = mean.quad_error;
  auto fval = [core](double x) { return core->value(x); };
  auto dfval = [core](double x) {
    if (!core->p.support().interior(x)) return 0.0;
    const double fx = core->value(x);
    return core->centered(x) - (fx == 0.0 ? 0.0 : fx * core->p.score(x));
  };
  sol.f = TestFunction{fval, dfval, "f[" + l.label + "; " + p.label() + "]", true};
  sol.left_form = [core](double x) { return core->left(x); };
  sol.right_form = [core](double x) { return core->right(x); };

  double worst = 0.0;
  if (!l.constant) {
    for (double x : p.quantile_grid(21, 1e-4, 1 - 1e-4)) worst = std::max(worst, std::abs(fval(x) * p.pdf(x)));
  }
  if (worst > opt.unbounded_threshold) sol.warnings.push_back("f*p scan exceeds bound threshold");
  return sol;
}

/// Factored solution f = f0 * s for targets whose test functions vanish with s at the boundary.
inline SteinSolution solve_in_f0_form(const Density& p, const TestFunction& s, const Observable& l,
                                      const SolverOptions& opt = {}) {
  for (double x : p.quantile_grid(101, 1e-4, 1 - 1e-4)) {
    if (p.support().interior(x) && !(s(x) > 0.0)) throw InvalidParameter("s must be positive on the interior");
  }
  SteinSolution sol = solve_stein_equation(p, l, opt);
  const Support& sp = p.support();
  for (double d : {1e-6, 1e-9, 1e-12}) {
    for (double x : {sp.a + d, sp.b - d}) {
      const double sp_x = std::abs(s(x) * p.pdf(x));
      if (sp.interior(x) && !(sp_x < opt.unbounded_threshold)) sol.warnings.push_back("s*p unbounded near the boundary");
    }
  }
  const TestFunction full = sol.f;
  auto f0 = [full, s](double x) {
    const double sv = s(x);
    return sv == 0.0 ? 0.0 : full(x) / sv;
  };
  auto df0 = [full, s](double x) {
    const double sv = s(x);
    if (sv == 0.0) return 0.0;
    return (full.derivative(x) - full(x) / sv * s.derivative(x)) / sv;
  };
  sol.f0 = TestFunction{f0, df0, "f0[" + l.label + "; " + p.label() + "]", true};
  sol.factor = s;
  return sol;
}

/// f_z^p(x) = (P(min(x,z)) - P(x) P(z)) / p(x), written with cdf/sf for tail accuracy.
inline double indicator_solution_closed_form(const Density& p, double z, double x) {
  if (!p.support().contains(x)) return 0.0;
  const double w = p.pdf(x);
  if (w == 0.0) return kInf;
  return x <= z ? p.cdf(x) * p.sf(z) / w : p.cdf(z) * p.sf(x) / w;
}

/// Solution with l = I(-inf, z]; closed form where the target has an analytic cdf.
inline SteinSolution solve_indicator(const Density& p, double z, const SolverOptions& opt = {}) {
  if (!p.support().interior(z)) throw InvalidParameter("indicator point z lies outside the support interior");
  SteinSolution sol = solve_stein_equation(p, Observable::indicator(z), opt);
  const bool closed = p.model()->cdf_closed != nullptr;
  if (closed) {
    const TestFunction generic = sol.f;
    const double mean = sol.centered_mean;
    auto fval = [p, z, generic](double x) {
      const double v = indicator_solution_closed_form(p, z, x);
      return std::isfinite(v) ? v : generic(x);
    };
    auto dfval = [p, z, fval, mean](double x) {
      if (!p.support().interior(x)) return 0.0;
      const double fx = fval(x);
      return (x <= z ? 1.0 : 0.0) - mean - (fx == 0.0 ? 0.0 : fx * p.score(x));
    };
    sol.f = TestFunction{fval, dfval, "f_z[" + detail::fmt_num(z) + "; " + p.label() + "]", true};
  }
  return sol;
}

namespace detail {

/// Ridders' extrapolated central difference.
template <class F>
double ridders_derivative(F&& f, double x, double h) {
  constexpr int kTab = 10;
  constexpr double kCon = 1.4, kCon2 = kCon * kCon, kSafe = 2.0;
  std::array<std::array<double, kTab>, kTab> a{};
  double hh = h;
  a[0][0] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
  double err = kInf, ans = a[0][0];
  for (int i = 1; i < kTab; ++i) {
    hh /= kCon;
    a[0][i] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
    double fac = kCon2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= kCon2;
      const double errt = std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
      if (errt <= err) {
        err = errt;
        ans = a[j][i];
      }
    }
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= kSafe * err) break;
  }
  return ans;
}

}  // namespace detail

/// max |T(f,p)(x) - (l(x) - E_p l)| over an interior quantile grid, with f'
/// taken by extrapolated finite differences of f (independent of sol.f.df).
/// Grid points whose neighbouring cell contains a discontinuity of l are skipped.
inline BoundReport residual_check(const Density& p, const Observable& l, const SteinSolution& sol,
                                  int grid_size = 101) {
  const auto grid = p.quantile_grid(static_cast<std::size_t>(grid_size));
  const Support& s = p.support();
  double dev = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (!s.interior(x)) continue;
    const double lo = grid[i == 0 ? 0 : i - 1], hi = grid[std::min(i + 1, grid.size() - 1)];
    bool near_jump = false;
    double room = std::min(x - s.a, s.b - x);
    for (double d : l.breakpoints) {
      if (l.discontinuous() && d >= lo && d <= hi) near_jump = true;
      room = std::min(room, std::abs(x - d));
    }
    if (near_jump) continue;
    const double h = std::min(0.1 * std::max(1.0, std::abs(x)), 0.25 * room);
    const double deriv = detail::ridders_derivative([&](double y) { return sol.f(y); }, x, h);
    const double fx = sol.f(x);
    const double lhs = deriv + (fx == 0.0 ? 0.0 : fx * p.score(x));
    const double target = l.constant ? 0.0 : l(x) - sol.centered_mean;
    dev = std::max(dev, std::abs(lhs - target));
    ++used;
  }
  const double tol = l.discontinuous() ? 1e-4 : 1e-6;
  BoundReport rep = BoundReport::identity("stein_equation_residual", dev, 0.0, tol);
  rep.with_labels(p.label(), "", l.label);
  rep.details["grid_points_used"] = used;
  return rep;
}

/// |left form - right form| at the median crossover.
inline double dual_form_gap(const SteinSolution& sol) {
  return std::abs(sol.left_form(sol.split_point) - sol.right_form(sol.split_point));
}

}  // namespace steininfo
