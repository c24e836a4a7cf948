#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "steininfo/density.hpp"
#include "steininfo/errors.hpp"
#include "steininfo/quadrature.hpp"
#include "steininfo/report.hpp"
#include "steininfo/solver.hpp"
#include "steininfo/stein.hpp"

namespace steininfo {

struct MetricsOptions {
  QuadratureSpec quad{};
  SolverOptions solver{};
  int grid = 401;
  double bound_tolerance = 1e-6;
};

namespace detail {

inline std::vector<double> merged_cuts(const Density& p, const Density& q, std::span<const double> extra = {}) {
  std::vector<double> cuts(p.landmarks().begin(), p.landmarks().end());
  cuts.insert(cuts.end(), q.landmarks().begin(), q.landmarks().end());
  cuts.insert(cuts.end(), extra.begin(), extra.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

inline std::vector<double> merged_scan(const Density& p, const Density& q, int grid) {
  std::vector<double> xs = p.scan_grid(static_cast<std::size_t>(grid));
  const auto qs = q.scan_grid(static_cast<std::size_t>(grid));
  xs.insert(xs.end(), qs.begin(), qs.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

/// Zeros of g on a sorted node list, refined by bisection.
template <class G>
std::vector<double> sign_changes(G&& g, const std::vector<double>& xs) {
  std::vector<double> roots;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    double lo = xs[i - 1], hi = xs[i];
    double glo = g(lo), ghi = g(hi);
    if (glo == 0.0 || ghi == 0.0 || (glo > 0) == (ghi > 0)) continue;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double gm = g(mid);
      if (gm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((gm > 0) == (glo > 0)) {
        lo = mid;
        glo = gm;
      } else {
        hi = mid;
      }
    }
    roots.push_back(0.5 * (lo + hi));
  }
  return roots;
}

}  // namespace detail

/// J(p, q) = E_q[(p'/p - q'/q)^2] over the interior.
inline Estimate fisher_info_distance(const Density& p, const Density& q, const QuadratureSpec& spec = {}) {
  require_same_support(p, q);
  const auto cuts = detail::merged_cuts(p, q);
  QuadResult r;
  try {
    r = expect(q, [&](double x) {
      if (!p.support().interior(x)) return 0.0;
      const double d = p.score(x) - q.score(x);
      return d * d;
    }, cuts, spec);
  } catch (const NaNIntegrand& e) {
    throw DivergentIntegral("divergent-J: score difference is not finite at x = " + detail::fmt_num(e.abscissa));
  }
  if (!usable(r)) {
    throw DivergentIntegral("divergent-J: E_q[(p'/p - q'/q)^2] does not converge for p = " + p.label() +
                            ", q = " + q.label());
  }
  return {r.value, r.error_estimate};
}

struct KappaEstimate {
  double kappa = 0.0;
  std::string observable;
  std::string target;
  std::string alternative;
  double quad_error = 0.0;
};

/// E_q[f g] for the Stein solution f of (p, l).
template <class G>
Estimate expect_against_solution(const Density& p, const Density& q, const Observable& l, const SteinSolution& sol,
                                 G&& g, const QuadratureSpec& spec) {
  const auto cuts = detail::merged_cuts(p, q, l.breakpoints);
  const QuadResult r = expect(q, [&](double x) {
    const double gx = g(x);
    return gx == 0.0 ? 0.0 : sol.f(x) * gx;
  }, cuts, spec);
  if (!usable(r)) throw NonConvergence("E_q[f g] did not converge for " + l.label + ", q = " + q.label());
  return {r.value, r.error_estimate};
}

/// kappa_l = sqrt(E_q[f_l^2]).
inline KappaEstimate kappa_functional(const Density& p, const Density& q, const Observable& l,
                                      const MetricsOptions& opt = {}) {
  require_same_support(p, q);
  KappaEstimate k{0.0, l.label, p.label(), q.label(), 0.0};
  if (l.constant) return k;
  const SteinSolution sol = solve_stein_equation(p, l, opt.solver);
  const Estimate e = expect_against_solution(p, q, l, sol, [&](double x) { return sol.f(x); }, opt.quad);
  k.kappa = std::sqrt(std::max(0.0, e.value));
  k.quad_error = e.quad_error;
  return k;
}

/// Integral of |p - q|, split at density crossings.
inline Estimate tv_l1_distance(const Density& p, const Density& q, const QuadratureSpec& spec = {}) {
  require_same_support(p, q);
  if (p.same_law(q)) return {0.0, 0.0};
  const auto cuts = detail::merged_cuts(p, q, density_crossings(p, q));
  const QuadResult r = integrate([&](double x) { return std::abs(p.pdf(x) - q.pdf(x)); }, p.support(), spec, cuts);
  if (!usable(r)) throw NonConvergence("L1 distance quadrature did not converge");
  return {r.value, r.error_estimate};
}

/// sup |p - q| with its location.
inline SupResult sup_density_distance(const Density& p, const Density& q, int grid = 401) {
  require_same_support(p, q);
  if (p.same_law(q)) return {p.quantile(0.5), 0.0};
  const auto nodes = detail::merged_scan(p, q, grid);
  return sup_on_nodes([&](double x) { return std::abs(p.pdf(x) - q.pdf(x)); }, nodes);
}

/// sup |P - Q|; extrema sit at density crossings, which are added to the scan.
inline SupResult kolmogorov_distance(const Density& p, const Density& q, int grid = 401) {
  require_same_support(p, q);
  if (p.same_law(q)) return {p.quantile(0.5), 0.0};
  auto nodes = detail::merged_scan(p, q, grid);
  const auto cross = density_crossings(p, q);
  auto gap = [&](double x) {
    const double lower = std::abs(p.cdf(x) - q.cdf(x));
    const double upper = std::abs(p.sf(x) - q.sf(x));
    return p.cdf(x) <= 0.5 ? lower : upper;
  };
  SupResult best = sup_on_nodes(gap, nodes);
  for (double c : cross) {
    const double v = gap(c);
    if (v > best.value) best = {c, v};
  }
  return best;
}

/// Integral of |P - Q| over S, lower tail from cdfs and upper tail from survival functions.
inline Estimate wasserstein1_distance(const Density& p, const Density& q, const QuadratureSpec& spec = {}) {
  require_same_support(p, q);
  if (p.same_law(q)) return {0.0, 0.0};
  const double med = p.quantile(0.5);
  auto diff = [&](double x) { return x <= med ? p.cdf(x) - q.cdf(x) : q.sf(x) - p.sf(x); };
  const auto nodes = detail::merged_scan(p, q, 401);
  const auto zeros = detail::sign_changes(diff, nodes);
  auto cuts = detail::merged_cuts(p, q, zeros);
  cuts.push_back(med);
  const QuadResult r = integrate([&](double x) { return std::abs(diff(x)); }, p.support(), spec, cuts);
  if (!usable(r)) {
    throw NonConvergence("W1 distance does not converge (first absolute moments may be infinite)");
  }
  return {r.value, r.error_estimate};
}

/// E_q[l] - E_p[l] against E_q[f_l^p r(p, q)].
inline BoundReport check_expectation_identity(const Density& p, const Density& q, const Observable& l,
                                              const MetricsOptions& opt = {}) {
  const Residual r = residual(p, q);
  const SteinSolution sol = solve_stein_equation(p, l, opt.solver);
  double eq_l = l.constant_value;
  double err = 0.0;
  if (!l.constant) {
    const QuadResult e = expect(q, l.l, detail::merged_cuts(p, q, l.breakpoints), opt.quad);
    if (!usable(e)) throw NonConvergence("E_q[l] did not converge for " + l.label);
    eq_l = e.value;
    err += e.error_estimate;
  }
  const double lhs = eq_l - sol.centered_mean;
  Estimate rhs{0.0, 0.0};
  if (!l.constant) rhs = expect_against_solution(p, q, l, sol, [&](double x) { return r(x); }, opt.quad);
  BoundReport rep = BoundReport::identity("expectation_identity", lhs, rhs.value, l.discontinuous() ? 1e-4 : 1e-6);
  rep.with_labels(p.label(), q.label(), l.label);
  rep.quad_error = err + rep.quad_error + rhs.quad_error + sol.quad_error;
  rep.details["E_q[l]"] = eq_l;
  rep.details["E_p[l]"] = sol.centered_mean;
  rep.details["f_in_F(q)"] = membership_scan(sol.f, q).bounded ? 1.0 : 0.0;
  return rep;
}

/// |E_q l - E_p l| <= kappa_l sqrt(J).
inline BoundReport check_holder_bound(const Density& p, const Density& q, const Observable& l,
                                      const MetricsOptions& opt = {}) {
  require_same_support(p, q);
  double diff = 0.0, err = 0.0;
  if (!l.constant) {
    const Estimate mp = detail::observable_mean(p, l, opt.solver.mean);
    const QuadResult mq = expect(q, l.l, detail::merged_cuts(p, q, l.breakpoints), opt.quad);
    if (!usable(mq)) throw NonConvergence("E_q[l] did not converge for " + l.label);
    diff = std::abs(mq.value - mp.value);
    err = mq.error_estimate + mp.quad_error;
  }
  const KappaEstimate k = kappa_functional(p, q, l, opt);
  const Estimate j = fisher_info_distance(p, q, opt.quad);
  BoundReport rep = BoundReport::inequality("holder_bound", diff, k.kappa * std::sqrt(j.value), opt.bound_tolerance);
  rep.with_labels(p.label(), q.label(), l.label);
  rep.quad_error = err + k.quad_error + j.quad_error;
  rep.details["kappa"] = k.kappa;
  rep.details["J"] = j.value;
  return rep;
}

/// p(x) sqrt(E_q[(I[x <= X] - P(X))^2 / p(X)^2]), evaluated in log space.
inline Estimate kappa2_at(const Density& p, const Density& q, double x, const QuadratureSpec& spec = {}) {
  const double lpx = p.log_pdf(x);
  if (lpx == -kInf) return {0.0, 0.0};
  auto g = [&](double y) {
    const double lq = q.log_pdf(y);
    if (lq == -kInf) return 0.0;
    const double tail = y >= x ? p.sf(y) : p.cdf(y);
    if (tail == 0.0) return 0.0;
    return std::exp(2.0 * (std::log(tail) - p.log_pdf(y) + lpx) + lq);
  };
  auto cuts = detail::merged_cuts(p, q);
  if (q.support().interior(x)) cuts.push_back(x);
  const QuadResult r = integrate(g, q.support(), spec, cuts);
  if (!usable(r)) throw NonConvergence("kappa_2 integrand did not converge at x = " + detail::fmt_num(x));
  return {std::sqrt(std::max(0.0, r.value)), r.error_estimate};
}

/// sup over x of kappa2_at, scanned on both scan grids (closed endpoints included).
inline SupResult kappa2(const Density& p, const Density& q, int grid = 201, const QuadratureSpec& spec = {}) {
  require_same_support(p, q);
  const auto nodes = detail::merged_scan(p, q, grid);
  return sup_on_nodes([&](double x) { return kappa2_at(p, q, x, spec).value; }, nodes);
}

/// Constants claimed for kappa_1: exponential(1) -> 1, gaussian(0,1) -> sqrt 2, quartic(0,1) -> sqrt(2 sqrt 2).
inline double claimed_kappa1(const Density& target) {
  const auto& pr = target.params();
  if (target.family() == Family::exponential && pr == std::vector<double>{1.0}) return 1.0;
  if (target.family() == Family::gaussian && pr == std::vector<double>{0.0, 1.0}) return std::numbers::sqrt2;
  if (target.family() == Family::quartic && pr == std::vector<double>{0.0, 1.0}) {
    return std::sqrt(2.0 * std::numbers::sqrt2);
  }
  throw InvalidParameter("unsupported target for the corollary constants: " + target.label() +
                         " (expected exponential(1), gaussian(0,1) or quartic(0,1))");
}

inline constexpr double kClaimedKappa2 = 1.0;

/// Four rows per alternative: kappa_1 estimate, L1 <= kappa_1 sqrt(J),
/// kappa_2 estimate, sup|p - q| <= kappa_2 sqrt(J).
inline std::vector<BoundReport> verify_corollary_constants(const Density& target, const std::vector<Density>& family,
                                                           const MetricsOptions& opt = {}) {
  const double k1 = claimed_kappa1(target);
  const double tol = opt.bound_tolerance;
  std::vector<BoundReport> rows;
  for (const Density& q : family) {
    require_same_support(target, q);
    const Observable l = Observable::tv_sign(target, q);
    const KappaEstimate kh = kappa_functional(target, q, l, opt);
    const Estimate j = fisher_info_distance(target, q, opt.quad);
    const Estimate tv = tv_l1_distance(target, q, opt.quad);
    const SupResult k2 = kappa2(target, q, std::max(51, opt.grid / 2), opt.quad);
    const SupResult sup = sup_density_distance(target, q, opt.grid);
    const double root_j = std::sqrt(j.value);

    BoundReport a = BoundReport::inequality("corollary_kappa1", kh.kappa, k1, tol);
    a.with_labels(target.label(), q.label(), "tv_sign");
    a.quad_error = kh.quad_error;
    a.details["kappa1_hat"] = kh.kappa;

    BoundReport b = BoundReport::inequality("corollary_tv_bound", tv.value, k1 * root_j, tol);
    b.with_labels(target.label(), q.label(), "tv_sign");
    b.quad_error = tv.quad_error + j.quad_error;
    b.details["J"] = j.value;
    b.details["kappa1_hat_bound"] = kh.kappa * root_j;

    BoundReport c = BoundReport::inequality("corollary_kappa2", k2.value, kClaimedKappa2, tol);
    c.with_labels(target.label(), q.label(), "dirac");
    c.details["kappa2_hat"] = k2.value;
    c.details["argmax"] = k2.argmax;

    BoundReport d = BoundReport::inequality("corollary_sup_bound", sup.value, k2.value * root_j, tol);
    d.with_labels(target.label(), q.label(), "dirac");
    d.quad_error = j.quad_error;
    d.details["J"] = j.value;
    d.details["argmax"] = sup.argmax;

    rows.push_back(a);
    rows.push_back(b);
    rows.push_back(c);
    rows.push_back(d);
  }
  return rows;
}

}  // namespace steininfo
