#pragma once

// Location-based Stein operator T(f, p) = d(f p)/p in the distributional
// sense: an a.e. interior part f' + f p'/p plus Dirac atoms f(a) at a closed
// left endpoint and -f(b) at a closed right endpoint.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "steininfo/density.hpp"
#include "steininfo/errors.hpp"
#include "steininfo/quadrature.hpp"
#include "steininfo/report.hpp"
#include "steininfo/test_function.hpp"

namespace steininfo {

struct Atom {
  double location = 0.0;
  double coefficient = 0.0;
};

struct SteinValue {
  std::function<double(double)> interior;
  std::vector<Atom> atoms;
  Support support;
  std::vector<std::string> warnings;

  double operator()(double x) const { return support.interior(x) ? interior(x) : 0.0; }
};

/// Interior score difference p'/p - q'/q; the boundary flags say which of
/// the paper's endpoint atoms would be live.
struct Residual {
  std::function<double(double)> interior;
  bool a_atom_live = false;
  bool b_atom_live = false;
  Support support;

  double operator()(double x) const { return support.interior(x) ? interior(x) : 0.0; }
};

struct MembershipScan {
  bool bounded = true;
  double max_abs = 0.0;
};

/// Numerical evidence that x -> f(x) p(x) is bounded: a quantile scan of the
/// bulk plus points marching towards each endpoint.
inline MembershipScan membership_scan(const TestFunction& f, const Density& p) {
  MembershipScan out;
  auto fp = [&](double x) {
    const double w = p.pdf(x);
    return w == 0.0 ? 0.0 : std::abs(f(x) * w);
  };
  double bulk = 0.0;
  for (double x : p.quantile_grid(41, 0.05, 0.95)) bulk = std::max(bulk, fp(x));
  double edge = 0.0;
  const Support& s = p.support();
  std::vector<double> probes;
  for (int k = 1; k <= 12; ++k) {
    const double d = std::pow(10.0, -k);
    if (s.bounded()) {
      probes.push_back(s.a + (s.b - s.a) * d);
      probes.push_back(s.b - (s.b - s.a) * d);
    } else {
      if (s.finite_a()) probes.push_back(s.a + d);
      if (s.finite_b()) probes.push_back(s.b - d);
    }
  }
  for (double r : {10.0, 30.0, 100.0, 1e3, 1e4}) {
    if (!s.finite_b()) probes.push_back(r);
    if (!s.finite_a()) probes.push_back(-r);
  }
  for (double x : p.scan_grid(101)) probes.push_back(x);
  for (double x : probes) {
    if (!s.contains(x)) continue;
    const double v = fp(x);
    if (!std::isfinite(v)) {
      out.bounded = false;
      edge = kInf;
      break;
    }
    edge = std::max(edge, v);
  }
  out.max_abs = std::max(bulk, edge);
  if (edge > 1e6 * (1.0 + bulk)) out.bounded = false;
  return out;
}

/// Generic operator: interior f' + f * score, atoms at closed endpoints.
inline SteinValue stein_operator(const TestFunction& f, const Density& p, bool scan_membership = true) {
  SteinValue v;
  v.support = p.support();
  v.interior = [f, p](double x) {
    if (!p.support().interior(x)) return 0.0;
    const double fx = f(x);
    const double d = f.derivative(x);
    return fx == 0.0 ? d : d + fx * p.score(x);
  };
  if (v.support.a_closed) v.atoms.push_back({v.support.a, f(v.support.a)});
  if (v.support.b_closed) v.atoms.push_back({v.support.b, -f(v.support.b)});
  if (scan_membership && !membership_scan(f, p).bounded) {
    v.warnings.push_back("f*p appears unbounded for f = " + f.label + ", p = " + p.label());
  }
  return v;
}

enum class OperatorFamily { gaussian, exponential, uniform, semicircle, arcsine, pearson };

inline OperatorFamily parse_operator_family(const std::string& name) {
  if (name == "gaussian") return OperatorFamily::gaussian;
  if (name == "exponential") return OperatorFamily::exponential;
  if (name == "uniform") return OperatorFamily::uniform;
  if (name == "semicircle") return OperatorFamily::semicircle;
  if (name == "arcsine") return OperatorFamily::arcsine;
  if (name == "pearson") return OperatorFamily::pearson;
  throw UnknownFamily(name);
}

/// Hand-coded operators for the standard targets. For semicircle, arcsine and
/// Pearson the argument is f0, with effective test function f = f0 * s.
inline SteinValue stein_operator_closed_form(OperatorFamily family, const TestFunction& g,
                                             const std::optional<PearsonSpec>& pearson = std::nullopt) {
  SteinValue v;
  switch (family) {
    case OperatorFamily::gaussian:
      v.support = Support::real_line();
      v.interior = [g](double x) { return g.derivative(x) - x * g(x); };
      break;
    case OperatorFamily::exponential:
      v.support = Support::make(0.0, kInf, true, false);
      v.interior = [g](double x) { return x > 0.0 ? g.derivative(x) - g(x) : 0.0; };
      v.atoms = {{0.0, g(0.0)}};
      break;
    case OperatorFamily::uniform:
      v.support = Support::make(0.0, 1.0, true, true);
      v.interior = [g](double x) { return x > 0.0 && x < 1.0 ? g.derivative(x) : 0.0; };
      v.atoms = {{0.0, g(0.0)}, {1.0, -g(1.0)}};
      break;
    case OperatorFamily::semicircle:
      v.support = Support::make(-2.0, 2.0);
      v.interior = [g](double x) {
        return x > -2.0 && x < 2.0 ? (4.0 - x * x) * g.derivative(x) - 3.0 * x * g(x) : 0.0;
      };
      break;
    case OperatorFamily::arcsine:
      v.support = Support::make(0.0, 1.0);
      v.interior = [g](double x) { return x > 0.0 && x < 1.0 ? std::sqrt(x * (1.0 - x)) * g.derivative(x) : 0.0; };
      break;
    case OperatorFamily::pearson: {
      if (!pearson) throw InvalidParameter("pearson closed form needs a PearsonSpec");
      const PearsonSpec ps = *pearson;
      v.support = ps.support;
      v.interior = [g, ps](double x) {
        return ps.support.interior(x) ? ps.s(x) * g.derivative(x) + ps.tau(x) * g(x) : 0.0;
      };
      break;
    }
  }
  return v;
}

inline SteinValue stein_operator_closed_form(const std::string& family, const TestFunction& g,
                                             const std::optional<PearsonSpec>& pearson = std::nullopt) {
  return stein_operator_closed_form(parse_operator_family(family), g, pearson);
}

inline Residual residual(const Density& p, const Density& q) {
  require_same_support(p, q);
  Residual r;
  r.support = p.support();
  r.a_atom_live = r.support.a_closed;
  r.b_atom_live = r.support.b_closed;
  r.interior = [p, q](double x) { return p.support().interior(x) ? p.score(x) - q.score(x) : 0.0; };
  return r;
}

/// E_w[T(f,p)(X)]: interior integral against w plus atom coefficients times w at the atom.
inline Estimate expect_stein(const SteinValue& v, const Density& w, const QuadratureSpec& spec = {}) {
  const Support& sw = w.support();
  if (sw.a < v.support.a || sw.b > v.support.b) {
    throw SupportMismatch(w.label() + " is not supported inside " + v.support.str());
  }
  const QuadResult r = expect(w, v.interior, {}, spec);
  if (!usable(r)) throw NonConvergence("E_w[T(f,p)] quadrature did not converge for w = " + w.label());
  double total = r.value;
  for (const Atom& a : v.atoms) total += a.coefficient * w.pdf(a.location);
  return {total, r.error_estimate};
}

/// Whether s*p tends to zero at both finite endpoints (checked a few ulps in).
inline bool factor_vanishes(const Density& p, const TestFunction& s) {
  const Support& sp = p.support();
  for (double d : {1e-8, 1e-10}) {
    for (double x : {sp.a + d * std::max(1.0, std::abs(sp.a)), sp.b - d * std::max(1.0, std::abs(sp.b))}) {
      if (sp.interior(x) && std::abs(s(x) * p.pdf(x)) > 1e-3) return false;
    }
  }
  return true;
}

/// Test functions f with f*p bounded: {1, x, x^2, sin x, exp(-x^2)}, each
/// multiplied by the vanishing factor s when p has one. When s*p itself does
/// not vanish at the ends (arcsine: s p = 1/pi) f0 also carries (x-a)(b-x),
/// otherwise E_p[T(f,p)] picks up the boundary term f p |_a^b.
inline std::vector<TestFunction> default_dictionary(const Density& p) {
  std::vector<TestFunction> base = {tf::monomial(0), tf::monomial(1), tf::monomial(2), tf::sine(), tf::gaussian_bump()};
  if (!p.vanishing_factor()) return base;
  const TestFunction& s = *p.vanishing_factor();
  std::optional<TestFunction> taper;
  if (!factor_vanishes(p, s) && p.support().bounded()) {
    const double a = p.support().a, b = p.support().b;
    taper = make_test_function([a, b](double x) { return (x - a) * (b - x); },
                               [a, b](double x) { return a + b - 2.0 * x; }, "(x-a)(b-x)");
  }
  std::vector<TestFunction> out;
  for (const auto& b : base) {
    const TestFunction f0 = taper ? product(b, *taper) : b;
    TestFunction f = product(f0, s);
    f.label = b.label + (taper ? "*" + taper->label : "") + "*" + s.label;
    out.push_back(std::move(f));
  }
  return out;
}

/// Pointwise check of T(f,p) = T(f,q) + f r(p,q) on the interior.
inline BoundReport check_factorization(const Density& p, const Density& q, const TestFunction& f, int grid_size = 101) {
  const Residual r = residual(p, q);
  const SteinValue tp = stein_operator(f, p, false);
  const SteinValue tq = stein_operator(f, q, false);
  double dev = 0.0;
  for (double x : p.quantile_grid(static_cast<std::size_t>(grid_size))) {
    if (!p.support().interior(x)) continue;
    dev = std::max(dev, std::abs(tp(x) - tq(x) - f(x) * r(x)));
  }
  const bool analytic = p.analytic_score() && q.analytic_score() && f.analytic;
  BoundReport rep = BoundReport::identity("factorization", dev, 0.0, analytic ? 1e-6 : 1e-4);
  rep.with_labels(p.label(), q.label(), f.label);
  const bool member = membership_scan(f, p).bounded && membership_scan(f, q).bounded;
  rep.details["f_in_F(p)F(q)"] = member ? 1.0 : 0.0;
  return rep;
}

/// E_w[T(f,p)] for each dictionary element. When w is p every value must
/// vanish; otherwise an aggregate row records whether some element separates them.
inline std::vector<BoundReport> check_characterization(const Density& p, const std::vector<TestFunction>& fs,
                                                       const Density& w, const QuadratureSpec& spec = {},
                                                       double tolerance = 1e-7) {
  std::vector<BoundReport> rows;
  const bool same = p.same_law(w);
  double strongest = 0.0;
  for (const auto& f : fs) {
    const SteinValue v = stein_operator(f, p);
    const Estimate e = expect_stein(v, w, spec);
    BoundReport row;
    if (same) {
      row = BoundReport::identity("characterization_zero_mean", e.value, 0.0, tolerance);
    } else {
      row = BoundReport::identity("characterization_value", e.value, 0.0, kInf);
      row.details["informational"] = 1.0;
    }
    row.with_labels(p.label(), w.label(), f.label);
    row.quad_error = e.quad_error;
    if (!v.warnings.empty()) row.details["membership_warning"] = 1.0;
    strongest = std::max(strongest, std::abs(e.value));
    rows.push_back(row);
  }
  if (!same) {
    BoundReport agg = BoundReport::inequality("characterization_evidence", 10.0 * tolerance, strongest, 0.0);
    agg.with_labels(p.label(), w.label(), "dictionary");
    agg.details["max_abs_expectation"] = strongest;
    rows.push_back(agg);
  }
  return rows;
}

}  // namespace steininfo
