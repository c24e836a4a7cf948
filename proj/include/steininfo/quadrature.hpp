#pragma once

// Adaptive Gauss-Kronrod integration over finite, semi-infinite and doubly
// infinite intervals. Infinite ranges are mapped onto bounded ones:
//   [a, inf)   x = a + t/(1-t),   t in [0, 1)
//   (-inf, b]  x = b + t/(1+t),   t in (-1, 0]
//   (-inf,inf) x = t/(1-t^2),     t in (-1, 1)
// The 21-point Kronrod rule is open, so a and b are never sampled.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "steininfo/errors.hpp"
#include "steininfo/support.hpp"

namespace steininfo {

enum class Transform { none, semi_infinite, doubly_infinite, automatic };

struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-9;
  int max_subdivisions = 2000;
  Transform transform = Transform::automatic;

  void validate() const {
    if (!(abs_tol > 0) || !(rel_tol > 0) || max_subdivisions < 1) {
      throw InvalidParameter("quadrature spec requires abs_tol > 0, rel_tol > 0, max_subdivisions >= 1");
    }
  }
  double tolerance(double value) const { return std::max(abs_tol, rel_tol * std::abs(value)); }
};

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int subdivisions_used = 0;
  bool converged = true;
};

/// Converged, or at least within the default tolerances. Tight specs are
/// targets; the defaults are the requirement.
inline bool usable(const QuadResult& r) {
  return std::isfinite(r.value) && (r.converged || r.error_estimate <= QuadratureSpec{}.tolerance(r.value));
}

/// A scalar with the accumulated quadrature error estimate behind it.
struct Estimate {
  double value = 0.0;
  double quad_error = 0.0;
};

struct SupResult {
  double argmax = 0.0;
  double value = 0.0;
};

namespace detail {

// QUADPACK qk21 abscissae and weights.
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Mapping {
  enum class Kind { finite, upper_inf, lower_inf, both_inf };
  Kind kind = Kind::finite;
  double a = 0.0;
  double b = 1.0;

  double t_lo() const {
    switch (kind) {
      case Kind::finite: return a;
      case Kind::upper_inf: return 0.0;
      default: return -1.0;
    }
  }
  double t_hi() const {
    switch (kind) {
      case Kind::finite: return b;
      case Kind::lower_inf: return 0.0;
      default: return 1.0;
    }
  }
  double x(double t) const {
    switch (kind) {
      case Kind::finite: return t;
      case Kind::upper_inf: return a + t / (1.0 - t);
      case Kind::lower_inf: return b + t / (1.0 + t);
      default: return t / (1.0 - t * t);
    }
  }
  double jacobian(double t) const {
    switch (kind) {
      case Kind::finite: return 1.0;
      case Kind::upper_inf: return 1.0 / ((1.0 - t) * (1.0 - t));
      case Kind::lower_inf: return 1.0 / ((1.0 + t) * (1.0 + t));
      default: {
        const double d = 1.0 - t * t;
        return (1.0 + t * t) / (d * d);
      }
    }
  }
  double t_of(double xv) const {
    switch (kind) {
      case Kind::finite: return xv;
      case Kind::upper_inf: {
        if (xv == kInf) return 1.0;
        const double y = xv - a;
        return y / (1.0 + y);
      }
      case Kind::lower_inf: {
        if (xv == -kInf) return -1.0;
        const double y = xv - b;
        return y / (1.0 - y);
      }
      default:
        if (xv == kInf) return 1.0;
        if (xv == -kInf) return -1.0;
        return 2.0 * xv / (1.0 + std::sqrt(1.0 + 4.0 * xv * xv));
    }
  }
};

inline Mapping make_mapping(double a, double b, Transform tr) {
  const bool fa = std::isfinite(a), fb = std::isfinite(b);
  Mapping m;
  m.a = a;
  m.b = b;
  if (fa && fb) {
    m.kind = Mapping::Kind::finite;
  } else if (fa) {
    m.kind = Mapping::Kind::upper_inf;
  } else if (fb) {
    m.kind = Mapping::Kind::lower_inf;
  } else {
    m.kind = Mapping::Kind::both_inf;
  }
  const bool ok = tr == Transform::automatic ||
                  (tr == Transform::none && m.kind == Mapping::Kind::finite) ||
                  (tr == Transform::semi_infinite &&
                   (m.kind == Mapping::Kind::upper_inf || m.kind == Mapping::Kind::lower_inf)) ||
                  (tr == Transform::doubly_infinite && m.kind == Mapping::Kind::both_inf);
  if (!ok) throw InvalidParameter("quadrature transform does not match the interval");
  return m;
}

struct Panel {
  double lo = 0.0;
  double hi = 0.0;
  double value = 0.0;
  double error = 0.0;
};

template <class G>
Panel gauss_kronrod21(G& g, double lo, double hi) {
  constexpr double epmach = std::numeric_limits<double>::epsilon();
  constexpr double uflow = std::numeric_limits<double>::min();
  const double centr = 0.5 * (lo + hi);
  const double hlgth = 0.5 * (hi - lo);
  std::array<double, 10> fv1{}, fv2{};

  const double fc = g(centr);
  double resg = 0.0;
  double resk = kWgk[10] * fc;
  double resabs = std::abs(resk);
  for (int j = 0; j < 5; ++j) {
    const int jtw = 2 * j + 1;
    const double absc = hlgth * kXgk[jtw];
    const double f1 = g(centr - absc), f2 = g(centr + absc);
    fv1[jtw] = f1;
    fv2[jtw] = f2;
    resg += kWg[j] * (f1 + f2);
    resk += kWgk[jtw] * (f1 + f2);
    resabs += kWgk[jtw] * (std::abs(f1) + std::abs(f2));
  }
  for (int j = 0; j < 5; ++j) {
    const int jtwm1 = 2 * j;
    const double absc = hlgth * kXgk[jtwm1];
    const double f1 = g(centr - absc), f2 = g(centr + absc);
    fv1[jtwm1] = f1;
    fv2[jtwm1] = f2;
    resk += kWgk[jtwm1] * (f1 + f2);
    resabs += kWgk[jtwm1] * (std::abs(f1) + std::abs(f2));
  }
  const double reskh = resk * 0.5;
  double resasc = kWgk[10] * std::abs(fc - reskh);
  for (int j = 0; j < 10; ++j) {
    resasc += kWgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
  }
  const double ah = std::abs(hlgth);
  resabs *= ah;
  resasc *= ah;
  double abserr = std::abs((resk - resg) * hlgth);
  if (resasc != 0.0 && abserr != 0.0) {
    abserr = resasc * std::min(1.0, std::pow(200.0 * abserr / resasc, 1.5));
  }
  if (resabs > uflow / (50.0 * epmach)) abserr = std::max(epmach * 50.0 * resabs, abserr);
  if (!std::isfinite(resk)) abserr = kInf;
  return Panel{lo, hi, resk * hlgth, abserr};
}

inline double compensated_sum(std::span<const double> xs) {
  double s = 0.0, c = 0.0;
  for (double v : xs) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

struct Adaptive {
  std::vector<Panel> panels;  // sorted by lo
  QuadResult result;
  bool frozen_lo = false;     // a panel touching t_lo reached rounding resolution
  bool frozen_hi = false;
};

/// The integrand in t-space: f(x(t)) x'(t), zero where x rounds onto an endpoint.
template <class F>
auto t_integrand(F& f, const Mapping& m) {
  return [&f, &m](double t) {
    const double xv = m.x(t);
    if (!(xv > m.a && xv < m.b) || !std::isfinite(xv)) return 0.0;
    const double fx = f(xv);
    if (std::isnan(fx)) throw NaNIntegrand(xv);
    if (fx == 0.0) return 0.0;
    return fx * m.jacobian(t);
  };
}

/// Globally adaptive bisection in t-space, worst-error panel first.
template <class F>
Adaptive adapt(F& f, const Mapping& m, double t_lo, double t_hi, std::span<const double> breaks_x,
               const QuadratureSpec& spec) {
  spec.validate();
  Adaptive out;
  if (!(t_lo < t_hi)) return out;

  auto g = t_integrand(f, m);

  std::vector<double> cuts{t_lo};
  for (double bx : breaks_x) {
    const double t = m.t_of(bx);
    if (t > t_lo && t < t_hi) cuts.push_back(t);
  }
  cuts.push_back(t_hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<Panel>& panels = out.panels;
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item> heap;
  double err_sum = 0.0, val_sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    panels.push_back(gauss_kronrod21(g, cuts[i], cuts[i + 1]));
    heap.emplace(panels.back().error, panels.size() - 1);
    err_sum += panels.back().error;
    val_sum += panels.back().value;
  }

  constexpr double eps = std::numeric_limits<double>::epsilon();
  int splits = 0;
  while (err_sum > spec.tolerance(val_sum) && splits < spec.max_subdivisions && !heap.empty()) {
    const auto [err, idx] = heap.top();
    heap.pop();
    const Panel p = panels[idx];
    const double mid = 0.5 * (p.lo + p.hi);
    const double scale = std::max({std::abs(p.lo), std::abs(p.hi), 1e-300});
    if (p.hi - p.lo <= 8.0 * eps * scale || mid <= p.lo || mid >= p.hi) {  // frozen
      out.frozen_lo = out.frozen_lo || p.lo == t_lo;
      out.frozen_hi = out.frozen_hi || p.hi == t_hi;
      continue;
    }
    const Panel left = gauss_kronrod21(g, p.lo, mid);
    const Panel right = gauss_kronrod21(g, mid, p.hi);
    panels[idx] = left;
    panels.push_back(right);
    heap.emplace(left.error, idx);
    heap.emplace(right.error, panels.size() - 1);
    err_sum += left.error + right.error - p.error;
    val_sum += left.value + right.value - p.value;
    ++splits;
  }

  std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.lo < y.lo; });
  std::vector<double> vals, errs;
  vals.reserve(panels.size());
  errs.reserve(panels.size());
  for (const auto& p : panels) {
    vals.push_back(p.value);
    errs.push_back(p.error);
  }
  out.result.value = compensated_sum(vals);
  out.result.error_estimate = compensated_sum(errs);
  out.result.subdivisions_used = splits;
  out.result.converged =
      std::isfinite(out.result.value) && out.result.error_estimate <= spec.tolerance(out.result.value);
  return out;
}

/// Integrable endpoint singularities can outlast double resolution next to the
/// endpoint. The last stretch of width W is then replaced by the geometric tail
/// of shell integrals over [W,2W], [2W,4W], [4W,8W], which is exact for
/// power-law behaviour (e - t)^alpha.
template <class F>
std::optional<QuadResult> endpoint_extrapolation(F& f, const Mapping& m, std::span<const double> breaks,
                                                 const QuadratureSpec& spec, bool at_lo, bool at_hi) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double lo = m.t_lo(), hi = m.t_hi();
  const double w_lo = at_lo ? 0x1.0p20 * eps * std::max(1.0, std::abs(lo)) : 0.0;
  const double w_hi = at_hi ? 0x1.0p20 * eps * std::max(1.0, std::abs(hi)) : 0.0;
  if (!(lo + 8.0 * w_lo < hi - 8.0 * w_hi)) return std::nullopt;
  auto shell = [&](double from, double to) { return adapt(f, m, std::min(from, to), std::max(from, to), {}, spec).result; };
  QuadResult total = adapt(f, m, lo + w_lo, hi - w_hi, breaks, spec).result;
  auto add_tail = [&](double e, double dir, double w) {
    const QuadResult i1 = shell(e + dir * w, e + dir * 2.0 * w);
    const QuadResult i2 = shell(e + dir * 2.0 * w, e + dir * 4.0 * w);
    const QuadResult i3 = shell(e + dir * 4.0 * w, e + dir * 8.0 * w);
    if (i2.value == 0.0 || i3.value == 0.0) return false;
    const double r1 = i1.value / i2.value, r2 = i2.value / i3.value;
    if (!(r1 > 0.0 && r1 < 1.0 && r2 > 0.0 && r2 < 1.0)) return false;
    const double tail = i1.value * r1 / (1.0 - r1);
    const double alt = i1.value * r2 / (1.0 - r2);
    total.value += tail;
    total.error_estimate += std::abs(tail - alt) + i1.error_estimate;
    return true;
  };
  if (at_lo && !add_tail(lo, 1.0, w_lo)) return std::nullopt;
  if (at_hi && !add_tail(hi, -1.0, w_hi)) return std::nullopt;
  total.converged = std::isfinite(total.value) && total.error_estimate <= spec.tolerance(total.value);
  return total;
}

}  // namespace detail

/// Integrate f over the open interval (a, b); breakpoints seed the initial
/// partition and should mark discontinuities or features of f.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadratureSpec& spec = {},
                     std::span<const double> breakpoints = {}) {
  if (a == b) return {};
  if (a > b) {
    QuadResult r = integrate(f, b, a, spec, breakpoints);
    r.value = -r.value;
    return r;
  }
  const detail::Mapping m = detail::make_mapping(a, b, spec.transform);
  const detail::Adaptive ad = detail::adapt(f, m, m.t_lo(), m.t_hi(), breakpoints, spec);
  if (!ad.result.converged && (ad.frozen_lo || ad.frozen_hi)) {
    if (auto fixed = detail::endpoint_extrapolation(f, m, breakpoints, spec, ad.frozen_lo, ad.frozen_hi)) return *fixed;
  }
  return ad.result;
}

template <class F>
QuadResult integrate(F&& f, const Support& interval, const QuadratureSpec& spec = {},
                     std::span<const double> breakpoints = {}) {
  return integrate(std::forward<F>(f), interval.a, interval.b, spec, breakpoints);
}

/// x -> integral of f from a to x, backed by the panel decomposition of one
/// adaptive pass over the whole interval. Immutable after construction.
class Cumulative {
 public:
  Cumulative(std::function<double(double)> f, const Support& interval, const QuadratureSpec& spec = {},
             std::vector<double> breakpoints = {})
      : f_(std::move(f)), interval_(interval), spec_(spec),
        map_(detail::make_mapping(interval.a, interval.b, spec.transform)) {
    auto ad = detail::adapt(f_, map_, map_.t_lo(), map_.t_hi(), breakpoints, spec_);
    panels_ = std::move(ad.panels);
    result_ = ad.result;
    prefix_.assign(panels_.size() + 1, 0.0);
    suffix_.assign(panels_.size() + 1, 0.0);
    double c = 0.0;
    for (std::size_t i = 0; i < panels_.size(); ++i) {
      const double y = panels_[i].value - c;
      const double t = prefix_[i] + y;
      c = (t - prefix_[i]) - y;
      prefix_[i + 1] = t;
    }
    c = 0.0;
    for (std::size_t i = panels_.size(); i-- > 0;) {
      const double y = panels_[i].value - c;
      const double t = suffix_[i + 1] + y;
      c = (t - suffix_[i + 1]) - y;
      suffix_[i] = t;
    }
  }

  /// Integral over (a, x).
  double operator()(double x) const {
    if (!(x > interval_.a) || panels_.empty()) return 0.0;
    if (x >= interval_.b) return total();
    const double t = map_.t_of(x);
    const std::size_t k = locate(t);
    return prefix_[k] + partial(panels_[k].lo, t);
  }

  /// Integral over (x, b), summed from the right so upper tails keep relative accuracy.
  double complement(double x) const {
    if (!(x < interval_.b) || panels_.empty()) return 0.0;
    if (x <= interval_.a) return total();
    const double t = map_.t_of(x);
    const std::size_t k = locate(t);
    return suffix_[k + 1] + partial(t, panels_[k].hi);
  }

  double total() const { return result_.value; }
  const QuadResult& result() const { return result_; }
  const Support& interval() const { return interval_; }

  /// Panel edges mapped back to x, excluding the outer endpoints.
  std::vector<double> knots() const {
    std::vector<double> xs;
    for (std::size_t i = 1; i < panels_.size(); ++i) xs.push_back(map_.x(panels_[i].lo));
    return xs;
  }
  /// Cumulative values at knots() (prefix sums).
  std::vector<double> knot_values() const {
    return std::vector<double>(prefix_.begin() + 1, prefix_.end() - 1);
  }

 private:
  std::size_t locate(double t) const {
    auto it = std::upper_bound(panels_.begin(), panels_.end(), t,
                               [](double v, const detail::Panel& p) { return v < p.lo; });
    std::size_t k = it == panels_.begin() ? 0 : static_cast<std::size_t>(it - panels_.begin()) - 1;
    return std::min(k, panels_.size() - 1);
  }
  double partial(double lo, double hi) const {
    if (!(lo < hi)) return 0.0;
    QuadratureSpec s = spec_;
    s.transform = Transform::automatic;
    auto ad = detail::adapt(f_, map_, lo, hi, {}, s);
    return ad.result.value;
  }

  std::function<double(double)> f_;
  Support interval_;
  QuadratureSpec spec_;
  detail::Mapping map_;
  std::vector<detail::Panel> panels_;
  std::vector<double> prefix_, suffix_;
  QuadResult result_;
};

inline Cumulative cumulative(std::function<double(double)> f, const Support& interval,
                             const QuadratureSpec& spec = {}, std::vector<double> breakpoints = {}) {
  return Cumulative(std::move(f), interval, spec, std::move(breakpoints));
}

/// Golden-section maximization of f on [lo, hi].
template <class F>
SupResult golden_section_max(F&& f, double lo, double hi, int max_iter = 200) {
  constexpr double r = 0.6180339887498948482;
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < max_iter; ++i) {
    if (hi - lo <= 1e-14 * std::max(1.0, std::abs(lo) + std::abs(hi))) break;
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 >= f2 ? SupResult{x1, f1} : SupResult{x2, f2};
}

/// Scan f on sorted nodes, then refine around the best node by golden section.
template <class F>
SupResult sup_on_nodes(F&& f, std::span<const double> nodes) {
  if (nodes.empty()) throw InvalidParameter("sup_on_nodes needs at least one node");
  auto safe = [&](double x) {
    const double v = f(x);
    return std::isnan(v) ? -kInf : v;
  };
  std::size_t best = 0;
  double best_val = -kInf;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double v = safe(nodes[i]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  SupResult out{nodes[best], best_val};
  if (nodes.size() < 2) return out;
  const double lo = nodes[best == 0 ? 0 : best - 1];
  const double hi = nodes[std::min(best + 1, nodes.size() - 1)];
  const SupResult refined = golden_section_max(safe, lo, hi);
  if (refined.value > out.value) out = refined;
  return out;
}

/// Default scan nodes: uniform in the transformed coordinate, plus closed endpoints.
inline std::vector<double> scan_nodes(const Support& interval, int grid_size) {
  if (grid_size < 3) throw InvalidParameter("grid_size must be >= 3");
  const auto m = detail::make_mapping(interval.a, interval.b, Transform::automatic);
  std::vector<double> xs;
  if (interval.a_closed) xs.push_back(interval.a);
  const double t0 = m.t_lo(), t1 = m.t_hi();
  for (int i = 1; i <= grid_size; ++i) {
    xs.push_back(m.x(t0 + (t1 - t0) * i / (grid_size + 1.0)));
  }
  if (interval.b_closed) xs.push_back(interval.b);
  return xs;
}

template <class F>
SupResult sup_on_interval(F&& f, const Support& interval, int grid_size) {
  const auto nodes = scan_nodes(interval, grid_size);
  return sup_on_nodes(std::forward<F>(f), nodes);
}

}  // namespace steininfo
