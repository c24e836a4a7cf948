#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "steininfo/errors.hpp"
#include "steininfo/quadrature.hpp"
#include "steininfo/support.hpp"
#include "steininfo/test_function.hpp"

namespace steininfo {

enum class Family { gaussian, exponential, uniform, semicircle, arcsine, quartic, pearson, unnormalized, kde };

inline std::string family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::exponential: return "exponential";
    case Family::uniform: return "uniform";
    case Family::semicircle: return "semicircle";
    case Family::arcsine: return "arcsine";
    case Family::quartic: return "quartic";
    case Family::pearson: return "pearson";
    case Family::unnormalized: return "unnormalized";
    case Family::kde: return "kde";
  }
  return "unknown";
}

inline Family parse_builtin_family(const std::string& name) {
  if (name == "gaussian" || name == "normal" || name == "gauss") return Family::gaussian;
  if (name == "exponential" || name == "exp") return Family::exponential;
  if (name == "uniform" || name == "unif") return Family::uniform;
  if (name == "semicircle") return Family::semicircle;
  if (name == "arcsine") return Family::arcsine;
  if (name == "quartic") return Family::quartic;
  throw UnknownFamily(name);
}

/// Coefficients in ascending order: c[0] + c[1] x + c[2] x^2 + ...
struct Polynomial {
  std::vector<double> c;

  double operator()(double x) const {
    double acc = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
    return acc;
  }
  Polynomial derivative() const {
    Polynomial d;
    for (std::size_t i = 1; i < c.size(); ++i) d.c.push_back(static_cast<double>(i) * c[i]);
    return d;
  }
  int degree() const {
    for (std::size_t i = c.size(); i-- > 0;)
      if (c[i] != 0.0) return static_cast<int>(i);
    return -1;
  }
  double coeff(std::size_t i) const { return i < c.size() ? c[i] : 0.0; }
};

/// Pearson family member: (s p)' = tau p on the support.
struct PearsonSpec {
  Polynomial s;
  Polynomial tau;
  Support support;

  void validate() const {
    if (tau.degree() != 1) throw InvalidParameter("pearson: tau must have exact degree 1");
    if (s.degree() > 2 || s.degree() < 0) throw InvalidParameter("pearson: s must be a nonzero polynomial of degree <= 2");
    for (double x : scan_nodes(support, 257)) {
      if (support.interior(x) && !(s(x) > 0.0)) throw InvalidParameter("pearson: s must be positive on the interior of the support");
    }
  }
};

namespace detail {

struct CdfTable {
  std::vector<double> x, lower, upper, dens;  // F, 1 - F, and pdf at nodes (all / mass)
  std::vector<double> dl, du;                 // monotone-limited slopes for F and 1 - F
  double mass = 1.0;
};

struct DensityModel {
  Support support;
  std::function<double(double)> log_unnorm;  // log of the unnormalized density on S
  double log_z = 0.0;
  std::function<double(double)> score;
  std::function<double(double)> cdf_closed, sf_closed, quantile_closed;
  std::string label;
  Family family = Family::unnormalized;
  std::vector<double> params;
  bool analytic_score = true;
  std::optional<TestFunction> factor;
  std::optional<PearsonSpec> pearson;

  mutable std::once_flag table_once;
  mutable std::unique_ptr<CdfTable> table;
  mutable std::once_flag landmark_once;
  mutable std::vector<double> landmarks;

  double log_pdf(double x) const { return support.contains(x) ? log_unnorm(x) - log_z : -kInf; }
  double pdf(double x) const { return support.contains(x) ? std::exp(log_unnorm(x) - log_z) : 0.0; }
};

inline QuadratureSpec tight_spec() { return QuadratureSpec{1e-15, 1e-13, 4000, Transform::automatic}; }

/// Fritsch-Carlson limiting of Hermite slopes so the interpolant stays monotone.
inline std::vector<double> limit_slopes(const std::vector<double>& x, const std::vector<double>& y,
                                        std::vector<double> m) {
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double delta = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
    if (delta == 0.0) {
      m[k] = m[k + 1] = 0.0;
      continue;
    }
    if (m[k] / delta < 0) m[k] = 0.0;
    if (m[k + 1] / delta < 0) m[k + 1] = 0.0;
    const double al = m[k] / delta, be = m[k + 1] / delta;
    const double r = al * al + be * be;
    if (r > 9.0) {
      const double tau = 3.0 / std::sqrt(r);
      m[k] = tau * al * delta;
      m[k + 1] = tau * be * delta;
    }
  }
  return m;
}

inline double hermite(double x0, double x1, double y0, double y1, double m0, double m1, double x) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
}

inline double safeguarded_inverse(const std::function<double(double)>& cdf, const std::function<double(double)>& sf,
                                  const std::function<double(double)>& pdf, const Support& s, double u) {
  if (u <= 0.0) return s.a;
  if (u >= 1.0) return s.b;
  const bool upper = u > 0.5;
  const double uc = 1.0 - u;
  // g is increasing in x with root at the quantile
  auto g = [&](double x) { return upper ? uc - sf(x) : cdf(x) - u; };
  double start = s.finite_a() ? (s.finite_b() ? 0.5 * (s.a + s.b) : s.a + 1.0) : (s.finite_b() ? s.b - 1.0 : 0.0);
  double lo = s.a, hi = s.b;
  if (!s.finite_a()) {
    double step = 1.0;
    lo = start - step;
    while (g(lo) > 0.0) {
      step *= 2.0;
      lo = start - step;
      if (step > 1e300) break;
    }
  }
  if (!s.finite_b()) {
    double step = 1.0;
    hi = start + step;
    while (g(hi) < 0.0) {
      step *= 2.0;
      hi = start + step;
      if (step > 1e300) break;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    const double gv = g(x);
    if (gv == 0.0) return x;
    if (gv > 0.0) hi = x; else lo = x;
    const double d = pdf(x);
    double next = d > 0.0 ? x - gv / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-15 * std::max(1.0, std::abs(x))) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace detail

/// Univariate density with interval support. Immutable; copies share state.
class Density {
 public:
  Density() = default;
  explicit Density(std::shared_ptr<const detail::DensityModel> m) : m_(std::move(m)) {}

  const Support& support() const { return m_->support; }
  const std::string& label() const { return m_->label; }
  Family family() const { return m_->family; }
  const std::vector<double>& params() const { return m_->params; }
  double log_partition() const { return m_->log_z; }
  bool analytic_score() const { return m_->analytic_score; }
  const std::optional<TestFunction>& vanishing_factor() const { return m_->factor; }
  const std::optional<PearsonSpec>& pearson_spec() const { return m_->pearson; }

  double pdf(double x) const { return m_->pdf(x); }
  double log_pdf(double x) const { return m_->log_pdf(x); }
  /// p'(x)/p(x) on S, zero elsewhere.
  double score(double x) const { return m_->support.contains(x) ? m_->score(x) : 0.0; }

  double cdf(double x) const {
    const Support& s = m_->support;
    if (!(x > s.a)) return 0.0;
    if (!(x < s.b)) return 1.0;
    if (m_->cdf_closed) return std::clamp(m_->cdf_closed(x), 0.0, 1.0);
    return table_value(x, false);
  }
  /// 1 - cdf, accurate in the upper tail.
  double sf(double x) const {
    const Support& s = m_->support;
    if (!(x > s.a)) return 1.0;
    if (!(x < s.b)) return 0.0;
    if (m_->sf_closed) return std::clamp(m_->sf_closed(x), 0.0, 1.0);
    if (m_->cdf_closed) return std::clamp(1.0 - m_->cdf_closed(x), 0.0, 1.0);
    return table_value(x, true);
  }
  double quantile(double u) const {
    if (m_->quantile_closed && u > 0.0 && u < 1.0) return m_->quantile_closed(u);
    return detail::safeguarded_inverse([this](double x) { return cdf(x); }, [this](double x) { return sf(x); },
                                       [this](double x) { return pdf(x); }, m_->support, u);
  }

  /// n interior points at equally spaced probability levels in [lo, hi].
  std::vector<double> quantile_grid(std::size_t n, double lo = 0.01, double hi = 0.99) const {
    std::vector<double> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
      xs.push_back(quantile(u));
    }
    return dedupe(std::move(xs));
  }

  /// Scan grid reaching into the tails: levels evenly spaced in logit(u).
  std::vector<double> scan_grid(std::size_t n, double tail = 1e-9) const {
    std::vector<double> xs;
    if (m_->support.a_closed) xs.push_back(m_->support.a);
    const double l0 = std::log(tail / (1 - tail)), l1 = -l0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(n - 1);
      const double x = quantile(1.0 / (1.0 + std::exp(-t)));
      if (m_->support.interior(x)) xs.push_back(x);
    }
    if (m_->support.b_closed) xs.push_back(m_->support.b);
    return dedupe(std::move(xs));
  }

  /// Quantiles used to seed quadrature partitions.
  const std::vector<double>& landmarks() const {
    std::call_once(m_->landmark_once, [this] {
      std::vector<double> xs;
      for (double u : {1e-6, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1 - 1e-6}) {
        const double x = quantile(u);
        if (m_->support.interior(x)) xs.push_back(x);
      }
      m_->landmarks = dedupe(std::move(xs));
    });
    return m_->landmarks;
  }

  bool same_law(const Density& o) const {
    if (m_ == o.m_) return true;
    if (family() != o.family() || family() == Family::unnormalized || family() == Family::kde) return false;
    return params() == o.params() && support() == o.support();
  }

  const detail::DensityModel* model() const { return m_.get(); }

 private:
  static std::vector<double> dedupe(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
  }

  const detail::CdfTable& table() const {
    std::call_once(m_->table_once, [this] { m_->table = build_table(); });
    return *m_->table;
  }

  std::unique_ptr<detail::CdfTable> build_table() const {
    constexpr std::size_t kNodes = 2049;
    constexpr double kTail = 1e-12;
    auto pdf_fn = [m = m_.get()](double x) { return m->pdf(x); };
    Cumulative cum(pdf_fn, m_->support, detail::tight_spec(), landmark_seed());
    auto out = std::make_unique<detail::CdfTable>();
    out->mass = cum.total();
    const double mass = out->mass;
    auto cdf_q = [&](double x) { return cum(x) / mass; };
    auto sf_q = [&](double x) { return cum.complement(x) / mass; };
    auto pdf_q = [&](double x) { return pdf_fn(x) / mass; };
    const double l0 = std::log(kTail / (1 - kTail)), l1 = -l0;
    std::vector<double> xs;
    xs.reserve(kNodes);
    for (std::size_t i = 0; i < kNodes; ++i) {
      const double t = l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(kNodes - 1);
      const double x = detail::safeguarded_inverse(cdf_q, sf_q, pdf_q, m_->support, 1.0 / (1.0 + std::exp(-t)));
      if (m_->support.interior(x)) xs.push_back(x);
    }
    xs = dedupe(std::move(xs));
    for (double x : xs) {
      out->x.push_back(x);
      out->lower.push_back(cdf_q(x));
      out->upper.push_back(sf_q(x));
      out->dens.push_back(pdf_q(x));
    }
    std::vector<double> neg(out->dens.size());
    std::transform(out->dens.begin(), out->dens.end(), neg.begin(), [](double d) { return -d; });
    out->dl = detail::limit_slopes(out->x, out->lower, out->dens);
    out->du = detail::limit_slopes(out->x, out->upper, neg);
    return out;
  }

  std::vector<double> landmark_seed() const {
    // Rough centre of mass location for the initial partition.
    const Support& s = m_->support;
    if (s.bounded()) return {};
    std::vector<double> nodes = scan_nodes(s, 201);
    double best = -kInf, arg = 0.0;
    for (double x : nodes) {
      const double v = m_->log_pdf(x);
      if (v > best) {
        best = v;
        arg = x;
      }
    }
    return {arg};
  }

  double table_value(double x, bool upper) const {
    const auto& t = table();
    if (t.x.empty()) return upper ? 1.0 - 0.5 : 0.5;
    auto direct_lower = [&](double v) {
      return integrate([this](double y) { return pdf(y); }, m_->support.a, v, detail::tight_spec()).value / t.mass;
    };
    auto direct_upper = [&](double v) {
      return integrate([this](double y) { return pdf(y); }, v, m_->support.b, detail::tight_spec()).value / t.mass;
    };
    if (x <= t.x.front()) {
      const double lo = std::clamp(direct_lower(x), 0.0, 1.0);
      return upper ? 1.0 - lo : lo;
    }
    if (x >= t.x.back()) {
      const double up = std::clamp(direct_upper(x), 0.0, 1.0);
      return upper ? up : 1.0 - up;
    }
    const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - t.x.begin()) - 1;
    const double lo = detail::hermite(t.x[k], t.x[k + 1], t.lower[k], t.lower[k + 1], t.dl[k], t.dl[k + 1], x);
    const double up = detail::hermite(t.x[k], t.x[k + 1], t.upper[k], t.upper[k + 1], t.du[k], t.du[k + 1], x);
    if (upper) return std::clamp(up <= 0.5 ? up : 1.0 - lo, 0.0, 1.0);
    return std::clamp(lo <= 0.5 ? lo : 1.0 - up, 0.0, 1.0);
  }

  std::shared_ptr<const detail::DensityModel> m_;
};

namespace detail {

/// One-sided second-order difference near the boundary, central otherwise.
inline double numeric_log_derivative(const std::function<double(double)>& logf, const Support& s, double x) {
  double h = std::max(1.0, std::abs(x)) * std::cbrt(std::numeric_limits<double>::epsilon());
  const double room_lo = x - s.a, room_hi = s.b - x;
  if (room_lo > h && room_hi > h) {
    const double xp = x + h, xm = x - h;
    return (logf(xp) - logf(xm)) / (xp - xm);
  }
  if (room_hi > room_lo) {
    h = std::min(h, room_hi / 4.0);
    return (-3.0 * logf(x) + 4.0 * logf(x + h) - logf(x + 2.0 * h)) / (2.0 * h);
  }
  h = std::min(h, room_lo / 4.0);
  return (3.0 * logf(x) - 4.0 * logf(x - h) + logf(x - 2.0 * h)) / (2.0 * h);
}

/// Fill log_z by quadrature of exp(log_unnorm - offset).
inline void normalize(DensityModel& m) {
  double offset = -kInf;
  for (double x : scan_nodes(m.support, 401)) {
    if (!m.support.contains(x)) continue;
    const double v = m.log_unnorm(x);
    if (std::isfinite(v)) offset = std::max(offset, v);
  }
  if (!std::isfinite(offset)) throw NonIntegrable("density is zero or non-finite on the scan grid: " + m.label);
  const auto r = integrate(
      [&m, offset](double x) {
        const double v = m.log_unnorm(x);
        return v == -kInf ? 0.0 : std::exp(v - offset);
      },
      m.support, tight_spec());
  if (!usable(r) || !(r.value > 0.0)) {
    throw NonIntegrable("normalization quadrature did not converge for " + m.label);
  }
  m.log_z = offset + std::log(r.value);
}

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline void require_params(const std::vector<double>& params, std::size_t max_n, const std::string& fam) {
  if (params.size() > max_n) throw InvalidParameter(fam + ": too many parameters");
  for (double v : params)
    if (!std::isfinite(v)) throw InvalidParameter(fam + ": parameters must be finite");
}

}  // namespace detail

/// Built-in targets. Parameters (all optional):
///   gaussian [mu, sigma], exponential [rate], uniform [a, b], semicircle [radius],
///   arcsine [a, b], quartic [mu, scale] for exp(-((x-mu)/scale)^4/12).
inline Density builtin_density(Family family, const std::vector<double>& params = {}) {
  using detail::fmt_num;
  auto m = std::make_shared<detail::DensityModel>();
  m->family = family;
  switch (family) {
    case Family::gaussian: {
      detail::require_params(params, 2, "gaussian");
      const double mu = params.size() > 0 ? params[0] : 0.0;
      const double sigma = params.size() > 1 ? params[1] : 1.0;
      if (!(sigma > 0)) throw InvalidParameter("gaussian: sigma must be positive");
      const double lognorm = std::log(sigma) + 0.5 * std::log(2.0 * std::numbers::pi);
      m->support = Support::real_line();
      m->log_unnorm = [=](double x) {
        const double z = (x - mu) / sigma;
        return -0.5 * z * z - lognorm;
      };
      m->score = [=](double x) { return -(x - mu) / (sigma * sigma); };
      m->cdf_closed = [=](double x) { return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2)); };
      m->sf_closed = [=](double x) { return 0.5 * std::erfc((x - mu) / (sigma * std::numbers::sqrt2)); };
      m->params = {mu, sigma};
      m->label = "gaussian(" + fmt_num(mu) + "," + fmt_num(sigma) + ")";
      break;
    }
    case Family::exponential: {
      detail::require_params(params, 1, "exponential");
      const double rate = params.empty() ? 1.0 : params[0];
      if (!(rate > 0)) throw InvalidParameter("exponential: rate must be positive");
      m->support = Support::make(0.0, kInf, true, false);
      m->log_unnorm = [=](double x) { return std::log(rate) - rate * x; };
      m->score = [=](double) { return -rate; };
      m->cdf_closed = [=](double x) { return -std::expm1(-rate * x); };
      m->sf_closed = [=](double x) { return std::exp(-rate * x); };
      m->quantile_closed = [=](double u) { return -std::log1p(-u) / rate; };
      m->params = {rate};
      m->label = "exponential(" + fmt_num(rate) + ")";
      break;
    }
    case Family::uniform: {
      detail::require_params(params, 2, "uniform");
      if (params.size() == 1) throw InvalidParameter("uniform: expected [] or [a, b]");
      const double a = params.empty() ? 0.0 : params[0];
      const double b = params.empty() ? 1.0 : params[1];
      m->support = Support::make(a, b, true, true);
      m->log_unnorm = [=](double) { return -std::log(b - a); };
      m->score = [](double) { return 0.0; };
      m->cdf_closed = [=](double x) { return (x - a) / (b - a); };
      m->sf_closed = [=](double x) { return (b - x) / (b - a); };
      m->quantile_closed = [=](double u) { return a + u * (b - a); };
      m->params = {a, b};
      m->label = "uniform(" + fmt_num(a) + "," + fmt_num(b) + ")";
      break;
    }
    case Family::semicircle: {
      detail::require_params(params, 1, "semicircle");
      const double r = params.empty() ? 2.0 : params[0];
      if (!(r > 0)) throw InvalidParameter("semicircle: radius must be positive");
      const double logc = std::log(2.0 / (std::numbers::pi * r * r));
      m->support = Support::make(-r, r);
      m->log_unnorm = [=](double x) { return logc + 0.5 * std::log((r - x) * (r + x)); };
      m->score = [=](double x) { return -x / ((r - x) * (r + x)); };
      auto cdf = [=](double x) {
        return 0.5 + x * std::sqrt((r - x) * (r + x)) / (std::numbers::pi * r * r) + std::asin(x / r) / std::numbers::pi;
      };
      m->cdf_closed = cdf;
      m->sf_closed = [=](double x) { return cdf(-x); };
      m->factor = make_test_function([=](double x) { return (r - x) * (r + x); }, [](double x) { return -2.0 * x; },
                                     "(" + fmt_num(r * r) + "-x^2)");
      m->params = {r};
      m->label = "semicircle(" + fmt_num(r) + ")";
      break;
    }
    case Family::arcsine: {
      detail::require_params(params, 2, "arcsine");
      if (params.size() == 1) throw InvalidParameter("arcsine: expected [] or [a, b]");
      const double a = params.empty() ? 0.0 : params[0];
      const double b = params.empty() ? 1.0 : params[1];
      m->support = Support::make(a, b);
      m->log_unnorm = [=](double x) { return -std::log(std::numbers::pi) - 0.5 * std::log((x - a) * (b - x)); };
      m->score = [=](double x) { return -0.5 / (x - a) + 0.5 / (b - x); };
      m->cdf_closed = [=](double x) { return 2.0 / std::numbers::pi * std::asin(std::sqrt((x - a) / (b - a))); };
      m->sf_closed = [=](double x) { return 2.0 / std::numbers::pi * std::asin(std::sqrt((b - x) / (b - a))); };
      m->quantile_closed = [=](double u) {
        const double s = std::sin(0.5 * std::numbers::pi * u);
        return a + (b - a) * s * s;
      };
      m->factor = make_test_function([=](double x) { return std::sqrt((x - a) * (b - x)); },
                                     [=](double x) { return (a + b - 2.0 * x) / (2.0 * std::sqrt((x - a) * (b - x))); },
                                     "sqrt(x(1-x))");
      m->params = {a, b};
      m->label = "arcsine(" + fmt_num(a) + "," + fmt_num(b) + ")";
      break;
    }
    case Family::quartic: {
      detail::require_params(params, 2, "quartic");
      const double mu = params.size() > 0 ? params[0] : 0.0;
      const double scale = params.size() > 1 ? params[1] : 1.0;
      if (!(scale > 0)) throw InvalidParameter("quartic: scale must be positive");
      m->support = Support::real_line();
      m->log_unnorm = [=](double x) {
        const double z = (x - mu) / scale;
        const double z2 = z * z;
        return -z2 * z2 / 12.0;
      };
      m->score = [=](double x) {
        const double z = (x - mu) / scale;
        return -z * z * z / (3.0 * scale);
      };
      m->params = {mu, scale};
      m->label = "quartic(" + fmt_num(mu) + "," + fmt_num(scale) + ")";
      m->log_z = 0.0;
      detail::normalize(*m);
      break;
    }
    default:
      throw UnknownFamily(family_name(family));
  }
  return Density(std::move(m));
}

inline Density builtin_density(const std::string& name, const std::vector<double>& params = {}) {
  return builtin_density(parse_builtin_family(name), params);
}

/// Density from a log of an unnormalized density; the score falls back to a
/// numeric log-derivative when none is supplied.
inline Density density_from_log_unnormalized(std::function<double(double)> log_f, const Support& support,
                                             std::function<double(double)> score_hint, std::string label,
                                             Family family = Family::unnormalized) {
  auto m = std::make_shared<detail::DensityModel>();
  m->support = support;
  m->log_unnorm = std::move(log_f);
  m->label = std::move(label);
  m->family = family;
  if (score_hint) {
    m->score = std::move(score_hint);
    m->analytic_score = true;
  } else {
    m->score = [lf = m->log_unnorm, support](double x) { return detail::numeric_log_derivative(lf, support, x); };
    m->analytic_score = false;
  }
  detail::normalize(*m);
  return Density(std::move(m));
}

inline Density density_from_unnormalized(std::function<double(double)> f, const Support& support,
                                         std::function<double(double)> score_hint = {},
                                         std::string label = "unnormalized") {
  auto log_f = [f = std::move(f)](double x) {
    const double v = f(x);
    if (std::isnan(v) || v < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::log(v);
  };
  return density_from_log_unnormalized(std::move(log_f), support, std::move(score_hint), std::move(label));
}

namespace detail {

/// Closed-form antiderivative of (tau - s')/s, i.e. log of the unnormalized Pearson density.
inline std::function<double(double)> pearson_log_density(const PearsonSpec& ps) {
  const double s0 = ps.s.coeff(0), s1 = ps.s.coeff(1), s2 = ps.s.coeff(2);
  const double t0 = ps.tau.coeff(0), t1 = ps.tau.coeff(1);
  const Polynomial s = ps.s;
  switch (ps.s.degree()) {
    case 0:
      return [=](double x) { return (0.5 * t1 * x * x + t0 * x) / s0; };
    case 1: {
      const double k = (t0 - t1 * s0 / s1) / s1;
      return [=](double x) { return t1 * x / s1 + (k - 1.0) * std::log(std::abs(s1 * x + s0)); };
    }
    default: {
      const double lead = t1 / (2.0 * s2);
      const double c = t0 - t1 * s1 / (2.0 * s2);
      const double disc = s1 * s1 - 4.0 * s2 * s0;
      std::function<double(double)> inv_s;  // antiderivative of 1/s
      if (disc < 0) {
        const double q = std::sqrt(-disc);
        inv_s = [=](double x) { return 2.0 / q * std::atan((2.0 * s2 * x + s1) / q); };
      } else if (disc > 0) {
        const double q = std::sqrt(disc);
        const double r1 = (-s1 - q) / (2.0 * s2), r2 = (-s1 + q) / (2.0 * s2);
        inv_s = [=](double x) { return std::log(std::abs((x - r2) / (x - r1))) / (s2 * (r2 - r1)); };
      } else {
        inv_s = [=](double x) { return -2.0 / (2.0 * s2 * x + s1); };
      }
      return [=](double x) { return (lead - 1.0) * std::log(std::abs(s(x))) + c * inv_s(x); };
    }
  }
}

}  // namespace detail

inline Density pearson_density(const PearsonSpec& spec) {
  spec.validate();
  auto m = std::make_shared<detail::DensityModel>();
  m->support = spec.support;
  m->family = Family::pearson;
  m->pearson = spec;
  m->log_unnorm = detail::pearson_log_density(spec);
  const Polynomial s = spec.s, ds = spec.s.derivative(), tau = spec.tau;
  m->score = [=](double x) { return (tau(x) - ds(x)) / s(x); };
  m->factor = make_test_function([=](double x) { return s(x); }, [=](double x) { return ds(x); }, "s(x)");
  auto coeff_str = [](const Polynomial& p) {
    std::string out;
    for (std::size_t i = 0; i < p.c.size(); ++i) out += (i ? "," : "") + detail::fmt_num(p.c[i]);
    return out;
  };
  m->label = "pearson(s=" + coeff_str(spec.s) + "|tau=" + coeff_str(spec.tau) + "|" + spec.support.str() + ")";
  for (std::size_t i = 0; i < 3; ++i) m->params.push_back(spec.s.coeff(i));
  for (std::size_t i = 0; i < 2; ++i) m->params.push_back(spec.tau.coeff(i));
  m->params.push_back(spec.support.a);
  m->params.push_back(spec.support.b);
  detail::normalize(*m);
  return Density(std::move(m));
}

inline double cdf_at(const Density& p, double x) { return std::clamp(p.cdf(x), 0.0, 1.0); }

/// Check that two densities share the support S (endpoints and closure flags).
inline void require_same_support(const Density& p, const Density& q) {
  if (!(p.support() == q.support())) {
    throw SupportMismatch(p.label() + " on " + p.support().str() + " vs " + q.label() + " on " + q.support().str());
  }
}

/// E_p[g] = integral of g(x) p(x) over S, seeded with p's landmarks and the given breakpoints.
template <class G>
QuadResult expect(const Density& p, G&& g, std::span<const double> breaks = {}, const QuadratureSpec& spec = {}) {
  std::vector<double> cuts(p.landmarks().begin(), p.landmarks().end());
  cuts.insert(cuts.end(), breaks.begin(), breaks.end());
  return integrate(
      [&](double x) {
        const double w = p.pdf(x);
        return w == 0.0 ? 0.0 : g(x) * w;
      },
      p.support(), spec, cuts);
}

}  // namespace steininfo
