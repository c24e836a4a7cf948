#pragma once

// Gaussian kernel density estimates built from sample files. Kernels are
// reflected at finite endpoints of a support hint so the estimate lives on
// the same support as the target it is compared against.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "steininfo/density.hpp"
#include "steininfo/errors.hpp"

namespace steininfo {

struct SampleSet {
  std::vector<double> values;
  std::string source_path;
};

inline constexpr std::size_t kMinSamples = 10;

/// One value per line; blank lines and lines starting with '#' are skipped.
inline SampleSet read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sample file " + path);
  SampleSet out;
  out.source_path = path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const char* begin = line.data() + first;
    const char* end = line.data() + last + 1;
    if (*begin == '+') ++begin;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
      throw ParseError("not a finite number: '" + line.substr(first, last + 1 - first) + "' in " + path, line_no);
    }
    out.values.push_back(v);
  }
  if (out.values.size() < kMinSamples) {
    throw InvalidParameter("too few samples in " + path + ": need at least " + std::to_string(kMinSamples) + ", got " +
                           std::to_string(out.values.size()));
  }
  return out;
}

struct Bandwidth {
  enum class Rule { silverman, fixed } rule = Rule::silverman;
  double h = 0.0;

  static Bandwidth silverman() { return {}; }
  static Bandwidth fixed(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidParameter("fixed bandwidth must be positive");
    return {Rule::fixed, h};
  }
};

/// Type-7 sample quantile of sorted data.
inline double sample_quantile(const std::vector<double>& sorted, double u) {
  const double pos = u * static_cast<double>(sorted.size() - 1);
  const auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= sorted.size()) return sorted.back();
  return sorted[k] + (pos - static_cast<double>(k)) * (sorted[k + 1] - sorted[k]);
}

/// h = 0.9 min(sd, IQR/1.34) n^(-1/5); falls back to the nonzero spread if one is zero.
inline double silverman_bandwidth(std::vector<double> xs) {
  if (xs.size() < 2) throw InvalidParameter("bandwidth needs at least two samples");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = (sample_quantile(xs, 0.75) - sample_quantile(xs, 0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (!(spread > 0.0)) spread = std::max(sd, iqr);
  if (!(spread > 0.0)) throw InvalidParameter("degenerate bandwidth: samples have zero spread");
  return 0.9 * spread * std::pow(n, -0.2);
}

namespace detail {

struct KernelMixture {
  std::vector<double> centres;  // sorted, reflected copies included
  double h = 1.0;
  double n = 1.0;               // number of original samples
  Support support;
  double lower_cut = 0.0;       // sum of Phi((a - c)/h) over centres
  double upper_cut = 0.0;       // sum of Phi((c - b)/h) over centres
  double mass = 1.0;
  static constexpr double kWindow = 9.0;

  static double Phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

  std::pair<std::size_t, std::size_t> window(double x) const {
    const auto lo = std::lower_bound(centres.begin(), centres.end(), x - kWindow * h);
    const auto hi = std::upper_bound(lo, centres.end(), x + kWindow * h);
    return {static_cast<std::size_t>(lo - centres.begin()), static_cast<std::size_t>(hi - centres.begin())};
  }

  std::pair<std::size_t, std::size_t> nonempty_window(double x) const {
    auto [lo, hi] = window(x);
    if (lo < hi) return {lo, hi};
    const std::size_t k = lo == centres.size() ? lo - 1 : (lo == 0 ? 0 : (x - centres[lo - 1] < centres[lo] - x ? lo - 1 : lo));
    return {k, k + 1};
  }

  /// log of sum exp(-z^2/2) over the window, and the weighted mean of -z/h.
  std::pair<double, double> log_sum_and_score(double x) const {
    const auto [lo, hi] = nonempty_window(x);
    double zmin = kInf;
    for (std::size_t i = lo; i < hi; ++i) zmin = std::min(zmin, std::abs(x - centres[i]) / h);
    const double shift = 0.5 * zmin * zmin;
    double s = 0.0, sd = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double z = (x - centres[i]) / h;
      const double w = std::exp(-0.5 * z * z + shift);
      s += w;
      sd += w * (-z / h);
    }
    return {std::log(s) - shift, sd / s};
  }

  double log_norm() const { return std::log(n * h * std::sqrt(2.0 * std::numbers::pi)) + std::log(mass); }

  /// Sum of Phi((x - c)/h) over centres.
  double below(double x) const {
    const auto [lo, hi] = window(x);
    double s = static_cast<double>(lo);
    for (std::size_t i = lo; i < hi; ++i) s += Phi((x - centres[i]) / h);
    return s;
  }
  /// Sum of Phi((c - x)/h) over centres.
  double above(double x) const {
    const auto [lo, hi] = window(x);
    double s = static_cast<double>(centres.size() - hi);
    for (std::size_t i = lo; i < hi; ++i) s += Phi((centres[i] - x) / h);
    return s;
  }
};

}  // namespace detail

/// Gaussian KDE as a Density. The score is the exact log-derivative of the mixture.
inline Density kde_density(std::vector<double> samples, const Bandwidth& bw = Bandwidth::silverman(),
                           const std::optional<Support>& hint = std::nullopt, const std::string& source = "samples") {
  if (samples.size() < kMinSamples) throw InvalidParameter("too few samples: need at least " + std::to_string(kMinSamples));
  for (double v : samples)
    if (!std::isfinite(v)) throw InvalidParameter("samples must be finite");
  const Support sup = hint.value_or(Support::real_line());
  for (double v : samples) {
    if (v < sup.a || v > sup.b) throw InvalidParameter("sample " + detail::fmt_num(v) + " lies outside support " + sup.str());
  }
  const double h = bw.rule == Bandwidth::Rule::fixed ? bw.h : silverman_bandwidth(samples);

  auto mix = std::make_shared<detail::KernelMixture>();
  mix->h = h;
  mix->n = static_cast<double>(samples.size());
  mix->support = sup;
  std::vector<double>& c = mix->centres;
  c = samples;
  for (double v : samples) {
    if (sup.finite_a() && v - sup.a < detail::KernelMixture::kWindow * h) c.push_back(2.0 * sup.a - v);
    if (sup.finite_b() && sup.b - v < detail::KernelMixture::kWindow * h) c.push_back(2.0 * sup.b - v);
  }
  std::sort(c.begin(), c.end());
  mix->lower_cut = sup.finite_a() ? mix->below(sup.a) : 0.0;
  mix->upper_cut = sup.finite_b() ? mix->above(sup.b) : 0.0;
  mix->mass = (static_cast<double>(c.size()) - mix->lower_cut - mix->upper_cut) / mix->n;

  auto m = std::make_shared<detail::DensityModel>();
  m->support = sup;
  m->family = Family::kde;
  m->log_unnorm = [mix](double x) { return mix->log_sum_and_score(x).first - mix->log_norm(); };
  m->log_z = 0.0;
  m->score = [mix](double x) { return mix->log_sum_and_score(x).second; };
  m->analytic_score = true;
  const double total = static_cast<double>(c.size()) - mix->lower_cut - mix->upper_cut;
  m->cdf_closed = [mix, total](double x) { return (mix->below(x) - mix->lower_cut) / total; };
  m->sf_closed = [mix, total](double x) { return (mix->above(x) - mix->upper_cut) / total; };
  m->params = {h, mix->n};
  m->label = "kde(" + source + ",h=" + detail::fmt_num(h) + ")";
  return Density(std::move(m));
}

inline Density ingest_samples(const std::string& path, const Bandwidth& bw = Bandwidth::silverman(),
                              const std::optional<Support>& hint = std::nullopt) {
  SampleSet s = read_samples(path);
  return kde_density(std::move(s.values), bw, hint, path);
}

/// Inverse-cdf draws from p: u = (k + 0.5) 2^-53 with k the top 53 bits of mt19937_64.
inline std::vector<double> draw_samples(const Density& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    out.push_back(p.quantile(u));
  }
  return out;
}

}  // namespace steininfo
