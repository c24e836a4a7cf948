#pragma once

// Density and observable specifications, as short strings
//   exp:RATE  gauss:MU,SIGMA  unif[:A,B]  semicircle[:R]  arcsine[:A,B]
//   quartic[:MU,SCALE]  pearson:S2,S1,S0|T1,T0|A,B  file:PATH
//   poly:C0,C1,...  indicator:Z  tv_sign
// or as JSON objects, plus the JSON run configuration for `verify`.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "steininfo/density.hpp"
#include "steininfo/errors.hpp"
#include "steininfo/expression.hpp"
#include "steininfo/kde.hpp"
#include "steininfo/quadrature.hpp"
#include "steininfo/solver.hpp"

namespace steininfo {

using json = nlohmann::json;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_number(const std::string& tok, const std::string& context) {
  const std::string t = trim(tok);
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + t + "' in " + context);
  }
  if (used != t.size() || std::isnan(v)) throw ConfigError("bad number '" + t + "' in " + context);
  return v;
}

inline std::vector<double> parse_numbers(const std::string& list, const std::string& context) {
  std::vector<double> out;
  if (trim(list).empty()) return out;
  for (const auto& tok : split(list, ',')) out.push_back(parse_number(tok, context));
  return out;
}

inline double json_number(const json& v, const std::string& context) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_number(v.get<std::string>(), context);
  if (v.is_null()) throw ConfigError("null where a number is expected in " + context);
  throw ConfigError("expected a number in " + context);
}

inline std::vector<double> json_numbers(const json& v, const std::string& context) {
  if (!v.is_array()) throw ConfigError("expected an array of numbers in " + context);
  std::vector<double> out;
  for (const auto& e : v) out.push_back(json_number(e, context));
  return out;
}

inline Support json_support(const json& obj, const std::string& context) {
  if (!obj.contains("support")) throw ConfigError(context + ": missing \"support\"");
  const auto ab = json_numbers(obj.at("support"), context + ".support");
  if (ab.size() != 2) throw ConfigError(context + ".support must have two entries");
  bool ac = false, bc = false;
  if (obj.contains("closed")) {
    const json& c = obj.at("closed");
    if (!c.is_array() || c.size() != 2 || !c[0].is_boolean() || !c[1].is_boolean()) {
      throw ConfigError(context + ".closed must be [bool, bool]");
    }
    ac = c[0].get<bool>();
    bc = c[1].get<bool>();
  }
  return Support::make(ab[0], ab[1], ac, bc);
}

inline Bandwidth json_bandwidth(const json& obj) {
  if (!obj.contains("bandwidth")) return Bandwidth::silverman();
  const json& b = obj.at("bandwidth");
  if (b.is_string() && b.get<std::string>() == "silverman") return Bandwidth::silverman();
  return Bandwidth::fixed(json_number(b, "bandwidth"));
}

inline Bandwidth parse_bandwidth(const std::string& s) {
  if (s.empty() || s == "silverman") return Bandwidth::silverman();
  return Bandwidth::fixed(parse_number(s, "bandwidth"));
}

inline Density density_from_expression(const std::string& text, const Support& support) {
  const Expression e = Expression::parse(text);
  auto log_f = [e](double x) {
    const double v = e(x);
    if (std::isnan(v) || v < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::log(v);
  };
  auto score = [e](double x) {
    const Dual d = e.eval(x);
    return d.d / d.v;
  };
  return density_from_log_unnormalized(log_f, support, score, "unnormalized(" + text + ")");
}

}  // namespace detail

/// Options for specs that read sample files.
struct IngestOptions {
  Bandwidth bandwidth = Bandwidth::silverman();
  std::optional<Support> support_hint;
};

inline Density parse_density_spec(const std::string& spec, const IngestOptions& ingest = {}) {
  const std::string s = detail::trim(spec);
  const auto colon = s.find(':');
  const std::string head = s.substr(0, colon);
  const std::string rest = colon == std::string::npos ? std::string() : s.substr(colon + 1);
  const std::string ctx = "density spec '" + s + "'";
  if (head == "file") {
    if (rest.empty()) throw ConfigError(ctx + ": missing path");
    return ingest_samples(rest, ingest.bandwidth, ingest.support_hint);
  }
  if (head == "pearson") {
    const auto parts = detail::split(rest, '|');
    if (parts.size() != 3) throw ConfigError(ctx + ": expected pearson:S2,S1,S0|T1,T0|A,B");
    auto sd = detail::parse_numbers(parts[0], ctx);
    auto td = detail::parse_numbers(parts[1], ctx);
    const auto ab = detail::parse_numbers(parts[2], ctx);
    if (sd.size() != 3 || td.size() != 2 || ab.size() != 2) throw ConfigError(ctx + ": expected pearson:S2,S1,S0|T1,T0|A,B");
    PearsonSpec ps{Polynomial{{sd[2], sd[1], sd[0]}}, Polynomial{{td[1], td[0]}}, Support::make(ab[0], ab[1])};
    return pearson_density(ps);
  }
  static const std::vector<std::pair<std::string, std::string>> aliases = {
      {"exp", "exponential"}, {"gauss", "gaussian"}, {"normal", "gaussian"}, {"unif", "uniform"}};
  std::string family = head;
  for (const auto& [alias, name] : aliases)
    if (head == alias) family = name;
  Family f;
  try {
    f = parse_builtin_family(family);
  } catch (const UnknownFamily&) {
    throw ConfigError(ctx + ": unknown family '" + head + "'");
  }
  return builtin_density(f, detail::parse_numbers(rest, ctx));
}

/// JSON forms: a spec string, {"family","params"}, {"unnormalized","support","closed"},
/// {"pearson":{"s","tau","support"}} or {"samples","bandwidth","support","closed"}.
inline Density parse_density_json(const json& j, const IngestOptions& ingest = {}) {
  if (j.is_string()) return parse_density_spec(j.get<std::string>(), ingest);
  if (!j.is_object()) throw ConfigError("density spec must be a string or an object");
  if (j.contains("family")) {
    const std::string fam = j.at("family").get<std::string>();
    std::vector<double> params;
    if (j.contains("params")) params = detail::json_numbers(j.at("params"), fam + ".params");
    if (fam == "pearson") throw ConfigError("pearson densities use the {\"pearson\": {...}} form");
    Family f;
    try {
      f = parse_builtin_family(fam);
    } catch (const UnknownFamily& e) {
      throw ConfigError(e.what());
    }
    return builtin_density(f, params);
  }
  if (j.contains("unnormalized")) {
    return detail::density_from_expression(j.at("unnormalized").get<std::string>(), detail::json_support(j, "unnormalized"));
  }
  if (j.contains("pearson")) {
    const json& p = j.at("pearson");
    PearsonSpec ps{Polynomial{detail::json_numbers(p.at("s"), "pearson.s")},
                   Polynomial{detail::json_numbers(p.at("tau"), "pearson.tau")}, detail::json_support(p, "pearson")};
    return pearson_density(ps);
  }
  if (j.contains("samples")) {
    IngestOptions opt = ingest;
    opt.bandwidth = detail::json_bandwidth(j);
    if (j.contains("support")) opt.support_hint = detail::json_support(j, "samples");
    return ingest_samples(j.at("samples").get<std::string>(), opt.bandwidth, opt.support_hint);
  }
  throw ConfigError("density spec object needs one of family, unnormalized, pearson, samples");
}

/// Observable recipe; tv_sign is materialized per (target, alternative) pair.
struct ObservableSpec {
  enum class Kind { poly, indicator, tv_sign } kind = Kind::poly;
  std::vector<double> coeffs;
  double z = 0.0;

  Observable materialize(const Density& p, const Density& q) const {
    switch (kind) {
      case Kind::poly: return Observable::polynomial(coeffs);
      case Kind::indicator: return Observable::indicator(z);
      case Kind::tv_sign: return Observable::tv_sign(p, q);
    }
    throw ConfigError("bad observable kind");
  }
  bool needs_pair() const { return kind == Kind::tv_sign; }
};

inline ObservableSpec parse_observable_spec(const std::string& spec) {
  const std::string s = detail::trim(spec);
  const auto colon = s.find(':');
  const std::string head = s.substr(0, colon);
  const std::string rest = colon == std::string::npos ? std::string() : s.substr(colon + 1);
  ObservableSpec o;
  if (head == "poly") {
    o.coeffs = detail::parse_numbers(rest, "observable '" + s + "'");
    if (o.coeffs.empty()) throw ConfigError("observable '" + s + "': poly needs coefficients");
  } else if (head == "indicator") {
    o.kind = ObservableSpec::Kind::indicator;
    o.z = detail::parse_number(rest, "observable '" + s + "'");
  } else if (head == "tv_sign") {
    o.kind = ObservableSpec::Kind::tv_sign;
  } else {
    throw ConfigError("unknown observable '" + s + "' (expected poly:..., indicator:Z or tv_sign)");
  }
  return o;
}

inline ObservableSpec parse_observable_json(const json& j) {
  if (j.is_string()) return parse_observable_spec(j.get<std::string>());
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("observable must be a string or {\"kind\": ...}");
  const std::string kind = j.at("kind").get<std::string>();
  ObservableSpec o;
  if (kind == "poly") {
    if (!j.contains("coeffs")) throw ConfigError("poly observable needs \"coeffs\"");
    o.coeffs = detail::json_numbers(j.at("coeffs"), "coeffs");
    if (o.coeffs.empty()) throw ConfigError("poly observable needs at least one coefficient");
  } else if (kind == "indicator") {
    o.kind = ObservableSpec::Kind::indicator;
    if (!j.contains("z")) throw ConfigError("indicator observable needs \"z\"");
    o.z = detail::json_number(j.at("z"), "z");
  } else if (kind == "tv_sign") {
    o.kind = ObservableSpec::Kind::tv_sign;
  } else {
    throw ConfigError("unknown observable kind '" + kind + "'");
  }
  return o;
}

struct GridSizes {
  int scan = 401;   // sup / kappa_2 scans
  int check = 101;  // pointwise identity grids
};

struct OutputSpec {
  std::string format = "csv";
  std::string path;  // empty: stdout
};

struct RunConfig {
  Density target;
  std::vector<Density> alternatives;
  std::vector<ObservableSpec> observables;
  QuadratureSpec quad{};
  GridSizes grid{};
  OutputSpec output{};
};

inline void validate_format(const std::string& f) {
  if (f != "csv" && f != "json") throw ConfigError("output format must be csv or json, got '" + f + "'");
}

/// Default observables when a config lists none: x, x^2, tv_sign and the indicator at the target median.
inline std::vector<ObservableSpec> default_observables(const Density& target) {
  ObservableSpec x{ObservableSpec::Kind::poly, {0.0, 1.0}, 0.0};
  ObservableSpec x2{ObservableSpec::Kind::poly, {0.0, 0.0, 1.0}, 0.0};
  ObservableSpec tv{ObservableSpec::Kind::tv_sign, {}, 0.0};
  ObservableSpec ind{ObservableSpec::Kind::indicator, {}, target.quantile(0.5)};
  return {x, x2, tv, ind};
}

inline RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known = {"target", "alternatives", "observables", "quad", "grid", "output",
                                                  "quad.abs_tol", "quad.rel_tol", "quad.max_subdivisions"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  if (!j.contains("target")) throw ConfigError("config needs a \"target\"");
  c.target = parse_density_json(j.at("target"));
  if (!j.contains("alternatives") || !j.at("alternatives").is_array() || j.at("alternatives").empty()) {
    throw ConfigError("config needs at least one alternative");
  }
  IngestOptions ingest;
  ingest.support_hint = c.target.support();
  for (const auto& a : j.at("alternatives")) c.alternatives.push_back(parse_density_json(a, ingest));
  for (const auto& q : c.alternatives) require_same_support(c.target, q);

  if (j.contains("observables")) {
    for (const auto& o : j.at("observables")) c.observables.push_back(parse_observable_json(o));
  } else {
    c.observables = default_observables(c.target);
  }
  for (const auto& o : c.observables) {
    if (o.kind == ObservableSpec::Kind::indicator && !c.target.support().interior(o.z)) {
      throw ConfigError("indicator z = " + detail::fmt_num(o.z) + " is outside the target support");
    }
  }

  auto set_quad = [&](const std::string& key, const json& v) {
    if (key == "abs_tol") c.quad.abs_tol = detail::json_number(v, "quad.abs_tol");
    else if (key == "rel_tol") c.quad.rel_tol = detail::json_number(v, "quad.rel_tol");
    else if (key == "max_subdivisions") c.quad.max_subdivisions = v.get<int>();
    else throw ConfigError("unknown quad key '" + key + "'");
  };
  if (j.contains("quad")) {
    for (const auto& [k, v] : j.at("quad").items()) set_quad(k, v);
  }
  for (const char* k : {"abs_tol", "rel_tol", "max_subdivisions"}) {
    const std::string dotted = std::string("quad.") + k;
    if (j.contains(dotted)) set_quad(k, j.at(dotted));
  }
  try {
    c.quad.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.is_number_integer()) {
      c.grid.scan = g.get<int>();
    } else if (g.is_object()) {
      if (g.contains("scan")) c.grid.scan = g.at("scan").get<int>();
      if (g.contains("check")) c.grid.check = g.at("check").get<int>();
    } else {
      throw ConfigError("grid must be an integer or {\"scan\", \"check\"}");
    }
    if (c.grid.scan < 3 || c.grid.check < 3) throw ConfigError("grid sizes must be >= 3");
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    if (o.contains("format")) c.output.format = o.at("format").get<std::string>();
    if (o.contains("path")) c.output.path = o.at("path").get<std::string>();
    validate_format(c.output.format);
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  try {
    return parse_run_config(j);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

}  // namespace steininfo
