#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace steininfo {

/// Left/right sides of one verified identity or bound.
struct BoundReport {
  enum class Kind { identity, inequality };

  std::string name;
  std::string target;
  std::string alternative;
  std::string observable;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  Kind kind = Kind::inequality;
  double quad_error = 0.0;
  std::map<std::string, double> details;

  /// Recompute slack and the verdict from lhs, rhs, tolerance and kind.
  BoundReport& finalize() {
    slack = rhs - lhs;
    if (std::isnan(lhs) || std::isnan(rhs)) {
      pass = false;
    } else if (kind == Kind::identity) {
      pass = std::abs(lhs - rhs) <= tolerance;
    } else {
      pass = lhs <= rhs + tolerance;
    }
    details["identity_check"] = kind == Kind::identity ? 1.0 : 0.0;
    return *this;
  }

  static BoundReport identity(std::string name, double lhs, double rhs, double tol) {
    BoundReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.tolerance = tol;
    r.kind = Kind::identity;
    r.finalize();
    return r;
  }
  static BoundReport inequality(std::string name, double lhs, double rhs, double tol) {
    BoundReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.tolerance = tol;
    r.kind = Kind::inequality;
    r.finalize();
    return r;
  }
  BoundReport& with_labels(std::string t, std::string a, std::string o) {
    target = std::move(t);
    alternative = std::move(a);
    observable = std::move(o);
    return *this;
  }
};

/// 17 significant digits: round-trips any double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void sort_reports(std::vector<BoundReport>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const BoundReport& x, const BoundReport& y) {
    return std::tie(x.name, x.target, x.alternative, x.observable) <
           std::tie(y.name, y.target, y.alternative, y.observable);
  });
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv(std::ostream& os, const std::vector<BoundReport>& rows) {
  os << "name,target,alternative,observable,lhs,rhs,slack,tolerance,pass,quad_error\n";
  for (const auto& r : rows) {
    os << csv_escape(r.name) << ',' << csv_escape(r.target) << ',' << csv_escape(r.alternative) << ','
       << csv_escape(r.observable) << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
       << format_double(r.slack) << ',' << format_double(r.tolerance) << ',' << (r.pass ? "true" : "false") << ','
       << format_double(r.quad_error) << '\n';
  }
}

}  // namespace steininfo
