#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "steininfo/errors.hpp"

namespace steininfo {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Interval support with closure [a, b]. A closed endpoint is finite and
/// carries positive density, which is where boundary atoms of the Stein
/// operator live.
struct Support {
  double a = -kInf;
  double b = kInf;
  bool a_closed = false;
  bool b_closed = false;

  static Support make(double a, double b, bool a_closed = false, bool b_closed = false) {
    if (std::isnan(a) || std::isnan(b) || !(a < b)) {
      throw InvalidParameter("support requires a < b");
    }
    if ((a_closed && !std::isfinite(a)) || (b_closed && !std::isfinite(b))) {
      throw InvalidParameter("a closed support endpoint must be finite");
    }
    return Support{a, b, a_closed, b_closed};
  }
  static Support real_line() { return Support{}; }

  bool finite_a() const { return std::isfinite(a); }
  bool finite_b() const { return std::isfinite(b); }
  bool bounded() const { return finite_a() && finite_b(); }

  bool interior(double x) const { return x > a && x < b; }
  /// Membership in S itself (closed endpoints included).
  bool contains(double x) const {
    return interior(x) || (a_closed && x == a) || (b_closed && x == b);
  }

  std::string str() const {
    auto num = [](double v) {
      if (v == kInf) return std::string("inf");
      if (v == -kInf) return std::string("-inf");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", v);
      return std::string(buf);
    };
    return std::string(a_closed ? "[" : "(") + num(a) + "," + num(b) + (b_closed ? "]" : ")");
  }

  friend bool operator==(const Support&, const Support&) = default;
};

}  // namespace steininfo
