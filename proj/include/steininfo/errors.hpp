#pragma once

#include <stdexcept>
#include <string>

namespace steininfo {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class UnknownFamily : public Error {
 public:
  explicit UnknownFamily(const std::string& name) : Error("unknown family: " + name) {}
};

class SupportMismatch : public Error {
 public:
  explicit SupportMismatch(const std::string& detail) : Error("support mismatch: " + detail) {}
};

/// A normalization integral did not converge to a finite positive mass.
class NonIntegrable : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature exhausted its subdivision budget.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Raised when an integral that should be finite (e.g. J(p,q)) diverges.
class DivergentIntegral : public NonConvergence {
 public:
  using NonConvergence::NonConvergence;
};

class NaNIntegrand : public Error {
 public:
  explicit NaNIntegrand(double x)
      : Error("integrand returned NaN at x = " + std::to_string(x)), abscissa(x) {}
  double abscissa;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line_no)
      : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg), line(line_no) {}
  int line;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace steininfo
