#pragma once

// Commands behind the stein-info executable. Each returns a process exit code:
//   0 all checks pass, 1 a check failed, 2 configuration / parse / support
//   error, 3 numerical failure (non-convergence, divergent J, NaN integrand).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "steininfo/config.hpp"
#include "steininfo/density.hpp"
#include "steininfo/errors.hpp"
#include "steininfo/kde.hpp"
#include "steininfo/metrics.hpp"
#include "steininfo/report.hpp"
#include "steininfo/solver.hpp"
#include "steininfo/stein.hpp"

namespace steininfo::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kNumericalError = 3 };

/// Run fn and map library errors to exit codes, printing the message to err.
template <class F>
int guarded(F&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const NonConvergence& e) {  // includes DivergentIntegral
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const NaNIntegrand& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const NonIntegrable& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

/// Write to path through a temporary file and rename; empty path means out.
inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    out.flush();
    return;
  }
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + tmp.string());
    f << text;
    if (!f) throw ConfigError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw ConfigError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

inline nlohmann::json report_json(const BoundReport& r) {
  nlohmann::json d = nlohmann::json::object();
  for (const auto& [k, v] : r.details) d[k] = v;
  return {{"name", r.name},
          {"target", r.target},
          {"alternative", r.alternative},
          {"observable", r.observable},
          {"lhs", r.lhs},
          {"rhs", r.rhs},
          {"slack", r.slack},
          {"tolerance", r.tolerance},
          {"pass", r.pass},
          {"kind", r.kind == BoundReport::Kind::identity ? "identity" : "inequality"},
          {"quad_error", r.quad_error},
          {"details", d}};
}

inline std::string render_reports(std::vector<BoundReport> rows, const std::string& format) {
  sort_reports(rows);
  std::ostringstream os;
  if (format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    std::size_t failed = 0;
    for (const auto& r : rows) {
      arr.push_back(report_json(r));
      failed += r.pass ? 0 : 1;
    }
    nlohmann::json doc = {{"rows", arr}, {"summary", {{"total", rows.size()}, {"failed", failed}}}};
    os << doc.dump(2) << '\n';
  } else {
    write_csv(os, rows);
  }
  return os.str();
}

inline int verdict(const std::vector<BoundReport>& rows, std::ostream& err) {
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.pass) continue;
    ++failed;
    err << "FAIL " << r.name << " [" << r.target << " | " << r.alternative << " | " << r.observable
        << "] lhs=" << format_double(r.lhs) << " rhs=" << format_double(r.rhs) << '\n';
  }
  if (failed) err << failed << " of " << rows.size() << " checks failed\n";
  return failed ? kCheckFailed : kOk;
}

inline MetricsOptions metrics_options(const QuadratureSpec& quad, const GridSizes& grid) {
  MetricsOptions opt;
  opt.quad = quad;
  opt.grid = grid.scan;
  return opt;
}

/// Every report row for a configuration, unsorted.
inline std::vector<BoundReport> verify_rows(const RunConfig& cfg) {
  const MetricsOptions opt = metrics_options(cfg.quad, cfg.grid);
  const Density& p = cfg.target;
  const auto dict = default_dictionary(p);
  std::vector<BoundReport> rows;
  auto append = [&](std::vector<BoundReport> more) { rows.insert(rows.end(), more.begin(), more.end()); };

  // J first, so a heavy-tailed alternative fails with the divergent-J diagnostic
  for (const Density& q : cfg.alternatives) fisher_info_distance(p, q, opt.quad);

  append(check_characterization(p, dict, p, cfg.quad));
  for (const Density& q : cfg.alternatives) {
    append(check_characterization(p, dict, q, cfg.quad));
    for (const auto& f : dict) rows.push_back(check_factorization(p, q, f, cfg.grid.check));
    for (const auto& spec : cfg.observables) {
      const Observable l = spec.materialize(p, q);
      rows.push_back(check_expectation_identity(p, q, l, opt));
      rows.push_back(check_holder_bound(p, q, l, opt));
      if (spec.needs_pair()) {
        BoundReport rc = residual_check(p, l, solve_stein_equation(p, l, opt.solver), cfg.grid.check);
        rc.alternative = q.label();
        rows.push_back(rc);
      }
    }
  }
  for (const auto& spec : cfg.observables) {
    if (spec.needs_pair()) continue;
    const Observable l = spec.materialize(p, p);
    rows.push_back(residual_check(p, l, solve_stein_equation(p, l, opt.solver), cfg.grid.check));
  }
  bool corollary = true;
  try {
    claimed_kappa1(p);
  } catch (const InvalidParameter&) {
    corollary = false;
  }
  if (corollary) append(verify_corollary_constants(p, cfg.alternatives, opt));
  return rows;
}

struct VerifyOptions {
  std::string config_path;
  std::optional<std::string> format;  // overrides the config
  std::optional<std::string> out;
  std::optional<double> quad_tol;     // sets the relative tolerance
  std::optional<int> grid;
};

inline int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    RunConfig cfg = load_run_config(o.config_path);
    if (o.format) cfg.output.format = *o.format;
    if (o.out) cfg.output.path = *o.out;
    if (o.quad_tol) cfg.quad.rel_tol = *o.quad_tol;
    if (o.grid) cfg.grid.scan = *o.grid;
    validate_format(cfg.output.format);
    const auto rows = verify_rows(cfg);
    emit(render_reports(rows, cfg.output.format), cfg.output.path, out);
    return verdict(rows, err);
  }, err);
}

struct DistanceRow {
  std::string metric;
  double value = 0.0;
  double quad_error = 0.0;
  std::optional<double> location;
};

inline std::vector<DistanceRow> distance_rows(const Density& p, const Density& q, const QuadratureSpec& quad, int grid) {
  require_same_support(p, q);
  std::vector<DistanceRow> rows;
  const Estimate j = fisher_info_distance(p, q, quad);
  rows.push_back({"J", j.value, j.quad_error, std::nullopt});
  const Estimate tv = tv_l1_distance(p, q, quad);
  rows.push_back({"TV", tv.value, tv.quad_error, std::nullopt});
  const SupResult k = kolmogorov_distance(p, q, grid);
  rows.push_back({"Kolmogorov", k.value, 0.0, k.argmax});
  const Estimate w = wasserstein1_distance(p, q, quad);
  rows.push_back({"W1", w.value, w.quad_error, std::nullopt});
  const SupResult s = sup_density_distance(p, q, grid);
  rows.push_back({"sup", s.value, 0.0, s.argmax});
  return rows;
}

inline std::string render_distances(const Density& p, const Density& q, const std::vector<DistanceRow>& rows,
                                    const std::string& format) {
  std::ostringstream os;
  if (format == "json") {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& r : rows) {
      nlohmann::json e = {{"value", r.value}, {"quad_error", r.quad_error}};
      if (r.location) e["location"] = *r.location;
      m[r.metric] = e;
    }
    const nlohmann::json doc = {{"target", p.label()}, {"alternative", q.label()}, {"metrics", m}};
    os << doc.dump(2) << '\n';
  } else {
    os << "metric,value,quad_error,location\n";
    for (const auto& r : rows) {
      os << r.metric << ',' << format_double(r.value) << ',' << format_double(r.quad_error) << ','
         << (r.location ? format_double(*r.location) : "") << '\n';
    }
  }
  return os.str();
}

struct PairOptions {
  std::string target;
  std::string alt;
  std::string format = "csv";
  std::string out;
  std::optional<double> quad_tol;
  int grid = 401;
  Bandwidth bandwidth = Bandwidth::silverman();
};

inline QuadratureSpec quad_from(const std::optional<double>& tol) {
  QuadratureSpec q;
  if (tol) q.rel_tol = *tol;
  try {
    q.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  return q;
}

/// Target first; a sample-file alternative takes the target's support as its hint.
inline std::pair<Density, Density> load_pair(const PairOptions& o) {
  const Density p = parse_density_spec(o.target);
  IngestOptions ingest{o.bandwidth, p.support()};
  const Density q = parse_density_spec(o.alt, ingest);
  return {p, q};
}

inline int cmd_distance(const PairOptions& o, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    validate_format(o.format);
    if (o.grid < 3) throw ConfigError("--grid must be >= 3");
    const auto [p, q] = load_pair(o);
    const auto rows = distance_rows(p, q, quad_from(o.quad_tol), o.grid);
    emit(render_distances(p, q, rows, o.format), o.out, out);
    return static_cast<int>(kOk);
  }, err);
}

struct SolveOptions {
  std::string target;
  std::string obs;
  std::optional<std::string> alt;  // needed for tv_sign
  std::vector<double> at;
  std::string format = "csv";
  std::string out;
  int grid = 101;
};

inline int cmd_solve(const SolveOptions& o, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    validate_format(o.format);
    const Density p = parse_density_spec(o.target);
    const ObservableSpec spec = parse_observable_spec(o.obs);
    Density q = p;
    if (spec.needs_pair()) {
      if (!o.alt) throw ConfigError("observable tv_sign needs --alt");
      q = parse_density_spec(*o.alt, IngestOptions{Bandwidth::silverman(), p.support()});
      require_same_support(p, q);
    }
    if (spec.kind == ObservableSpec::Kind::indicator && !p.support().interior(spec.z)) {
      throw ConfigError("indicator z lies outside the target support");
    }
    const Observable l = spec.materialize(p, q);
    const SteinSolution sol = p.vanishing_factor() ? solve_in_f0_form(p, *p.vanishing_factor(), l)
                                                   : solve_stein_equation(p, l);
    const BoundReport rc = residual_check(p, l, sol, o.grid);
    for (const auto& w : sol.warnings) err << "warning: " << w << '\n';

    std::ostringstream os;
    if (o.format == "json") {
      nlohmann::json pts = nlohmann::json::array();
      for (double x : o.at) {
        nlohmann::json e = {{"x", x}, {"f", sol.f(x)}, {"df", sol.f.derivative(x)}};
        if (sol.f0) e["f0"] = (*sol.f0)(x);
        pts.push_back(e);
      }
      const nlohmann::json doc = {{"target", p.label()},
                                  {"observable", l.label},
                                  {"centered_mean", sol.centered_mean},
                                  {"points", pts},
                                  {"residual", {{"max", rc.lhs}, {"tolerance", rc.tolerance}, {"pass", rc.pass}}}};
      os << doc.dump(2) << '\n';
    } else {
      os << "name,x,value\n";
      for (double x : o.at) {
        os << "f," << format_double(x) << ',' << format_double(sol.f(x)) << '\n';
        os << "df," << format_double(x) << ',' << format_double(sol.f.derivative(x)) << '\n';
        if (sol.f0) os << "f0," << format_double(x) << ',' << format_double((*sol.f0)(x)) << '\n';
      }
      os << "E_p[l],," << format_double(sol.centered_mean) << '\n';
      os << "residual_max,," << format_double(rc.lhs) << '\n';
      os << "residual_tolerance,," << format_double(rc.tolerance) << '\n';
    }
    emit(os.str(), o.out, out);
    return verdict({rc}, err);
  }, err);
}

struct CharacterizeOptions {
  std::string target;
  std::optional<std::string> alt;
  std::string format = "csv";
  std::string out;
  std::optional<double> quad_tol;
};

inline int cmd_characterize(const CharacterizeOptions& o, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    validate_format(o.format);
    const Density p = parse_density_spec(o.target);
    const Density w = o.alt ? parse_density_spec(*o.alt, IngestOptions{Bandwidth::silverman(), p.support()}) : p;
    const auto rows = check_characterization(p, default_dictionary(p), w, quad_from(o.quad_tol));
    emit(render_reports(rows, o.format), o.out, out);
    return verdict(rows, err);
  }, err);
}

struct IngestCommandOptions {
  std::string samples;                 // path to read
  std::optional<std::string> target;   // compare against this density
  std::optional<std::string> support;  // "A,B" hint when no target is given
  Bandwidth bandwidth = Bandwidth::silverman();
  std::optional<std::string> generate; // write samples from this spec instead
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string format = "csv";
  std::string out;
  int grid = 401;
};

inline std::string render_samples(const std::vector<double>& xs, const std::string& spec, std::uint64_t seed) {
  std::ostringstream os;
  os << "# " << xs.size() << " draws from " << spec << ", seed " << seed << '\n';
  for (double x : xs) os << format_double(x) << '\n';
  return os.str();
}

inline int cmd_ingest(const IngestCommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    if (o.generate) {
      const Density p = parse_density_spec(*o.generate);
      emit(render_samples(draw_samples(p, o.n, o.seed), *o.generate, o.seed), o.out, out);
      return static_cast<int>(kOk);
    }
    validate_format(o.format);
    if (o.samples.empty()) throw ConfigError("ingest needs --samples PATH or --generate SPEC");
    std::optional<Density> target;
    std::optional<Support> hint;
    if (o.target) {
      target = parse_density_spec(*o.target);
      hint = target->support();
    } else if (o.support) {
      const auto ab = detail::parse_numbers(*o.support, "--support");
      if (ab.size() != 2) throw ConfigError("--support expects A,B");
      hint = Support::make(ab[0], ab[1], std::isfinite(ab[0]), std::isfinite(ab[1]));
    }
    SampleSet set = read_samples(o.samples);
    const std::size_t n = set.values.size();
    const Density q = kde_density(std::move(set.values), o.bandwidth, hint, o.samples);
    const double h = q.params()[0];
    std::vector<DistanceRow> rows = {{"n", static_cast<double>(n), 0.0, std::nullopt},
                                     {"bandwidth", h, 0.0, std::nullopt}};
    if (target) {
      for (auto& r : distance_rows(*target, q, QuadratureSpec{}, o.grid)) rows.push_back(r);
    }
    emit(render_distances(target ? *target : q, q, rows, o.format), o.out, out);
    return static_cast<int>(kOk);
  }, err);
}

}  // namespace steininfo::cli
