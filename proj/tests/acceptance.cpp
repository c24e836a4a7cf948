// One line per acceptance criterion; exit status is nonzero if any fails.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "steininfo/cli.hpp"

using namespace steininfo;

namespace {

int failures = 0;

void report(int id, const std::string& what, bool pass, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Run a criterion body; a thrown error counts as a failure of that criterion.
void criterion(int id, const std::string& what, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    report(id, what, pass, detail);
  } catch (const std::exception& e) {
    report(id, what, false, std::string("error: ") + e.what());
  }
}

std::vector<Density> builtins() {
  return {builtin_density("gaussian"), builtin_density("exponential", {1}), builtin_density("uniform"),
          builtin_density("semicircle"), builtin_density("arcsine"), builtin_density("quartic")};
}

struct Pair {
  Density p, q;
};

std::vector<Pair> corollary_matrix() {
  std::vector<Pair> out;
  const auto e = builtin_density("exponential", {1});
  for (double l : {0.5, 0.8, 1.25, 2.0, 4.0}) out.push_back({e, builtin_density("exponential", {l})});
  const auto g = builtin_density("gaussian");
  for (auto [m, s] : std::vector<std::pair<double, double>>{{0.5, 1}, {-0.5, 1}, {1, 1}, {0, 1.2}, {0, 0.8}}) {
    out.push_back({g, builtin_density("gaussian", {m, s})});
  }
  const auto qt = builtin_density("quartic");
  for (double m : {0.5, -0.5, 1.0}) out.push_back({qt, builtin_density("quartic", {m, 1})});
  return out;
}

int run_binary(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(STEIN_INFO_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::string text;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) text += buf;
  const int status = pclose(pipe);
  if (output) *output = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_file(const std::string& name, const std::string& body = {}) {
  const std::string path = (std::filesystem::temp_directory_path() / ("stein_acc_" + name)).string();
  if (!body.empty()) std::ofstream(path) << body;
  return path;
}

double eval_poly(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

}  // namespace

int main() {
  criterion(1, "operator oracle equivalence", [] {
    const std::vector<TestFunction> dict = {tf::monomial(0), tf::monomial(1), tf::monomial(2), tf::sine(),
                                            tf::gaussian_bump()};
    const PearsonSpec gamma{Polynomial{{0.0, 1.0}}, Polynomial{{2.0, -1.0}}, Support::make(0.0, kInf)};
    const TestFunction pearson_s = make_test_function([](double x) { return x; }, [](double) { return 1.0; }, "x");
    struct Case {
      std::string family;
      Density p;
      std::optional<TestFunction> s;
    };
    const std::vector<Case> cases = {
        {"gaussian", builtin_density("gaussian"), std::nullopt},
        {"exponential", builtin_density("exponential", {1}), std::nullopt},
        {"uniform", builtin_density("uniform"), std::nullopt},
        {"semicircle", builtin_density("semicircle"), *builtin_density("semicircle").vanishing_factor()},
        {"arcsine", builtin_density("arcsine"), *builtin_density("arcsine").vanishing_factor()},
        {"pearson", pearson_density(gamma), pearson_s}};
    double worst = 0.0;
    for (const auto& c : cases) {
      for (const auto& g : dict) {
        const TestFunction f = c.s ? product(g, *c.s) : g;
        const auto generic = stein_operator(f, c.p, false);
        const auto closed =
            stein_operator_closed_form(c.family, g, c.family == "pearson" ? std::optional(gamma) : std::nullopt);
        for (double x : c.p.quantile_grid(101)) worst = std::max(worst, std::abs(generic(x) - closed(x)));
      }
    }
    return std::pair{worst <= 1e-8, "max abs error " + num(worst) + " <= 1e-08 (6 families x 5 functions x 101 points)"};
  });

  criterion(2, "zero mean under the target", [] {
    double worst = 0.0;
    int n = 0;
    for (const auto& p : builtins()) {
      for (const auto& f : default_dictionary(p)) {
        worst = std::max(worst, std::abs(expect_stein(stein_operator(f, p), p).value));
        ++n;
      }
    }
    return std::pair{worst <= 1e-7, "max |E_p[T(f,p)]| " + num(worst) + " <= 1e-07 over " + std::to_string(n) + " cases"};
  });

  criterion(3, "distinct targets are separated", [] {
    const std::vector<std::vector<Density>> groups = {
        {builtin_density("gaussian"), builtin_density("gaussian", {0.5, 1}), builtin_density("gaussian", {0, 1.2}),
         builtin_density("quartic"), builtin_density("quartic", {0.5, 1})},
        {builtin_density("exponential", {1}), builtin_density("exponential", {0.5}), builtin_density("exponential", {2})},
        {builtin_density("semicircle"),
         density_from_unnormalized([](double x) { return std::sqrt(4.0 - x * x) * (1.0 + 0.3 * x); }, Support::make(-2, 2))}};
    double weakest = kInf;
    int pairs = 0;
    for (const auto& grp : groups) {
      for (std::size_t i = 0; i < grp.size(); ++i) {
        for (std::size_t j = 0; j < grp.size(); ++j) {
          if (i == j) continue;
          double strongest = 0.0;
          for (const auto& f : default_dictionary(grp[i])) {
            strongest = std::max(strongest, std::abs(expect_stein(stein_operator(f, grp[i]), grp[j]).value));
          }
          weakest = std::min(weakest, strongest);
          ++pairs;
        }
      }
    }
    return std::pair{weakest > 1e-3, "weakest pair max |E_w[T(f,p)]| " + num(weakest) + " > 1e-03 over " +
                                         std::to_string(pairs) + " ordered pairs"};
  });

  criterion(4, "factorization", [] {
    const std::vector<std::vector<Density>> groups = {
        {builtin_density("gaussian"), builtin_density("gaussian", {1, 1}), builtin_density("gaussian", {0, 1.2}),
         builtin_density("quartic"), builtin_density("quartic", {0.5, 1})},
        {builtin_density("exponential", {1}), builtin_density("exponential", {0.5}), builtin_density("exponential", {4})}};
    double worst = 0.0;
    for (const auto& grp : groups) {
      for (const auto& p : grp) {
        for (const auto& q : grp) {
          for (const auto& f : default_dictionary(p)) worst = std::max(worst, check_factorization(p, q, f).lhs);
        }
      }
    }
    return std::pair{worst <= 1e-10, "max deviation " + num(worst) + " <= 1e-10"};
  });

  criterion(5, "Stein equation residuals and dual forms", [] {
    const Support unit_closed = Support::make(0.0, 1.0, true, true);
    const std::vector<Pair> targets = {
        {builtin_density("gaussian"), builtin_density("gaussian", {0.5, 1})},
        {builtin_density("exponential", {1}), builtin_density("exponential", {2})},
        {builtin_density("uniform"), density_from_unnormalized([](double x) { return 1.0 + x; }, unit_closed)},
        {builtin_density("semicircle"),
         density_from_unnormalized([](double x) { return std::sqrt(4.0 - x * x) * (1.0 + 0.3 * x); }, Support::make(-2, 2))},
        {builtin_density("arcsine"),
         density_from_unnormalized([](double x) { return (1.0 + x) / std::sqrt(x * (1.0 - x)); }, Support::make(0, 1))},
        {builtin_density("quartic"), builtin_density("quartic", {0.5, 1})}};
    double smooth = 0.0, jumpy = 0.0, gap = 0.0;
    for (const auto& [p, q] : targets) {
      std::vector<Observable> ls = {Observable::polynomial({0, 1}), Observable::polynomial({0, 0, 1}),
                                    Observable::tv_sign(p, q)};
      for (double u : {0.25, 0.5, 0.75}) ls.push_back(Observable::indicator(p.quantile(u)));
      for (const auto& l : ls) {
        const auto sol = solve_stein_equation(p, l);
        const double dev = residual_check(p, l, sol).lhs;
        (l.discontinuous() ? jumpy : smooth) = std::max(l.discontinuous() ? jumpy : smooth, dev);
        gap = std::max(gap, dual_form_gap(sol));
      }
    }
    const bool pass = smooth <= 1e-6 && jumpy <= 1e-4 && gap <= 1e-7;
    return std::pair{pass, "smooth " + num(smooth) + " <= 1e-06, discontinuous " + num(jumpy) +
                               " <= 1e-04, dual-form gap " + num(gap) + " <= 1e-07"};
  });

  criterion(6, "expectation identity", [] {
    double worst = 0.0;
    int n = 0;
    for (const auto& [p, q] : corollary_matrix()) {
      for (const auto& l : {Observable::polynomial({0, 1}), Observable::polynomial({0, 0, 1}), Observable::tv_sign(p, q),
                            Observable::indicator(p.quantile(0.5))}) {
        const auto r = check_expectation_identity(p, q, l);
        worst = std::max(worst, std::abs(r.lhs - r.rhs));
        ++n;
      }
    }
    return std::pair{worst <= 1e-6, "max |lhs - rhs| " + num(worst) + " <= 1e-06 over " + std::to_string(n) + " triples"};
  });

  criterion(7, "closed-form spot values", [] {
    const auto g = builtin_density("gaussian"), g1 = builtin_density("gaussian", {1, 1});
    const auto e1 = builtin_density("exponential", {1}), e2 = builtin_density("exponential", {2});
    const double j_g = fisher_info_distance(g, g1).value, j_e = fisher_info_distance(e1, e2).value;
    const double tv = tv_l1_distance(e1, e2).value, w1 = wasserstein1_distance(g, g1).value;
    const double ks = kolmogorov_distance(e1, e2).value;
    const bool pass = std::abs(j_g - 1) <= 1e-8 && std::abs(j_e - 1) <= 1e-8 && std::abs(tv - 0.5) <= 1e-8 &&
                      std::abs(w1 - 1) <= 1e-7 && std::abs(ks - 0.25) <= 1e-7;
    return std::pair{pass, "|J_gauss-1| " + num(std::abs(j_g - 1)) + ", |J_exp-1| " + num(std::abs(j_e - 1)) +
                               ", |TV-0.5| " + num(std::abs(tv - 0.5)) + ", |W1-1| " + num(std::abs(w1 - 1)) +
                               ", |K-0.25| " + num(std::abs(ks - 0.25))};
  });

  criterion(8, "corollary constants", [] {
    struct Group {
      Density target;
      std::vector<Density> family;
    };
    const std::vector<Group> groups = {
        {builtin_density("exponential", {1}),
         {builtin_density("exponential", {0.5}), builtin_density("exponential", {0.8}),
          builtin_density("exponential", {1.25}), builtin_density("exponential", {2}),
          builtin_density("exponential", {4})}},
        {builtin_density("gaussian"),
         {builtin_density("gaussian", {0.5, 1}), builtin_density("gaussian", {-0.5, 1}), builtin_density("gaussian", {1, 1}),
          builtin_density("gaussian", {0, 1.2}), builtin_density("gaussian", {0, 0.8})}},
        {builtin_density("quartic"),
         {builtin_density("quartic", {0.5, 1}), builtin_density("quartic", {-0.5, 1}), builtin_density("quartic", {1, 1})}}};
    int rows = 0;
    std::string failed;
    for (const auto& grp : groups) {
      for (const auto& r : verify_corollary_constants(grp.target, grp.family)) {
        ++rows;
        if (!r.pass) failed += " " + r.name + "[" + r.alternative + "] " + num(r.lhs) + " > " + num(r.rhs) + ";";
      }
    }
    return std::pair{failed.empty(), std::to_string(rows) + " rows, tolerance 1e-06" +
                                         (failed.empty() ? std::string() : "; failing:" + failed)};
  });

  criterion(9, "quadrature property suite", [] {
    int bad = 0;
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> coef(-3.0, 3.0), c2(-2.0, 2.0);
    std::uniform_int_distribution<int> deg(0, 4);
    auto poly = [&] {
      std::vector<double> c(static_cast<std::size_t>(deg(rng)) + 1);
      for (auto& v : c) v = c2(rng);
      return c;
    };
    const auto pdfs = builtins();
    for (int k = 0; k < 200; ++k) {
      const Density& p = pdfs[static_cast<std::size_t>(k) % pdfs.size()];
      const auto f = poly(), g = poly();
      const double a = coef(rng), b = coef(rng);
      auto fp = [&](double x) { return eval_poly(f, x) * p.pdf(x); };
      auto gp = [&](double x) { return eval_poly(g, x) * p.pdf(x); };
      const auto rf = integrate(fp, p.support()), rg = integrate(gp, p.support());
      const auto rc = integrate([&](double x) { return a * fp(x) + b * gp(x); }, p.support());
      const double tol = std::abs(a) * rf.error_estimate + std::abs(b) * rg.error_estimate + rc.error_estimate +
                         1e-9 * (1.0 + std::abs(rc.value));
      if (std::abs(rc.value - (a * rf.value + b * rg.value)) > tol) ++bad;
    }
    std::mt19937_64 rng2(77);
    std::uniform_real_distribution<double> rate(0.2, 5.0), shift(-3.0, 3.0);
    for (int k = 0; k < 200; ++k) {
      const double lam = rate(rng2), a = shift(rng2);
      auto f = [&](double x) { return std::exp(-lam * (x - a)); };
      const double semi = integrate(f, Support::make(a, kInf)).value;
      const double finite = integrate([&](double t) {
        const double om = 1.0 - t;
        return f(a + t / om) / (om * om);
      }, 0.0, 1.0).value;
      if (std::abs(semi - finite) > 1e-10 * std::max(1.0, std::abs(semi))) ++bad;
    }
    std::mt19937_64 rng3(99);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    for (int k = 0; k < 200; ++k) {
      const Density& p = pdfs[static_cast<std::size_t>(k) % pdfs.size()];
      const Cumulative& cum = [&]() -> const Cumulative& {
        static std::vector<std::optional<Cumulative>> cache(6);
        auto& slot = cache[static_cast<std::size_t>(k) % pdfs.size()];
        if (!slot) slot.emplace(cumulative([p](double x) { return p.pdf(x); }, p.support()));
        return *slot;
      }();
      double x1 = p.quantile(u(rng3)), x2 = p.quantile(u(rng3));
      if (x1 > x2) std::swap(x1, x2);
      const double direct = integrate([&](double x) { return p.pdf(x); }, x1, x2).value;
      if (std::abs(cum(x2) - cum(x1) - direct) > 1e-8) ++bad;
    }
    return std::pair{bad == 0, "600 randomized cases (linearity, transform, additivity), " + std::to_string(bad) + " failures"};
  });

  criterion(10, "CLI integration", [] {
    std::string detail;
    bool pass = true;
    for (const char* name : {"exponential", "gaussian", "quartic"}) {
      const std::string out = temp_file(std::string(name) + ".csv");
      const int code = run_binary("verify --config " + std::string(STEIN_CONFIG_DIR) + "/" + name + ".json --out " + out);
      detail += std::string(name) + ".json exit " + std::to_string(code) + "; ";
      if (code != 0) pass = false;
    }
    const std::string a = temp_file("det_a.json"), b = temp_file("det_b.json");
    const std::string cfg = std::string(STEIN_CONFIG_DIR) + "/gaussian.json";
    run_binary("verify --config " + cfg + " --format json --out " + a);
    run_binary("verify --config " + cfg + " --format json --out " + b);
    const bool same = !slurp(a).empty() && slurp(a) == slurp(b);
    detail += same ? "reports byte-identical; " : "reports differ; ";
    pass = pass && same;

    std::string text;
    const int mismatch = run_binary("verify --config " +
                                        temp_file("mm.json", R"J({"target":"exp:1","alternatives":["gauss:0,1"]})J"),
                                    &text);
    const bool mm_ok = mismatch == 2 && text.find("support mismatch") != std::string::npos;
    const int divergent = run_binary(
        "verify --config " +
            temp_file("dv.json", R"J({"target":"gauss:0,1","alternatives":[{"unnormalized":"1/(1+x^2)","support":["-inf","inf"]}]})J"),
        &text);
    const bool dv_ok = divergent == 3 && text.find("divergent-J") != std::string::npos;
    const int parse = run_binary("verify --config " + temp_file("pe.json", "{\"target\": "));
    const int solve = run_binary("solve --target exp:1 --obs poly:0,1 --at 1.0");
    const int usage = run_binary("distance --target exp:1");
    const bool codes = mm_ok && dv_ok && parse == 2 && solve == 0 && usage == 2;
    detail += "exit codes mismatch=" + std::to_string(mismatch) + " divergent=" + std::to_string(divergent) +
              " parse=" + std::to_string(parse) + " solve=" + std::to_string(solve) + " usage=" + std::to_string(usage);
    return std::pair{pass && codes, detail};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
