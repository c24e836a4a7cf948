#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "steininfo/cli.hpp"

namespace si = steininfo;

int main(int argc, char** argv) {
  CLI::App app{"stein-info: Stein operators, Stein equations and Fisher-information bounds"};
  app.require_subcommand(1);

  std::string format = "csv", out;
  std::optional<double> quad_tol;
  std::optional<int> grid;

  // verify
  si::cli::VerifyOptions vo;
  std::optional<std::string> verify_format;
  auto* verify = app.add_subcommand("verify", "run every identity and bound check for a JSON config");
  verify->add_option("--config", vo.config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  verify->add_option("--format", verify_format, "csv or json (overrides the config)")->check(CLI::IsMember({"csv", "json"}));
  verify->add_option("--out", vo.out, "report path (default: stdout)");
  verify->add_option("--quad-tol", vo.quad_tol, "relative quadrature tolerance");
  verify->add_option("--grid", vo.grid, "scan grid size")->check(CLI::Range(3, 100000));

  // distance
  si::cli::PairOptions po;
  std::string bandwidth = "silverman";
  auto* distance = app.add_subcommand("distance", "J, TV (L1), Kolmogorov, W1 and sup-density distances");
  distance->add_option("--target", po.target, "target density spec")->required();
  distance->add_option("--alt", po.alt, "alternative density spec")->required();
  distance->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  distance->add_option("--out", out, "output path (default: stdout)");
  distance->add_option("--quad-tol", quad_tol, "relative quadrature tolerance");
  distance->add_option("--grid", grid, "scan grid size")->check(CLI::Range(3, 100000));
  distance->add_option("--bandwidth", bandwidth, "KDE bandwidth for file: specs (silverman or a number)");

  // solve
  si::cli::SolveOptions so;
  std::string solve_alt;
  auto* solve = app.add_subcommand("solve", "evaluate the Stein solution for a target and observable");
  solve->add_option("--target", so.target, "target density spec")->required();
  solve->add_option("--obs", so.obs, "observable spec: poly:C0,C1,..., indicator:Z or tv_sign")->required();
  solve->add_option("--alt", solve_alt, "alternative density (for tv_sign)");
  solve->add_option("--at", so.at, "evaluation points")->expected(1, -1);
  solve->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  solve->add_option("--out", out, "output path (default: stdout)");
  solve->add_option("--grid", grid, "residual grid size")->check(CLI::Range(3, 100000));

  // characterize
  si::cli::CharacterizeOptions co;
  std::string char_alt;
  auto* characterize = app.add_subcommand("characterize", "E_w[T(f,p)] over the default dictionary");
  characterize->add_option("--target", co.target, "target density spec p")->required();
  characterize->add_option("--alt", char_alt, "density w to integrate against (default: p)");
  characterize->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  characterize->add_option("--out", out, "output path (default: stdout)");
  characterize->add_option("--quad-tol", quad_tol, "relative quadrature tolerance");

  // ingest
  si::cli::IngestCommandOptions io;
  std::string ingest_target, ingest_support, generate;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  auto* ingest = app.add_subcommand("ingest", "build a KDE from a sample file, or write seeded samples");
  ingest->add_option("--samples", io.samples, "sample file, one value per line");
  ingest->add_option("--target", ingest_target, "compare the KDE against this density (its support is the hint)");
  ingest->add_option("--support", ingest_support, "support hint A,B");
  ingest->add_option("--bandwidth", bandwidth, "silverman or a fixed positive number");
  ingest->add_option("--generate", generate, "write draws from this density spec instead of reading");
  ingest->add_option("--n", n, "number of draws for --generate");
  ingest->add_option("--seed", seed, "seed for --generate");
  ingest->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  ingest->add_option("--out", out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : si::cli::kConfigError;
  }

  auto parse_bw = [&](const std::string& text) {
    si::Bandwidth bw;
    const int code = si::cli::guarded([&] {
      bw = si::detail::parse_bandwidth(text);
      return 0;
    }, std::cerr);
    return std::make_pair(bw, code);
  };

  if (*verify) {
    vo.format = verify_format;
    return si::cli::cmd_verify(vo, std::cout, std::cerr);
  }
  if (*distance) {
    auto [bw, code] = parse_bw(bandwidth);
    if (code) return code;
    po.bandwidth = bw;
    po.format = format;
    po.out = out;
    po.quad_tol = quad_tol;
    if (grid) po.grid = *grid;
    return si::cli::cmd_distance(po, std::cout, std::cerr);
  }
  if (*solve) {
    if (!solve_alt.empty()) so.alt = solve_alt;
    so.format = format;
    so.out = out;
    if (grid) so.grid = *grid;
    return si::cli::cmd_solve(so, std::cout, std::cerr);
  }
  if (*characterize) {
    if (!char_alt.empty()) co.alt = char_alt;
    co.format = format;
    co.out = out;
    co.quad_tol = quad_tol;
    return si::cli::cmd_characterize(co, std::cout, std::cerr);
  }
  auto [bw, code] = parse_bw(bandwidth);
  if (code) return code;
  io.bandwidth = bw;
  if (!ingest_target.empty()) io.target = ingest_target;
  if (!ingest_support.empty()) io.support = ingest_support;
  if (!generate.empty()) io.generate = generate;
  io.n = n;
  io.seed = seed;
  io.format = format;
  io.out = out;
  return si::cli::cmd_ingest(io, std::cout, std::cerr);
}
