#include <CLI11.hpp>
#include <ostream>

#include "specrcv/error.hpp"
#include "specrcv_cli/commands.hpp"

namespace specrcv::cli {

namespace {

/// Copies a flag into an optional only when it was given on the command line.
struct OptionalFlag {
  double value = 0.0;
  CLI::Option* option = nullptr;

  void add(CLI::App& app, const std::string& name, const std::string& help) {
    option = app.add_option(name, value, help);
  }
  std::optional<double> get() const {
    return option && option->count() > 0 ? std::optional<double>(value) : std::nullopt;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral analysis of realized covariance matrices for class-C diffusions"};
  app.name("specrcv");
  app.require_subcommand(1);
  app.set_version_flag("--version", SPECRCV_VERSION);

  SimulateConfig simulate;
  auto* sim = app.add_subcommand("simulate", "Simulate increments for a class-C diffusion");
  sim->add_option("--design", simulate.design, "1, 2 or custom")->check(CLI::IsMember({"1", "2", "custom"}));
  sim->add_option("--a", simulate.a, "Design 1 outer level (times 1e-4)");
  sim->add_option("--b", simulate.b, "Design 1 inner level (times 1e-4)");
  sim->add_option("--c0", simulate.c0, "Design 2 constant term");
  sim->add_option("--c1", simulate.c1, "Design 2 cosine amplitude");
  sim->add_option("--profile", simulate.profile, "CSV with a gamma column (design custom)");
  sim->add_option("--p", simulate.p, "Dimension");
  sim->add_option("--n", simulate.n, "Number of observation intervals");
  sim->add_option("--replicates", simulate.replicates, "Independent replicates");
  sim->add_option("--seed", simulate.seed, "Base seed");
  sim->add_option("--grid", simulate.grid, "equispaced or poisson")->check(CLI::IsMember({"equispaced", "poisson"}));
  sim->add_option("--lambda", simulate.lambda, "identity, or a matrix / diagonal CSV");
  sim->add_option("--out", simulate.out, "Output directory")->required();

  EstimateConfig estimate;
  OptionalFlag estimate_theta;
  auto* est = app.add_subcommand("estimate", "RCV and TVARCV spectra from increments files");
  est->add_option("--input", estimate.inputs, "Increments CSV files")->required();
  est->add_option("--which", estimate.which, "rcv, tvarcv or both")->check(CLI::IsMember({"rcv", "tvarcv", "both"}));
  estimate_theta.add(*est, "--theta", "Reference value for the tr(RCV)/p diagnostic");
  est->add_option("--bins", estimate.bins, "Histogram bins (0 = Freedman-Diaconis)");
  est->add_flag("--drop-zero-rows", estimate.drop_zero_rows, "Skip zero increments in TVARCV");
  est->add_option("--out", estimate.out, "Output directory")->required();

  SolveConfig solve;
  OptionalFlag solve_delta, solve_xmin, solve_xmax, solve_v;
  auto* sol = app.add_subcommand("solve", "Limiting spectral density from the MP equations");
  sol->add_option("--spectrum", solve.spectrum, "Population spectrum JSON");
  solve_delta.add(*sol, "--delta", "Point-mass population spectrum at this location");
  sol->add_option("--y", solve.y, "Dimension ratio p/n");
  sol->add_option("--weight", solve.weight, "constant, design1 or design2")
      ->check(CLI::IsMember({"constant", "design1", "design2"}));
  sol->add_option("--weight-value", solve.weight_value, "Value of a constant weight");
  sol->add_option("--a", solve.a, "Design 1 outer level (times 1e-4)");
  sol->add_option("--b", solve.b, "Design 1 inner level (times 1e-4)");
  sol->add_option("--c0", solve.c0, "Design 2 constant term");
  sol->add_option("--c1", solve.c1, "Design 2 cosine amplitude");
  sol->add_option("--upsilon", solve.upsilon, "CSV with the time-change density");
  solve_xmin.add(*sol, "--x-min", "Left end of the density grid");
  solve_xmax.add(*sol, "--x-max", "Right end of the density grid");
  sol->add_option("--points", solve.points, "Density grid size");
  solve_v.add(*sol, "--v", "Inversion bandwidth");
  sol->add_option("--out", solve.out, "Output directory")->required();

  RecoverConfig recover;
  OptionalFlag recover_y;
  auto* rec = app.add_subcommand("recover", "Estimate the population spectrum from an ESD");
  rec->add_option("--esd", recover.esd, "Eigenvalue CSV")->required();
  recover_y.add(*rec, "--y", "Dimension ratio (default p/n from the file)");
  rec->add_option("--grid-points", recover.grid_points, "Candidate locations");
  rec->add_option("--probes", recover.probes, "Stieltjes probe points");
  rec->add_option("--max-iterations", recover.max_iterations, "Iteration cap");
  rec->add_option("--out", recover.out, "Output directory")->required();

  CompareConfig compare;
  OptionalFlag compare_threshold;
  auto* cmp = app.add_subcommand("compare", "Kolmogorov and Levy distances between two files");
  cmp->add_option("a", compare.a, "First eigenvalue, density or mp_law file")->required();
  cmp->add_option("b", compare.b, "Second file")->required();
  compare_threshold.add(*cmp, "--threshold", "Exit 1 when the Kolmogorov distance exceeds this");
  cmp->add_option("--out", compare.out, "Optional directory for a manifest");

  MpLawConfig mplaw;
  auto* mpl = app.add_subcommand("mplaw", "Closed-form Marcenko-Pastur density file");
  mpl->add_option("--y", mplaw.y, "Dimension ratio");
  mpl->add_option("--sigma2", mplaw.sigma2, "Scale");
  mpl->add_option("--points", mplaw.points, "Grid size");
  mpl->add_option("--out", mplaw.out, "Output directory")->required();

  ReplayConfig replay;
  auto* rep = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  rep->add_option("manifest", replay.manifest, "manifest.json")->required();
  rep->add_option("--out", replay.out, "Output directory (default: the manifest's)");
  rep->add_flag("--verify", replay.verify, "Exit 1 unless every file digest matches");

  std::vector<const char*> argv{"specrcv"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadConfig;
  }

  estimate.theta = estimate_theta.get();
  solve.delta = solve_delta.get();
  solve.x_min = solve_xmin.get();
  solve.x_max = solve_xmax.get();
  solve.v = solve_v.get();
  recover.y = recover_y.get();
  compare.threshold = compare_threshold.get();

  try {
    if (sim->parsed()) return run_simulate(simulate, out);
    if (est->parsed()) return run_estimate(estimate, out);
    if (sol->parsed()) return run_solve(solve, out);
    if (rec->parsed()) return run_recover(recover, out);
    if (cmp->parsed()) return run_compare(compare, out);
    if (mpl->parsed()) return run_mplaw(mplaw, out);
    if (rep->parsed()) return run_replay(replay, out);
  } catch (const NoConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kNoConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kBadConfig;
  }
  return kBadConfig;
}

}  // namespace specrcv::cli
