#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "specrcv/io.hpp"
#include "specrcv/mpsolve.hpp"
#include "specrcv_cli/commands.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specrcv;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json manifest_of(const fs::path& dir) {
  std::ifstream in(dir / cli::kManifestName);
  return json::parse(in);
}

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  if (pos == std::string::npos) return -1.0;
  return std::stod(text.substr(pos + key.size() + 1));
}

void write_eigenvalues(const fs::path& path, std::vector<double> values) {
  io::write_text_file(path, io::eigenvalues_csv(SpectralDistribution(std::move(values)), {}));
}

std::string simulate_design1(const fs::path& dir, std::size_t p, std::size_t n, std::uint64_t seed) {
  const CliRun r = invoke({"simulate", "--design", "1", "--p", std::to_string(p), "--n", std::to_string(n),
                     "--seed", std::to_string(seed), "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  return (dir / "increments_r0.csv").string();
}

}  // namespace

TEST(CliSimulate, DesignPresets) {
  const fs::path d1 = testutil::scratch_dir("cli_design1");
  ASSERT_EQ(invoke({"simulate", "--design", "1", "--p", "3", "--n", "10", "--out", d1.string()}).code, 0);
  const json m1 = manifest_of(d1);
  EXPECT_NEAR(m1["results"]["theta"].get<double>(), 4e-4, 1e-18);
  EXPECT_EQ(m1["results"]["profile"].get<std::string>(), VolatilityProfile::design1().describe());

  const fs::path d2 = testutil::scratch_dir("cli_design2");
  ASSERT_EQ(invoke({"simulate", "--design", "2", "--p", "3", "--n", "10", "--out", d2.string()}).code, 0);
  const json m2 = manifest_of(d2);
  EXPECT_NEAR(m2["results"]["theta"].get<double>(), 9e-4, 1e-18);
  EXPECT_EQ(m2["results"]["profile"].get<std::string>(), VolatilityProfile::design2().describe());
}

TEST(CliSimulate, SameSeedGivesSameDigests) {
  const fs::path a = testutil::scratch_dir("cli_seed_a");
  const fs::path b = testutil::scratch_dir("cli_seed_b");
  for (const fs::path& dir : {a, b}) {
    ASSERT_EQ(invoke({"simulate", "--p", "6", "--n", "40", "--replicates", "3", "--seed", "17", "--grid",
                   "poisson", "--out", dir.string()})
                  .code,
              0);
  }
  EXPECT_EQ(manifest_of(a)["files"], manifest_of(b)["files"]);
  EXPECT_EQ(manifest_of(a)["files"].size(), 3u);
  const fs::path c = testutil::scratch_dir("cli_seed_c");
  ASSERT_EQ(invoke({"simulate", "--p", "6", "--n", "40", "--replicates", "3", "--seed", "18", "--grid",
                 "poisson", "--out", c.string()})
                .code,
            0);
  EXPECT_NE(manifest_of(a)["files"], manifest_of(c)["files"]);
}

TEST(CliSimulate, BadConfigLeavesNoOutput) {
  const fs::path root = testutil::scratch_dir("cli_badconfig");
  for (const std::vector<std::string>& args :
       {std::vector<std::string>{"--p", "0"}, {"--n", "0"}, {"--replicates", "0"}, {"--a", "-1"},
        {"--design", "custom"}, {"--lambda", (root / "missing.csv").string()}}) {
    const fs::path out = root / "run";
    std::vector<std::string> full{"simulate", "--out", out.string()};
    full.insert(full.end(), args.begin(), args.end());
    const CliRun r = invoke(full);
    EXPECT_EQ(r.code, 2) << args[0] << " " << r.err;
    EXPECT_FALSE(fs::exists(out)) << args[0];
    EXPECT_FALSE(r.err.empty());
  }
  EXPECT_EQ(invoke({"simulate", "--bogus", "--out", (root / "x").string()}).code, 2);
  EXPECT_FALSE(fs::exists(root / "x"));
  EXPECT_EQ(invoke({}).code, 2);
}

TEST(CliEstimate, ScalarFileHasEqualSpectra) {
  const fs::path dir = testutil::scratch_dir("cli_scalar");
  const std::string input = simulate_design1(dir / "sim", 1, 50, 3);
  ASSERT_EQ(invoke({"estimate", "--input", input, "--out", (dir / "est").string()}).code, 0);
  const SpectralDistribution r =
      io::parse_eigenvalues(io::read_csv_file(dir / "est" / "increments_r0_rcv_eigenvalues.csv"));
  const SpectralDistribution t =
      io::parse_eigenvalues(io::read_csv_file(dir / "est" / "increments_r0_tvarcv_eigenvalues.csv"));
  EXPECT_NEAR(r.eigenvalues()[0], t.eigenvalues()[0], 1e-15 * r.eigenvalues()[0]);
}

TEST(CliEstimate, RecordsTraceIdentityAndDiagnostic) {
  const fs::path dir = testutil::scratch_dir("cli_identity");
  const std::string input = simulate_design1(dir / "sim", 100, 1000, 5);
  ASSERT_EQ(invoke({"estimate", "--input", input, "--theta", "4e-4", "--out", (dir / "est").string()}).code, 0);
  const json m = manifest_of(dir / "est");
  EXPECT_TRUE(m["results"]["trace_identity_ok"].get<bool>());
  const json& entry = m["results"]["inputs"][0];
  EXPECT_LE(entry["trace_identity_relative_gap"].get<double>(), 1e-12);
  EXPECT_TRUE(entry["trace_diagnostic"]["passed"].get<bool>());
  EXPECT_EQ(m["files"].size(), 4u);
}

TEST(CliEstimate, ZeroIncrementNamesTheRow) {
  const fs::path dir = testutil::scratch_dir("cli_zero");
  Matrix rows = testutil::random_matrix(5, 2, 1);
  rows.row(2).setZero();
  const fs::path input = dir / "zero.csv";
  io::write_text_file(input, io::increments_csv(IncrementMatrix(rows, ObservationGrid::equispaced(5), "z")));
  const CliRun r = invoke({"estimate", "--input", input.string(), "--out", (dir / "est").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("2"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "est"));
  EXPECT_EQ(
      invoke({"estimate", "--input", input.string(), "--drop-zero-rows", "--out", (dir / "est").string()}).code,
      0);
}

TEST(CliEstimate, MissingInputIsBadConfig) {
  const fs::path dir = testutil::scratch_dir("cli_missing");
  const CliRun r = invoke({"estimate", "--input", (dir / "nope.csv").string(), "--out", (dir / "est").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(dir / "est"));
}

TEST(CliSolve, PointMassMatchesClosedForm) {
  const fs::path dir = testutil::scratch_dir("cli_solve_mp");
  const CliRun r = invoke({"solve", "--delta", "1", "--y", "0.5", "--out", (dir / "solve").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(invoke({"mplaw", "--y", "0.5", "--sigma2", "1", "--points", "4001", "--out", (dir / "mp").string()}).code,
            0);
  const DensityCurve solved = io::parse_density(io::read_csv_file(dir / "solve" / "density.csv"));
  const auto [a, b] = mp_support({0.5, 1.0});
  const double eps = 0.05 * (b - a);
  double sup = 0.0;
  for (std::size_t k = 0; k < solved.xs().size(); ++k) {
    const double x = solved.xs()[k];
    if (x < a + eps || x > b - eps) continue;
    sup = std::max(sup, std::abs(solved.ys()[k] - mp_density({0.5, 1.0}, x)));
  }
  EXPECT_LE(sup, 2e-2);
  const CliRun c = invoke({"compare", (dir / "solve" / "density.csv").string(), (dir / "mp" / "mp_law.csv").string(),
                     "--threshold", "0.02"});
  EXPECT_EQ(c.code, 0) << c.out;
}

TEST(CliSolve, WideMatrixReportsPointMass) {
  const fs::path dir = testutil::scratch_dir("cli_solve_wide");
  const CliRun r = invoke({"solve", "--delta", "1", "--y", "2", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const io::CsvTable table = io::read_csv_file(dir / "density.csv");
  EXPECT_NEAR(io::parse_double(table.metadata.at("mass_at_zero")), 0.5, 1e-2);
  EXPECT_NEAR(value_after(r.out, "mass_at_zero"), 0.5, 1e-2);
}

TEST(CliSolve, DesignOneWeightsMoveAwayFromMp) {
  const fs::path dir = testutil::scratch_dir("cli_solve_weighted");
  ASSERT_EQ(invoke({"solve", "--delta", "1", "--y", "1", "--weight", "design1", "--out", (dir / "w").string()}).code,
            0);
  ASSERT_EQ(invoke({"mplaw", "--y", "1", "--sigma2", "4e-4", "--out", (dir / "mp").string()}).code, 0);
  const CliRun c = invoke({"compare", (dir / "w" / "density.csv").string(), (dir / "mp" / "mp_law.csv").string()});
  EXPECT_EQ(c.code, 0);
  EXPECT_GT(value_after(c.out, "kolmogorov"), 0.1) << c.out;
}

TEST(CliSolve, RejectsMissingSpectrum) {
  const fs::path dir = testutil::scratch_dir("cli_solve_bad");
  EXPECT_EQ(invoke({"solve", "--y", "0.5", "--out", (dir / "s").string()}).code, 2);
  EXPECT_EQ(invoke({"solve", "--delta", "1", "--y", "0", "--out", (dir / "s").string()}).code, 2);
  EXPECT_FALSE(fs::exists(dir / "s"));
}

TEST(CliRecover, PointMassAtZero) {
  const fs::path dir = testutil::scratch_dir("cli_recover_zero");
  write_eigenvalues(dir / "zero.csv", std::vector<double>(20, 0.0));
  ASSERT_EQ(invoke({"recover", "--esd", (dir / "zero.csv").string(), "--y", "0.5", "--out", (dir / "r").string()}).code,
            0);
  std::ifstream in(dir / "r" / "spectrum.json");
  std::stringstream text;
  text << in.rdbuf();
  const PopulationSpectrum h = io::parse_population_spectrum(text.str());
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h.atoms()[0].location, 0.0);
}

TEST(CliRecover, TvarcvDesignOneConcentratesNearTheta) {
  const fs::path dir = testutil::scratch_dir("cli_recover_tvarcv");
  const std::string input = simulate_design1(dir / "sim", 100, 1000, 21);
  ASSERT_EQ(invoke({"estimate", "--input", input, "--which", "tvarcv", "--out", (dir / "est").string()}).code, 0);
  const CliRun r = invoke({"recover", "--esd", (dir / "est" / "increments_r0_tvarcv_eigenvalues.csv").string(), "--out",
                     (dir / "rec").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "rec" / "spectrum.json");
  std::stringstream text;
  text << in.rdbuf();
  const PopulationSpectrum h = io::parse_population_spectrum(text.str());
  EXPECT_GE(h.mass_between(0.9 * 4e-4, 1.1 * 4e-4), 0.85);
  EXPECT_NEAR(manifest_of(dir / "rec")["results"]["y"].get<double>(), 0.1, 1e-15);
  EXPECT_TRUE(fs::exists(dir / "rec" / "objective_trace.csv"));
}

TEST(CliCompare, Examples) {
  const fs::path dir = testutil::scratch_dir("cli_compare");
  write_eigenvalues(dir / "zero.csv", {0.0, 0.0});
  write_eigenvalues(dir / "one.csv", {1.0, 1.0, 1.0});
  const CliRun same = invoke({"compare", (dir / "one.csv").string(), (dir / "one.csv").string(), "--threshold", "0"});
  EXPECT_EQ(same.code, 0);
  EXPECT_EQ(value_after(same.out, "kolmogorov"), 0.0);
  EXPECT_EQ(value_after(same.out, "levy"), 0.0);
  const CliRun apart = invoke({"compare", (dir / "zero.csv").string(), (dir / "one.csv").string()});
  EXPECT_EQ(apart.code, 0);
  EXPECT_EQ(value_after(apart.out, "kolmogorov"), 1.0);
  const CliRun fails =
      invoke({"compare", (dir / "zero.csv").string(), (dir / "one.csv").string(), "--threshold", "0.5"});
  EXPECT_EQ(fails.code, 1);
}

TEST(CliCompare, FormatMismatchIsBadConfig) {
  const fs::path dir = testutil::scratch_dir("cli_compare_bad");
  io::write_text_file(dir / "weird.csv", "# kind=increments\nx\n1\n");
  write_eigenvalues(dir / "one.csv", {1.0});
  EXPECT_EQ(invoke({"compare", (dir / "weird.csv").string(), (dir / "one.csv").string()}).code, 2);
  io::write_text_file(dir / "broken.csv", "# kind=eigenvalues\neigenvalue\nabc\n");
  EXPECT_EQ(invoke({"compare", (dir / "broken.csv").string(), (dir / "one.csv").string()}).code, 2);
}

TEST(CliCompare, RcvIsFartherFromMpThanTvarcv) {
  const fs::path dir = testutil::scratch_dir("cli_compare_rcv");
  const std::string input = simulate_design1(dir / "sim", 100, 1000, 8);
  ASSERT_EQ(invoke({"estimate", "--input", input, "--out", (dir / "est").string()}).code, 0);
  ASSERT_EQ(invoke({"mplaw", "--y", "0.1", "--sigma2", "4e-4", "--out", (dir / "mp").string()}).code, 0);
  const std::string mp = (dir / "mp" / "mp_law.csv").string();
  const CliRun r = invoke({"compare", (dir / "est" / "increments_r0_rcv_eigenvalues.csv").string(), mp});
  const CliRun t = invoke({"compare", (dir / "est" / "increments_r0_tvarcv_eigenvalues.csv").string(), mp});
  EXPECT_GT(value_after(r.out, "kolmogorov"), value_after(t.out, "kolmogorov"));
}

TEST(CliReplay, ReproducesEveryCommand) {
  const fs::path dir = testutil::scratch_dir("cli_replay");
  const std::string input = simulate_design1(dir / "sim", 20, 200, 4);
  ASSERT_EQ(invoke({"estimate", "--input", input, "--out", (dir / "est").string()}).code, 0);
  ASSERT_EQ(invoke({"solve", "--delta", "1", "--y", "0.5", "--points", "201", "--out", (dir / "solve").string()}).code,
            0);
  ASSERT_EQ(invoke({"mplaw", "--y", "0.3", "--out", (dir / "mp").string()}).code, 0);
  for (const char* sub : {"sim", "est", "solve", "mp"}) {
    const fs::path manifest = dir / sub / cli::kManifestName;
    const CliRun in_place = invoke({"replay", manifest.string(), "--verify"});
    EXPECT_EQ(in_place.code, 0) << sub << in_place.out << in_place.err;
    EXPECT_NE(in_place.out.find("replay identical"), std::string::npos);
    const fs::path elsewhere = dir / (std::string(sub) + "_copy");
    const CliRun copy = invoke({"replay", manifest.string(), "--out", elsewhere.string(), "--verify"});
    EXPECT_EQ(copy.code, 0) << sub;
  }
}

TEST(CliReplay, DetectsTamperedDigest) {
  const fs::path dir = testutil::scratch_dir("cli_replay_tamper");
  simulate_design1(dir / "sim", 4, 30, 1);
  json m = manifest_of(dir / "sim");
  m["files"]["increments_r0.csv"] = std::string(64, '0');
  std::ofstream(dir / "tampered.json") << m.dump(2);
  const CliRun r = invoke({"replay", (dir / "tampered.json").string(), "--out", (dir / "again").string(), "--verify"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("mismatch: increments_r0.csv"), std::string::npos);
  EXPECT_EQ(invoke({"replay", (dir / "absent.json").string()}).code, 2);
}
