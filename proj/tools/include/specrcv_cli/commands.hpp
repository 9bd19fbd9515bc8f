#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace specrcv::cli {

enum ExitCode : int {
  kOk = 0,
  kThresholdFailure = 1,
  kBadConfig = 2,
  kNoConvergence = 3,
};

/// Entry point shared by the executable and the tests. Diagnostics go to `err`,
/// reports to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SimulateConfig {
  std::string design = "1";  // "1", "2" or "custom"
  double a = 7.0;
  double b = 1.0;
  double c0 = 9e-4;
  double c1 = 8e-4;
  std::filesystem::path profile;  // CSV with a "gamma" column, for design=custom
  std::size_t p = 100;
  std::size_t n = 1000;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  std::string grid = "equispaced";  // or "poisson"
  std::string lambda = "identity";  // or a matrix CSV path
  std::filesystem::path out;
};

struct EstimateConfig {
  std::vector<std::filesystem::path> inputs;
  std::string which = "both";  // "rcv", "tvarcv" or "both"
  std::optional<double> theta;
  std::size_t bins = 0;  // 0 selects Freedman-Diaconis
  bool drop_zero_rows = false;
  std::filesystem::path out;
};

struct SolveConfig {
  std::filesystem::path spectrum;  // population spectrum JSON
  std::optional<double> delta;     // or a point mass at this location
  double y = 0.5;
  std::string weight = "constant";  // "constant", "design1" or "design2"
  double weight_value = 1.0;
  double a = 7.0;
  double b = 1.0;
  double c0 = 9e-4;
  double c1 = 8e-4;
  std::filesystem::path upsilon;  // optional CSV with an "upsilon" column
  std::optional<double> x_min;
  std::optional<double> x_max;
  std::size_t points = 4001;
  std::optional<double> v;
  std::filesystem::path out;
};

struct RecoverConfig {
  std::filesystem::path esd;
  std::optional<double> y;  // defaults to p/n from the file metadata
  std::size_t grid_points = 121;
  std::size_t probes = 80;
  std::size_t max_iterations = 10000;
  std::filesystem::path out;
};

struct CompareConfig {
  std::filesystem::path a;
  std::filesystem::path b;
  std::optional<double> threshold;
  std::filesystem::path out;  // optional; receives a manifest with the distances
};

struct MpLawConfig {
  double y = 0.1;
  double sigma2 = 1.0;
  std::size_t points = 2001;
  std::filesystem::path out;
};

/// Throw Error(BadConfig) naming the offending flag. The run_* functions also
/// parse every input before creating the output directory, so a bad config
/// never leaves partial output behind.
void validate(const SimulateConfig& config);
void validate(const EstimateConfig& config);
void validate(const SolveConfig& config);
void validate(const RecoverConfig& config);
void validate(const CompareConfig& config);
void validate(const MpLawConfig& config);

nlohmann::json to_json(const SimulateConfig& config);
nlohmann::json to_json(const EstimateConfig& config);
nlohmann::json to_json(const SolveConfig& config);
nlohmann::json to_json(const RecoverConfig& config);
nlohmann::json to_json(const CompareConfig& config);
nlohmann::json to_json(const MpLawConfig& config);

SimulateConfig simulate_config_from_json(const nlohmann::json& j);
EstimateConfig estimate_config_from_json(const nlohmann::json& j);
SolveConfig solve_config_from_json(const nlohmann::json& j);
RecoverConfig recover_config_from_json(const nlohmann::json& j);
CompareConfig compare_config_from_json(const nlohmann::json& j);
MpLawConfig mplaw_config_from_json(const nlohmann::json& j);

/// Each command validates, writes its data files, then writes manifest.json
/// into the output directory. Library errors propagate as exceptions.
int run_simulate(const SimulateConfig& config, std::ostream& out);
int run_estimate(const EstimateConfig& config, std::ostream& out);
int run_solve(const SolveConfig& config, std::ostream& out);
int run_recover(const RecoverConfig& config, std::ostream& out);
int run_compare(const CompareConfig& config, std::ostream& out);
int run_mplaw(const MpLawConfig& config, std::ostream& out);

struct ReplayConfig {
  std::filesystem::path manifest;
  std::filesystem::path out;  // defaults to the manifest's directory
  bool verify = false;        // compare emitted digests with the manifest
};

/// Re-runs the command recorded in a manifest. With verify, returns
/// kThresholdFailure when any emitted file digest differs.
int run_replay(const ReplayConfig& config, std::ostream& out);

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace specrcv::cli
