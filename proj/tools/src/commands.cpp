#include "specrcv_cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <variant>

#include "specrcv/covmodel.hpp"
#include "specrcv/diffusion.hpp"
#include "specrcv/digest.hpp"
#include "specrcv/error.hpp"
#include "specrcv/estimators.hpp"
#include "specrcv/io.hpp"
#include "specrcv/mpsolve.hpp"
#include "specrcv/parallel.hpp"
#include "specrcv/spectra.hpp"

namespace specrcv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& field, const std::string& message) {
  throw Error(ErrorKind::BadConfig, "--" + field + ": " + message);
}

void require_positive(const std::string& field, double value) {
  if (!(value > 0.0) || !std::isfinite(value)) bad_config(field, "must be a positive number");
}

void require_at_least_one(const std::string& field, std::size_t value) {
  if (value < 1) bad_config(field, "must be >= 1");
}

void require_out(const fs::path& out) {
  if (out.empty()) bad_config("out", "an output directory is required");
  if (fs::exists(out) && !fs::is_directory(out)) bad_config("out", out.string() + " is not a directory");
}

void require_file(const std::string& field, const fs::path& path) {
  if (path.empty()) bad_config(field, "a file is required");
  if (!fs::is_regular_file(path)) bad_config(field, "no such file: " + path.string());
}

std::string absolute_string(const fs::path& path) {
  return path.empty() ? std::string() : fs::absolute(path).lexically_normal().string();
}

json optional_json(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

template <class T>
void read_field(const json& j, const char* key, T& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

void read_path(const json& j, const char* key, fs::path& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<std::string>();
}

/// Collects emitted file digests and writes manifest.json last.
class ManifestWriter {
 public:
  ManifestWriter(std::string command, json config, fs::path dir)
      : command_(std::move(command)),
        config_(std::move(config)),
        dir_(std::move(dir)),
        start_(std::chrono::steady_clock::now()) {}

  void prepare() const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + dir_.string() + ": " + ec.message());
  }

  /// Writes one data file and returns its digest. Safe to call concurrently
  /// for distinct names as long as record() is serialized by the caller.
  std::string write(const std::string& name, const std::string& contents) const {
    io::write_text_file(dir_ / name, contents);
    return sha256_hex(contents);
  }

  void record(const std::string& name, const std::string& digest) { files_[name] = digest; }

  void emit(const std::string& name, const std::string& contents) {
    record(name, write(name, contents));
  }

  json& results() { return results_; }

  fs::path finish() const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json doc;
    doc["command"] = command_;
    doc["config"] = config_;
    doc["files"] = files_;
    doc["results"] = results_;
    doc["version"] = SPECRCV_VERSION;
    doc["threads"] = thread_count();
    doc["timings"] = {{"wall_seconds", seconds}};
    const fs::path path = dir_ / kManifestName;
    io::write_text_file(path, doc.dump(2) + "\n");
    return path;
  }

 private:
  std::string command_;
  json config_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  json files_ = json::object();
  json results_ = json::object();
};

io::Metadata with_kind(io::Metadata metadata, const std::string& kind) {
  metadata["kind"] = kind;
  return metadata;
}

// ---------------------------------------------------------------- simulate

VolatilityProfile load_profile(const SimulateConfig& c) {
  if (c.design == "1") return VolatilityProfile::design1(c.a, c.b);
  if (c.design == "2") return VolatilityProfile::design2(c.c0, c.c1);
  const io::CsvTable table = io::read_csv_file(c.profile);
  std::size_t col = table.header.size();
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (table.header[k] == "gamma") col = k;
  }
  if (col == table.header.size()) bad_config("profile", "file needs a 'gamma' column");
  std::vector<double> gammas;
  for (const auto& row : table.rows) gammas.push_back(row[col]);
  try {
    return VolatilityProfile::sampled(std::move(gammas));
  } catch (const Error& e) {
    bad_config("profile", e.what());
  }
}

Matrix load_lambda(const SimulateConfig& c) {
  const auto p = static_cast<Eigen::Index>(c.p);
  if (c.lambda == "identity") return Matrix::Identity(p, p);
  const io::CsvTable table = io::read_csv_file(c.lambda);
  if (table.header.size() == 1 && table.header.front() == "diagonal") {
    if (table.rows.size() != c.p) bad_config("lambda", "diagonal file needs p rows");
    Matrix m = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) m(i, i) = table.rows[static_cast<std::size_t>(i)][0];
    return m;
  }
  if (table.header.size() != c.p || table.rows.size() != c.p) {
    bad_config("lambda", "matrix file must be p x p");
  }
  Matrix m(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      m(i, j) = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

constexpr std::uint64_t kGridStream = 0x5851f42d4c957f2dULL;

std::string replicate_file(std::size_t r) { return "increments_r" + std::to_string(r) + ".csv"; }

// ---------------------------------------------------------------- compare

using Distribution = std::variant<SpectralDistribution, DensityCurve, MarchenkoPasturLaw>;

Distribution load_distribution(const fs::path& path) {
  const io::CsvTable table = io::read_csv_file(path);
  const auto kind = table.metadata.find("kind");
  if (kind == table.metadata.end()) {
    throw Error(ErrorKind::FormatMismatch, path.string() + ": missing kind metadata");
  }
  if (kind->second == "eigenvalues") return io::parse_eigenvalues(table);
  if (kind->second == "density") return io::parse_density(table);
  if (kind->second == "mp_law") {
    const auto y = table.metadata.find("y");
    const auto s = table.metadata.find("sigma2");
    if (y == table.metadata.end() || s == table.metadata.end()) {
      throw Error(ErrorKind::FormatMismatch, path.string() + ": mp_law needs y and sigma2");
    }
    return MarchenkoPasturLaw({io::parse_double(y->second), io::parse_double(s->second)});
  }
  throw Error(ErrorKind::FormatMismatch,
              path.string() + ": cannot compare files of kind '" + kind->second + "'");
}

}  // namespace

// ---------------------------------------------------------------- validation

void validate(const SimulateConfig& c) {
  if (c.design != "1" && c.design != "2" && c.design != "custom") {
    bad_config("design", "must be 1, 2 or custom");
  }
  if (c.design == "1") {
    require_positive("a", c.a);
    require_positive("b", c.b);
  }
  if (c.design == "2") {
    require_positive("c0", c.c0);
    if (!(c.c0 > std::abs(c.c1))) bad_config("c1", "requires c0 > |c1|");
  }
  if (c.design == "custom") require_file("profile", c.profile);
  require_at_least_one("p", c.p);
  require_at_least_one("n", c.n);
  require_at_least_one("replicates", c.replicates);
  if (c.grid != "equispaced" && c.grid != "poisson") bad_config("grid", "must be equispaced or poisson");
  if (c.lambda != "identity") require_file("lambda", c.lambda);
  require_out(c.out);
}

void validate(const EstimateConfig& c) {
  if (c.inputs.empty()) bad_config("input", "at least one increments file is required");
  for (const auto& path : c.inputs) require_file("input", path);
  if (c.which != "rcv" && c.which != "tvarcv" && c.which != "both") {
    bad_config("which", "must be rcv, tvarcv or both");
  }
  if (c.theta) require_positive("theta", *c.theta);
  require_out(c.out);
}

void validate(const SolveConfig& c) {
  if (c.spectrum.empty() == !c.delta.has_value()) {
    bad_config("spectrum", "give exactly one of --spectrum or --delta");
  }
  if (!c.spectrum.empty()) require_file("spectrum", c.spectrum);
  if (c.delta && !(*c.delta >= 0.0 && std::isfinite(*c.delta))) {
    bad_config("delta", "location must be finite and >= 0");
  }
  require_positive("y", c.y);
  if (c.weight != "constant" && c.weight != "design1" && c.weight != "design2") {
    bad_config("weight", "must be constant, design1 or design2");
  }
  if (c.weight == "constant") require_positive("weight-value", c.weight_value);
  if (c.weight == "design1") {
    require_positive("a", c.a);
    require_positive("b", c.b);
  }
  if (c.weight == "design2") {
    require_positive("c0", c.c0);
    if (!(c.c0 > std::abs(c.c1))) bad_config("c1", "requires c0 > |c1|");
  }
  if (!c.upsilon.empty()) require_file("upsilon", c.upsilon);
  if (c.points < 2) bad_config("points", "must be >= 2");
  if (c.v) require_positive("v", *c.v);
  if (c.x_min && c.x_max && !(*c.x_max > *c.x_min)) bad_config("x-max", "must exceed --x-min");
  require_out(c.out);
}

void validate(const RecoverConfig& c) {
  require_file("esd", c.esd);
  if (c.y) require_positive("y", *c.y);
  if (c.grid_points < 2) bad_config("grid-points", "must be >= 2");
  require_at_least_one("probes", c.probes);
  require_at_least_one("max-iterations", c.max_iterations);
  require_out(c.out);
}

void validate(const CompareConfig& c) {
  require_file("a", c.a);
  require_file("b", c.b);
  if (c.threshold && !(*c.threshold >= 0.0)) bad_config("threshold", "must be >= 0");
  if (!c.out.empty()) require_out(c.out);
}

void validate(const MpLawConfig& c) {
  require_positive("y", c.y);
  require_positive("sigma2", c.sigma2);
  if (c.points < 2) bad_config("points", "must be >= 2");
  require_out(c.out);
}

// ---------------------------------------------------------------- JSON echo

json to_json(const SimulateConfig& c) {
  return {{"design", c.design},       {"a", c.a},
          {"b", c.b},                 {"c0", c.c0},
          {"c1", c.c1},               {"profile", absolute_string(c.profile)},
          {"p", c.p},                 {"n", c.n},
          {"replicates", c.replicates}, {"seed", c.seed},
          {"grid", c.grid},
          {"lambda", c.lambda == "identity" ? c.lambda : absolute_string(c.lambda)},
          {"out", absolute_string(c.out)}};
}

json to_json(const EstimateConfig& c) {
  json inputs = json::array();
  for (const auto& path : c.inputs) inputs.push_back(absolute_string(path));
  return {{"inputs", inputs},
          {"which", c.which},
          {"theta", optional_json(c.theta)},
          {"bins", c.bins},
          {"drop_zero_rows", c.drop_zero_rows},
          {"out", absolute_string(c.out)}};
}

json to_json(const SolveConfig& c) {
  return {{"spectrum", absolute_string(c.spectrum)},
          {"delta", optional_json(c.delta)},
          {"y", c.y},
          {"weight", c.weight},
          {"weight_value", c.weight_value},
          {"a", c.a},
          {"b", c.b},
          {"c0", c.c0},
          {"c1", c.c1},
          {"upsilon", absolute_string(c.upsilon)},
          {"x_min", optional_json(c.x_min)},
          {"x_max", optional_json(c.x_max)},
          {"points", c.points},
          {"v", optional_json(c.v)},
          {"out", absolute_string(c.out)}};
}

json to_json(const RecoverConfig& c) {
  return {{"esd", absolute_string(c.esd)},   {"y", optional_json(c.y)},
          {"grid_points", c.grid_points},    {"probes", c.probes},
          {"max_iterations", c.max_iterations}, {"out", absolute_string(c.out)}};
}

json to_json(const CompareConfig& c) {
  return {{"a", absolute_string(c.a)},
          {"b", absolute_string(c.b)},
          {"threshold", optional_json(c.threshold)},
          {"out", absolute_string(c.out)}};
}

json to_json(const MpLawConfig& c) {
  return {{"y", c.y}, {"sigma2", c.sigma2}, {"points", c.points}, {"out", absolute_string(c.out)}};
}

SimulateConfig simulate_config_from_json(const json& j) {
  SimulateConfig c;
  read_field(j, "design", c.design);
  read_field(j, "a", c.a);
  read_field(j, "b", c.b);
  read_field(j, "c0", c.c0);
  read_field(j, "c1", c.c1);
  read_path(j, "profile", c.profile);
  read_field(j, "p", c.p);
  read_field(j, "n", c.n);
  read_field(j, "replicates", c.replicates);
  read_field(j, "seed", c.seed);
  read_field(j, "grid", c.grid);
  read_field(j, "lambda", c.lambda);
  read_path(j, "out", c.out);
  return c;
}

EstimateConfig estimate_config_from_json(const json& j) {
  EstimateConfig c;
  if (j.contains("inputs")) {
    for (const auto& item : j.at("inputs")) c.inputs.emplace_back(item.get<std::string>());
  }
  read_field(j, "which", c.which);
  c.theta = optional_from(j, "theta");
  read_field(j, "bins", c.bins);
  read_field(j, "drop_zero_rows", c.drop_zero_rows);
  read_path(j, "out", c.out);
  return c;
}

SolveConfig solve_config_from_json(const json& j) {
  SolveConfig c;
  read_path(j, "spectrum", c.spectrum);
  c.delta = optional_from(j, "delta");
  read_field(j, "y", c.y);
  read_field(j, "weight", c.weight);
  read_field(j, "weight_value", c.weight_value);
  read_field(j, "a", c.a);
  read_field(j, "b", c.b);
  read_field(j, "c0", c.c0);
  read_field(j, "c1", c.c1);
  read_path(j, "upsilon", c.upsilon);
  c.x_min = optional_from(j, "x_min");
  c.x_max = optional_from(j, "x_max");
  read_field(j, "points", c.points);
  c.v = optional_from(j, "v");
  read_path(j, "out", c.out);
  return c;
}

RecoverConfig recover_config_from_json(const json& j) {
  RecoverConfig c;
  read_path(j, "esd", c.esd);
  c.y = optional_from(j, "y");
  read_field(j, "grid_points", c.grid_points);
  read_field(j, "probes", c.probes);
  read_field(j, "max_iterations", c.max_iterations);
  read_path(j, "out", c.out);
  return c;
}

CompareConfig compare_config_from_json(const json& j) {
  CompareConfig c;
  read_path(j, "a", c.a);
  read_path(j, "b", c.b);
  c.threshold = optional_from(j, "threshold");
  read_path(j, "out", c.out);
  return c;
}

MpLawConfig mplaw_config_from_json(const json& j) {
  MpLawConfig c;
  read_field(j, "y", c.y);
  read_field(j, "sigma2", c.sigma2);
  read_field(j, "points", c.points);
  read_path(j, "out", c.out);
  return c;
}

// ---------------------------------------------------------------- commands

int run_simulate(const SimulateConfig& config, std::ostream& out) {
  validate(config);
  const VolatilityProfile profile = load_profile(config);
  Matrix lambda = load_lambda(config);
  const ClassCSpec base(config.p, profile, std::move(lambda), {}, config.seed);

  ManifestWriter manifest("simulate", to_json(config), config.out);
  manifest.prepare();

  std::vector<std::string> digests(config.replicates);
  parallel_for(config.replicates, [&](std::size_t r) {
    const std::uint64_t seed = replicate_seed(config.seed, r);
    const ClassCSpec spec = base.with_seed(seed);
    const ObservationGrid grid = config.grid == "poisson"
                                     ? ObservationGrid::poisson(config.n, seed ^ kGridStream)
                                     : ObservationGrid::equispaced(config.n);
    const IncrementMatrix incr = simulate_increments(spec, grid);
    digests[r] = manifest.write(replicate_file(r), io::increments_csv(incr));
  });

  json replicates = json::array();
  for (std::size_t r = 0; r < config.replicates; ++r) {
    const std::uint64_t seed = replicate_seed(config.seed, r);
    manifest.record(replicate_file(r), digests[r]);
    replicates.push_back({{"index", r},
                          {"seed", seed},
                          {"file", replicate_file(r)},
                          {"spec_digest", base.with_seed(seed).digest()}});
  }
  manifest.results()["replicates"] = replicates;
  manifest.results()["profile"] = profile.describe();
  manifest.results()["theta"] = integrate_gamma_sq(profile, 0.0, 1.0);
  const fs::path path = manifest.finish();
  out << "wrote " << config.replicates << " replicate(s) and " << path.string() << "\n";
  return kOk;
}

int run_estimate(const EstimateConfig& config, std::ostream& out) {
  validate(config);
  std::vector<IncrementMatrix> inputs;
  std::vector<std::string> input_digests;
  for (const auto& path : config.inputs) {
    inputs.push_back(io::parse_increments(io::read_csv_file(path)));
    input_digests.push_back(sha256_file(path));
  }

  const EstimatorOptions options{config.drop_zero_rows};
  const BinPolicy policy =
      config.bins == 0 ? BinPolicy{FreedmanDiaconisBins{}} : BinPolicy{FixedBins{config.bins}};
  const bool want_rcv = config.which != "tvarcv";
  const bool want_tvarcv = config.which != "rcv";

  struct Pending {
    std::string name;
    std::string contents;
  };
  std::vector<Pending> pending;
  json per_input = json::array();
  bool identity_ok = true;

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const IncrementMatrix& incr = inputs[k];
    const std::string stem = config.inputs[k].stem().string();
    const EstimatorOutput r = rcv(incr);
    const EstimatorOutput t = tvarcv(incr, options);
    const double gap = std::abs(t.matrix.trace() - r.matrix.trace()) /
                       std::max(std::abs(r.matrix.trace()), std::numeric_limits<double>::min());
    const bool ok = gap <= 1e-12;
    identity_ok = identity_ok && ok;

    json entry = {{"input", absolute_string(config.inputs[k])},
                  {"input_digest", input_digests[k]},
                  {"n", incr.n()},
                  {"p", incr.p()},
                  {"spec_digest", incr.spec_digest()},
                  {"rcv_trace_over_p", r.trace_over_p},
                  {"tvarcv_trace_over_p", t.trace_over_p},
                  {"trace_identity_relative_gap", gap},
                  {"trace_identity_ok", ok}};
    if (config.theta) {
      const TraceReport report = trace_diagnostic(incr, *config.theta);
      entry["trace_diagnostic"] = {{"theta", report.theta},
                                   {"relative_deviation", report.relative_deviation},
                                   {"tolerance", report.tolerance},
                                   {"passed", report.passed}};
    }

    for (const EstimatorOutput* e : {&r, &t}) {
      if ((e == &r && !want_rcv) || (e == &t && !want_tvarcv)) continue;
      const std::string kind(to_string(e->kind));
      const SpectralDistribution spectrum = esd(e->matrix);
      const io::Metadata metadata = {{"estimator", kind},
                                     {"n", std::to_string(e->n)},
                                     {"p", std::to_string(e->matrix.dim())},
                                     {"digest", e->spec_digest}};
      pending.push_back({stem + "_" + kind + "_eigenvalues.csv",
                         io::eigenvalues_csv(spectrum, with_kind(metadata, "eigenvalues"))});
      pending.push_back(
          {stem + "_" + kind + "_histogram.csv", io::density_csv(histogram(spectrum, policy), metadata)});
      entry[kind + "_min_eigenvalue"] = spectrum.min();
    }
    per_input.push_back(entry);
  }

  ManifestWriter manifest("estimate", to_json(config), config.out);
  manifest.prepare();
  for (const Pending& file : pending) manifest.emit(file.name, file.contents);
  manifest.results()["inputs"] = per_input;
  manifest.results()["trace_identity_ok"] = identity_ok;
  const fs::path path = manifest.finish();
  out << "wrote " << pending.size() << " file(s) and " << path.string() << "\n";
  if (!identity_ok) {
    out << "error: tr(TVARCV) differs from tr(RCV) beyond 1e-12 relative\n";
    return kNoConvergence;
  }
  return kOk;
}

namespace {

// Nodes lo + (hi - lo) (1 - cos(pi k / (points - 1))) / 2: spacing shrinks
// quadratically toward both ends, where the density has square-root edges.
std::vector<double> edge_clustered_grid(double lo, double hi, std::size_t points) {
  std::vector<double> xs(points);
  const double last = static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) {
    const double t = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(k) / last));
    xs[k] = lo + (hi - lo) * t;
  }
  xs.front() = lo;
  xs.back() = hi;
  return xs;
}

}  // namespace

int run_solve(const SolveConfig& config, std::ostream& out) {
  validate(config);
  PopulationSpectrum h = config.delta ? PopulationSpectrum::delta(*config.delta) : [&] {
    std::ifstream in(config.spectrum);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return io::parse_population_spectrum(buffer.str());
  }();

  TimeChange timechange = IdentityTimeChange{};
  if (!config.upsilon.empty()) {
    const io::CsvTable table = io::read_csv_file(config.upsilon);
    if (table.header.size() != 1 || table.header.front() != "upsilon") {
      bad_config("upsilon", "file needs a single 'upsilon' column");
    }
    SampledTimeChange sampled;
    for (const auto& row : table.rows) sampled.upsilon.push_back(row[0]);
    timechange = std::move(sampled);
  }

  const bool classical =
      config.weight == "constant" && config.weight_value == 1.0 && config.upsilon.empty();
  std::optional<WeightProfile> weights;
  if (config.weight == "constant") {
    weights = WeightProfile::constant(config.weight_value);
  } else if (config.weight == "design1") {
    weights = weight_profile_from_model(VolatilityProfile::design1(config.a, config.b), timechange);
  } else {
    weights = weight_profile_from_model(VolatilityProfile::design2(config.c0, config.c1), timechange);
  }

  double w_min = weights->max_value();
  for (const auto& node : weights->quadrature()) w_min = std::min(w_min, node.second);
  double tau_min = 0.0;
  for (const SpectrumAtom& atom : h.atoms()) {
    if (atom.location > 0.0) {
      tau_min = atom.location;
      break;
    }
  }
  const double root = 1.0 + std::sqrt(config.y);
  double hi = config.x_max.value_or(1.2 * weights->max_value() * h.max_location() * root * root);
  if (!(hi > 0.0)) hi = 1.0;

  // The nonzero spectrum stays above edge = w_min * tau_min * (1 - sqrt y)^2,
  // because the Gram matrix dominates w_min times its unweighted counterpart.
  // The bandwidth is kept below edge / 50 so the Cauchy kernel does not smear
  // mass across that edge: for y > 1 this keeps the atom at the origin out of
  // the continuous part, and near y = 1 it resolves the x^(-1/2) blow-up at 0.
  // The floor 1e-7 * hi keeps the solver away from the real axis.
  const double gap = 1.0 - std::sqrt(config.y);
  const double edge = w_min * tau_min * gap * gap;
  const double auto_lo = config.y > 1.0 ? 0.5 * edge : 0.0;
  double v = config.v.value_or(default_bandwidth(0.0, hi));
  if (!config.v) v = std::min(v, std::max(edge / 50.0, 1e-7 * hi));
  const double lo = config.x_min.value_or(auto_lo);
  if (!(hi > lo)) bad_config("x-max", "density grid is empty");
  const std::vector<double> xs = edge_clustered_grid(lo, hi, config.points);

  StieltjesGrid grid;
  std::vector<io::TraceRow> trace;
  std::optional<Complex> previous;
  for (double x : xs) {
    const Complex z(x, v);
    auto attempt = [&](std::optional<Complex> start) -> io::TraceRow {
      if (classical) {
        const MPSolveResult r = solve_mp(h, config.y, z, {}, start);
        return {z, r.m, r.residual, r.iterations};
      }
      const WeightedSolveResult r = solve_weighted_mp(h, *weights, config.y, z, {}, start);
      previous = r.m_tilde;
      return {z, r.m_Fw, r.residual, r.iterations};
    };
    io::TraceRow row{};
    try {
      try {
        row = attempt(previous);
      } catch (const NoConvergenceError&) {
        if (!previous) throw;
        row = attempt(std::nullopt);
      }
    } catch (const NoConvergenceError& e) {
      throw NoConvergenceError(e.iterations(), e.residual(),
                               "no convergence at z = " + io::format_double(x) + " + " +
                                   io::format_double(v) + "i");
    }
    if (classical) previous = row.m;
    grid.zs.push_back(row.z);
    grid.ms.push_back(row.m);
    trace.push_back(row);
  }
  const DensityCurve curve = invert_stieltjes(grid);

  const io::Metadata metadata = {{"y", io::format_double(config.y)},
                                 {"v", io::format_double(v)},
                                 {"solver", classical ? "classical" : "weighted"}};
  ManifestWriter manifest("solve", to_json(config), config.out);
  manifest.prepare();
  manifest.emit("density.csv", io::density_csv(curve, metadata));
  manifest.emit("trace.csv", io::solver_trace_csv(trace, metadata));
  double max_residual = 0.0;
  for (const auto& row : trace) max_residual = std::max(max_residual, row.residual);
  manifest.results()["mass_at_zero"] = curve.mass_at_zero();
  manifest.results()["integral"] = curve.integral();
  manifest.results()["bandwidth"] = v;
  manifest.results()["max_residual"] = max_residual;
  manifest.results()["solver"] = classical ? "classical" : "weighted";
  const fs::path path = manifest.finish();
  out << "mass_at_zero=" << io::format_double(curve.mass_at_zero()) << "\n";
  out << "wrote density.csv, trace.csv and " << path.string() << "\n";
  return kOk;
}

int run_recover(const RecoverConfig& config, std::ostream& out) {
  validate(config);
  const io::CsvTable table = io::read_csv_file(config.esd);
  const SpectralDistribution esd = io::parse_eigenvalues(table);
  double y = 0.0;
  if (config.y) {
    y = *config.y;
  } else {
    const auto p = table.metadata.find("p");
    const auto n = table.metadata.find("n");
    if (p == table.metadata.end() || n == table.metadata.end()) {
      bad_config("y", "required when the ESD file carries no p and n metadata");
    }
    y = io::parse_double(p->second) / io::parse_double(n->second);
  }

  const std::vector<double> grid = default_recovery_grid(esd, config.grid_points);
  const std::vector<Complex> probes = default_probes(esd, config.probes);
  RecoveryOptions options;
  options.max_iterations = config.max_iterations;
  const RecoveryResult result = recover_spectrum(esd, y, grid, probes, options);

  io::CsvTable trace;
  trace.metadata = {{"kind", "objective_trace"}};
  trace.header = {"iteration", "objective"};
  for (std::size_t k = 0; k < result.objective_trace.size(); ++k) {
    trace.rows.push_back({static_cast<double>(k), result.objective_trace[k]});
  }
  std::ostringstream trace_text;
  io::write_csv(trace_text, trace);

  ManifestWriter manifest("recover", to_json(config), config.out);
  manifest.prepare();
  manifest.emit("spectrum.json", io::population_spectrum_json(result.spectrum));
  manifest.emit("objective_trace.csv", trace_text.str());
  manifest.results()["y"] = y;
  manifest.results()["objective"] = result.objective;
  manifest.results()["iterations"] = result.iterations;
  manifest.results()["converged"] = result.converged;
  manifest.results()["atoms"] = result.spectrum.size();
  const fs::path path = manifest.finish();
  if (!result.converged) {
    out << "warning: recovery objective " << io::format_double(result.objective)
        << " is above the convergence threshold\n";
  }
  out << "wrote spectrum.json, objective_trace.csv and " << path.string() << "\n";
  return kOk;
}

int run_compare(const CompareConfig& config, std::ostream& out) {
  validate(config);
  const Distribution a = load_distribution(config.a);
  const Distribution b = load_distribution(config.b);
  const double ks = std::visit([](const auto& f, const auto& g) { return kolmogorov_distance(f, g); }, a, b);
  const double levy = std::visit([](const auto& f, const auto& g) { return levy_distance(f, g); }, a, b);
  const bool passed = !config.threshold || ks <= *config.threshold;

  out << "kolmogorov=" << io::format_double(ks) << "\n";
  out << "levy=" << io::format_double(levy) << "\n";
  if (config.threshold) {
    out << (passed ? "pass" : "fail") << ": kolmogorov "
        << (passed ? "<= " : "> ") << io::format_double(*config.threshold) << "\n";
  }
  if (!config.out.empty()) {
    ManifestWriter manifest("compare", to_json(config), config.out);
    manifest.prepare();
    manifest.results() = {{"kolmogorov", ks}, {"levy", levy}, {"passed", passed}};
    manifest.finish();
  }
  return passed ? kOk : kThresholdFailure;
}

int run_mplaw(const MpLawConfig& config, std::ostream& out) {
  validate(config);
  const MarchenkoPasturLaw law({config.y, config.sigma2});
  DensityCurve curve = [&] {
    std::vector<double> xs;
    std::vector<double> ys;
    for (double x : linspace(law.lower_edge(), law.upper_edge(), config.points)) {
      const double d = law.density(x);
      if (!std::isfinite(d)) continue;  // the y = 1 edge at the origin
      xs.push_back(x);
      ys.push_back(d);
    }
    return DensityCurve(std::move(xs), std::move(ys), law.point_mass());
  }();
  io::Metadata metadata = {{"y", io::format_double(config.y)},
                           {"sigma2", io::format_double(config.sigma2)},
                           {"lower_edge", io::format_double(law.lower_edge())},
                           {"upper_edge", io::format_double(law.upper_edge())}};
  std::string text = io::density_csv(curve, metadata);
  // Mark the file as the exact law so compare uses the closed-form CDF.
  const std::string from = "# kind=density\n";
  text.replace(text.find(from), from.size(), "# kind=mp_law\n");

  ManifestWriter manifest("mplaw", to_json(config), config.out);
  manifest.prepare();
  manifest.emit("mp_law.csv", text);
  manifest.results()["point_mass"] = law.point_mass();
  const fs::path path = manifest.finish();
  out << "wrote mp_law.csv and " << path.string() << "\n";
  return kOk;
}

int run_replay(const ReplayConfig& config, std::ostream& out) {
  if (!fs::is_regular_file(config.manifest)) bad_config("manifest", "no such file: " + config.manifest.string());
  json doc;
  try {
    std::ifstream in(config.manifest);
    doc = json::parse(in);
  } catch (const json::exception& e) {
    bad_config("manifest", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.contains("command") || !doc.contains("config")) {
    bad_config("manifest", "needs 'command' and 'config'");
  }
  const std::string command = doc.at("command").get<std::string>();
  json cfg = doc.at("config");
  const fs::path target = config.out.empty() ? config.manifest.parent_path() : config.out;
  cfg["out"] = absolute_string(target);

  int code = kOk;
  try {
    if (command == "simulate") {
      code = run_simulate(simulate_config_from_json(cfg), out);
    } else if (command == "estimate") {
      code = run_estimate(estimate_config_from_json(cfg), out);
    } else if (command == "solve") {
      code = run_solve(solve_config_from_json(cfg), out);
    } else if (command == "recover") {
      code = run_recover(recover_config_from_json(cfg), out);
    } else if (command == "compare") {
      code = run_compare(compare_config_from_json(cfg), out);
    } else if (command == "mplaw") {
      code = run_mplaw(mplaw_config_from_json(cfg), out);
    } else {
      bad_config("manifest", "unknown command '" + command + "'");
    }
  } catch (const json::exception& e) {
    bad_config("manifest", std::string("malformed config: ") + e.what());
  }
  if (!config.verify || code != kOk) return code;

  std::ifstream in(target / kManifestName);
  const json replayed = json::parse(in);
  const json& expected = doc.at("files");
  const json& actual = replayed.at("files");
  bool identical = expected == actual;
  for (const auto& [name, digest] : expected.items()) {
    if (!actual.contains(name) || actual.at(name) != digest) {
      out << "mismatch: " << name << "\n";
      identical = false;
    }
  }
  out << (identical ? "replay identical\n" : "replay differs\n");
  return identical ? kOk : kThresholdFailure;
}

}  // namespace specrcv::cli
