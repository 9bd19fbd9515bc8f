#include "specrcv/io.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "numfmt.hpp"
#include "specrcv/error.hpp"

namespace specrcv::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

void write_metadata(std::ostream& out, const Metadata& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << '=' << value << '\n';
}

const std::string& require_key(const CsvTable& table, const std::string& key) {
  const auto it = table.metadata.find(key);
  if (it == table.metadata.end()) {
    throw Error(ErrorKind::FormatMismatch, "missing metadata key '" + key + "'");
  }
  return it->second;
}

void require_kind(const CsvTable& table, std::string_view kind) {
  const std::string& actual = require_key(table, "kind");
  if (actual != kind) {
    throw Error(ErrorKind::FormatMismatch,
                "expected kind=" + std::string(kind) + ", found kind=" + actual);
  }
}

std::size_t column_index(const CsvTable& table, std::string_view name) {
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (table.header[k] == name) return k;
  }
  throw Error(ErrorKind::FormatMismatch, "missing column '" + std::string(name) + "'");
}

std::size_t parse_count(const std::string& text, const std::string& key) {
  std::size_t value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::FormatMismatch, "metadata '" + key + "' is not a count: " + text);
  }
  return value;
}

}  // namespace

std::string format_double(double value) { return detail::shortest(value); }

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::FormatMismatch, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

void write_csv(std::ostream& out, const CsvTable& table) {
  write_metadata(out, table.metadata);
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (k) out << ',';
    out << table.header[k];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out << ',';
      out << format_double(row[k]);
    }
    out << '\n';
  }
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (have_header) {
        throw Error(ErrorKind::FormatMismatch,
                    "line " + std::to_string(line_number) + ": metadata after header");
      }
      const std::string_view body = trim(view.substr(1));
      const std::size_t eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorKind::FormatMismatch,
                    "line " + std::to_string(line_number) + ": metadata needs key=value");
      }
      table.metadata[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
      continue;
    }
    const auto fields = split(view);
    if (!have_header) {
      for (auto f : fields) table.header.emplace_back(f);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::FormatMismatch, "line " + std::to_string(line_number) + ": expected " +
                                                 std::to_string(table.header.size()) +
                                                 " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) {
      try {
        row.push_back(parse_double(f));
      } catch (const Error& e) {
        throw Error(ErrorKind::FormatMismatch,
                    "line " + std::to_string(line_number) + ": " + e.what());
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(ErrorKind::FormatMismatch, "CSV has no header row");
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return read_csv(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string increments_csv(const IncrementMatrix& incr) {
  std::ostringstream out;
  write_metadata(out, {{"kind", "increments"},
                       {"n", std::to_string(incr.n())},
                       {"p", std::to_string(incr.p())},
                       {"digest", incr.spec_digest()}});
  out << "tau";
  for (std::size_t j = 1; j <= incr.p(); ++j) out << ",x" << j;
  out << '\n';
  const auto times = incr.grid().times();
  const Matrix& x = incr.increments();
  for (Eigen::Index l = 0; l < x.rows(); ++l) {
    out << format_double(times[static_cast<std::size_t>(l) + 1]);
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << ',' << format_double(x(l, j));
    out << '\n';
  }
  return out.str();
}

IncrementMatrix parse_increments(const CsvTable& table) {
  require_kind(table, "increments");
  const std::size_t n = parse_count(require_key(table, "n"), "n");
  const std::size_t p = parse_count(require_key(table, "p"), "p");
  if (table.header.size() != p + 1 || table.header.front() != "tau") {
    throw Error(ErrorKind::FormatMismatch, "increments header must be tau,x1..xp");
  }
  if (table.rows.size() != n) {
    throw Error(ErrorKind::FormatMismatch, "increments: metadata n=" + std::to_string(n) +
                                               " but " + std::to_string(table.rows.size()) +
                                               " rows");
  }
  std::vector<double> times{0.0};
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t l = 0; l < n; ++l) {
    times.push_back(table.rows[l][0]);
    for (std::size_t j = 0; j < p; ++j) {
      x(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) = table.rows[l][j + 1];
    }
  }
  ObservationGrid grid(std::move(times), std::numeric_limits<double>::infinity());
  return IncrementMatrix(std::move(x), std::move(grid), require_key(table, "digest"));
}

std::string matrix_csv(const CovMatrix& m, const Metadata& metadata) {
  CsvTable table;
  table.metadata = metadata;
  for (std::size_t j = 1; j <= m.dim(); ++j) table.header.push_back("c" + std::to_string(j));
  for (std::size_t i = 0; i < m.dim(); ++i) {
    std::vector<double> row(m.dim());
    for (std::size_t j = 0; j < m.dim(); ++j) row[j] = m(i, j);
    table.rows.push_back(std::move(row));
  }
  std::ostringstream out;
  write_csv(out, table);
  return out.str();
}

std::string eigenvalues_csv(const SpectralDistribution& esd, const Metadata& metadata) {
  CsvTable table;
  table.metadata = metadata;
  table.metadata["kind"] = metadata.contains("kind") ? metadata.at("kind") : "eigenvalues";
  table.metadata["p"] = std::to_string(esd.dim());
  table.header = {"eigenvalue"};
  for (double v : esd.eigenvalues()) table.rows.push_back({v});
  std::ostringstream out;
  write_csv(out, table);
  return out.str();
}

SpectralDistribution parse_eigenvalues(const CsvTable& table) {
  const std::size_t col = column_index(table, "eigenvalue");
  if (table.rows.empty()) throw Error(ErrorKind::FormatMismatch, "eigenvalue file has no rows");
  std::vector<double> values;
  values.reserve(table.rows.size());
  for (const auto& row : table.rows) values.push_back(row[col]);
  return SpectralDistribution(std::move(values));
}

std::string density_csv(const DensityCurve& curve, const Metadata& metadata) {
  CsvTable table;
  table.metadata = metadata;
  table.metadata["kind"] = "density";
  table.metadata["mass_at_zero"] = format_double(curve.mass_at_zero());
  table.header = {"x", "y"};
  for (std::size_t k = 0; k < curve.xs().size(); ++k) {
    table.rows.push_back({curve.xs()[k], curve.ys()[k]});
  }
  std::ostringstream out;
  write_csv(out, table);
  return out.str();
}

DensityCurve parse_density(const CsvTable& table) {
  require_kind(table, "density");
  const std::size_t cx = column_index(table, "x");
  const std::size_t cy = column_index(table, "y");
  double mass = 0.0;
  if (table.metadata.contains("mass_at_zero")) mass = parse_double(table.metadata.at("mass_at_zero"));
  if (table.rows.empty()) throw Error(ErrorKind::FormatMismatch, "density file has no rows");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& row : table.rows) {
    xs.push_back(row[cx]);
    ys.push_back(row[cy]);
  }
  return DensityCurve(std::move(xs), std::move(ys), mass);
}

std::string solver_trace_csv(std::span<const TraceRow> rows, const Metadata& metadata) {
  CsvTable table;
  table.metadata = metadata;
  table.metadata["kind"] = "solver_trace";
  table.header = {"z_re", "z_im", "m_re", "m_im", "residual", "iterations"};
  for (const TraceRow& r : rows) {
    table.rows.push_back({r.z.real(), r.z.imag(), r.m.real(), r.m.imag(), r.residual,
                          static_cast<double>(r.iterations)});
  }
  std::ostringstream out;
  write_csv(out, table);
  return out.str();
}

std::string population_spectrum_json(const PopulationSpectrum& h) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const SpectrumAtom& a : h.atoms()) {
    atoms.push_back({{"location", a.location}, {"weight", a.weight}});
  }
  const nlohmann::json doc = {{"atoms", atoms}};
  return doc.dump(2) + "\n";
}

PopulationSpectrum parse_population_spectrum(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatMismatch, std::string("population spectrum JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("atoms") || !doc["atoms"].is_array()) {
    throw Error(ErrorKind::FormatMismatch, "population spectrum JSON needs an 'atoms' array");
  }
  std::vector<SpectrumAtom> atoms;
  for (const auto& item : doc["atoms"]) {
    if (!item.is_object() || !item.contains("location") || !item.contains("weight") ||
        !item["location"].is_number() || !item["weight"].is_number()) {
      throw Error(ErrorKind::FormatMismatch, "each atom needs numeric 'location' and 'weight'");
    }
    atoms.push_back({item["location"].get<double>(), item["weight"].get<double>()});
  }
  return PopulationSpectrum(std::move(atoms));
}

}  // namespace specrcv::io
