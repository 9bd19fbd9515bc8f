#pragma once

#include <complex>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "specrcv/covmodel.hpp"
#include "specrcv/diffusion.hpp"
#include "specrcv/estimators.hpp"
#include "specrcv/mpsolve.hpp"
#include "specrcv/spectra.hpp"

// CSV layout shared by every file: zero or more "# key=value" metadata lines,
// one header row, then comma-separated data rows. Numbers are written in
// shortest round-trip form with '.' as decimal separator.

namespace specrcv::io {

using Metadata = std::map<std::string, std::string>;

struct CsvTable {
  Metadata metadata;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::string format_double(double value);
double parse_double(std::string_view text);

void write_csv(std::ostream& out, const CsvTable& table);
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);
/// Writes to a string, then to disk in one shot.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

/// Columns: tau, x1..xp (tau is the right end of each interval). Metadata
/// carries kind=increments, n, p and digest.
std::string increments_csv(const IncrementMatrix& incr);
IncrementMatrix parse_increments(const CsvTable& table);

std::string matrix_csv(const CovMatrix& m, const Metadata& metadata);

/// One column "eigenvalue" with metadata kind, p, n and digest.
std::string eigenvalues_csv(const SpectralDistribution& esd, const Metadata& metadata);
SpectralDistribution parse_eigenvalues(const CsvTable& table);

/// Columns x, y with metadata kind=density and mass_at_zero.
std::string density_csv(const DensityCurve& curve, const Metadata& metadata);
DensityCurve parse_density(const CsvTable& table);

struct TraceRow {
  std::complex<double> z;
  std::complex<double> m;
  double residual;
  std::size_t iterations;
};
std::string solver_trace_csv(std::span<const TraceRow> rows, const Metadata& metadata);

/// {"atoms": [{"location": ..., "weight": ...}, ...]}
std::string population_spectrum_json(const PopulationSpectrum& h);
PopulationSpectrum parse_population_spectrum(const std::string& json_text);

}  // namespace specrcv::io
