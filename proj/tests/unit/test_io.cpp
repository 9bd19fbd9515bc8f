#include <gtest/gtest.h>

#include <fstream>
#include <limits>
#include <sstream>

#include "specrcv/error.hpp"
#include "specrcv/io.hpp"
#include "test_util.hpp"

using namespace specrcv;

namespace {

ErrorKind kind_of_parse(const std::string& text) {
  std::istringstream in(text);
  try {
    io::read_csv(in);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

}  // namespace

TEST(Io, DoubleRoundTrip) {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 4e-4, 1e-300, 1.7976931348623157e308, -2.5e-17}) {
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_THROW(io::parse_double("1.0x"), Error);
  EXPECT_THROW(io::parse_double(""), Error);
  EXPECT_THROW(io::parse_double("1,5"), Error);
}

TEST(Io, CsvRoundTrip) {
  io::CsvTable table;
  table.metadata = {{"kind", "test"}, {"note", "a b"}};
  table.header = {"a", "b"};
  table.rows = {{1.0, 2.5}, {-3.0, 1e-9}};
  std::ostringstream out;
  io::write_csv(out, table);
  std::istringstream in(out.str());
  const io::CsvTable back = io::read_csv(in);
  EXPECT_EQ(back.metadata, table.metadata);
  EXPECT_EQ(back.header, table.header);
  EXPECT_EQ(back.rows, table.rows);
}

TEST(Io, CsvErrorsCarryLineNumbers) {
  EXPECT_EQ(kind_of_parse("a,b\n1,2\n3\n"), ErrorKind::FormatMismatch);
  EXPECT_EQ(kind_of_parse("a,b\n1,zz\n"), ErrorKind::FormatMismatch);
  EXPECT_EQ(kind_of_parse("# kind=x\n"), ErrorKind::FormatMismatch);
  EXPECT_EQ(kind_of_parse("a\n1\n# late=1\n"), ErrorKind::FormatMismatch);
  std::istringstream in("a,b\n1,2\n3\n");
  try {
    io::read_csv(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Io, IncrementsRoundTripIsExact) {
  const ClassCSpec spec = ClassCSpec::with_identity(4, VolatilityProfile::design1(), 9);
  const IncrementMatrix incr = simulate_increments(spec, ObservationGrid::poisson(50, 3));
  const std::string text = io::increments_csv(incr);
  std::istringstream in(text);
  const IncrementMatrix back = io::parse_increments(io::read_csv(in));
  EXPECT_EQ(back.increments(), incr.increments());
  ASSERT_EQ(back.grid().times().size(), incr.grid().times().size());
  for (std::size_t k = 0; k < back.grid().times().size(); ++k) {
    EXPECT_EQ(back.grid().times()[k], incr.grid().times()[k]);
  }
  EXPECT_EQ(back.spec_digest(), incr.spec_digest());
  EXPECT_EQ(io::increments_csv(back), text);
}

TEST(Io, IncrementsRejectWrongKindAndShape) {
  const IncrementMatrix incr(Matrix::Ones(2, 2), ObservationGrid::equispaced(2), "d");
  std::string text = io::increments_csv(incr);
  std::string wrong_kind = text;
  wrong_kind.replace(wrong_kind.find("kind=increments"), 15, "kind=density");
  std::istringstream a(wrong_kind);
  EXPECT_THROW(io::parse_increments(io::read_csv(a)), Error);
  std::string wrong_n = text;
  wrong_n.replace(wrong_n.find("n=2"), 3, "n=3");
  std::istringstream b(wrong_n);
  EXPECT_THROW(io::parse_increments(io::read_csv(b)), Error);
}

TEST(Io, EigenvaluesAndDensityRoundTrip) {
  const SpectralDistribution esd({0.1, 0.2, 3.0, 3.0});
  std::istringstream e(io::eigenvalues_csv(esd, {{"n", "10"}}));
  const io::CsvTable table = io::read_csv(e);
  EXPECT_EQ(table.metadata.at("p"), "4");
  EXPECT_EQ(table.metadata.at("n"), "10");
  const SpectralDistribution back = io::parse_eigenvalues(table);
  EXPECT_TRUE(std::equal(back.eigenvalues().begin(), back.eigenvalues().end(), esd.eigenvalues().begin()));

  const DensityCurve curve({0.0, 0.5, 1.0}, {0.1, 0.9, 0.5}, 0.25);
  std::istringstream d(io::density_csv(curve, {}));
  const DensityCurve dback = io::parse_density(io::read_csv(d));
  EXPECT_EQ(dback.mass_at_zero(), 0.25);
  EXPECT_TRUE(std::equal(dback.ys().begin(), dback.ys().end(), curve.ys().begin()));
}

TEST(Io, PopulationSpectrumJson) {
  const PopulationSpectrum h({{0.4, 0.5}, {1.6, 0.5}});
  const PopulationSpectrum back = io::parse_population_spectrum(io::population_spectrum_json(h));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.atoms()[1].location, 1.6);
  EXPECT_EQ(back.atoms()[0].weight, 0.5);
  EXPECT_THROW(io::parse_population_spectrum("{"), Error);
  EXPECT_THROW(io::parse_population_spectrum("{\"atoms\": 3}"), Error);
  EXPECT_THROW(io::parse_population_spectrum("{\"atoms\": [{\"location\": 1}]}"), Error);
}

TEST(Io, FileErrorsNameThePath) {
  const auto dir = testutil::scratch_dir("io_errors");
  try {
    io::read_csv_file(dir / "missing.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
  std::ofstream(dir / "bad.csv") << "x\nnope\n";
  try {
    io::read_csv_file(dir / "bad.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FormatMismatch);
    EXPECT_NE(std::string(e.what()).find("bad.csv"), std::string::npos);
  }
}
