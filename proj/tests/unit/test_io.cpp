#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ds2dp/io.hpp"
#include "ds2dp/random.hpp"

using namespace ds2dp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / "ds2dp_io_test";
  fs::create_directories(dir);
  return dir / name;
}

Cube float_cube(Index i, Index j, Index k, std::uint64_t seed) {
  Rng rng(seed);
  Cube c(i, j, k);
  for (Index n = 0; n < c.size(); ++n) c.data()[n] = static_cast<float>(rng.uniform(-2.0, 2.0));
  return c;
}

TEST(CubeFile, RoundTripIsBitExact) {
  const Cube c = float_cube(5, 7, 3, 1);
  io::save_cube(scratch("a.hsc"), c);
  const Cube back = io::load_cube(scratch("a.hsc"));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(fs::file_size(scratch("a.hsc")), io::kCubeHeaderBytes + 4u * 5 * 7 * 3);
}

TEST(CubeFile, HeaderLayout) {
  Cube c(2, 3, 4);
  c(0, 0, 0) = 1.0f;
  std::ostringstream out;
  io::write_cube(out, c);
  const std::string bytes = out.str();
  ASSERT_EQ(bytes.size(), 20u + 4u * 24);
  EXPECT_EQ(bytes.substr(0, 4), "HSC1");
  auto u16 = [&](std::size_t at) {
    return static_cast<unsigned>(static_cast<unsigned char>(bytes[at])) |
           static_cast<unsigned>(static_cast<unsigned char>(bytes[at + 1])) << 8;
  };
  EXPECT_EQ(u16(4), 1u);
  EXPECT_EQ(u16(6), 2u);
  EXPECT_EQ(u16(10), 3u);
  EXPECT_EQ(u16(14), 4u);
  EXPECT_EQ(u16(18), 1u);
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 20, 4); // little-endian host
  EXPECT_EQ(first, 1.0f);
}

TEST(CubeFile, RejectsCorruptInput) {
  std::istringstream bad_magic(std::string("XXXX") + std::string(16, '\0'));
  EXPECT_THROW(io::read_cube(bad_magic), ParseError);

  std::ostringstream out;
  io::write_cube(out, Cube(2, 2, 2));
  const std::string bytes = out.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(io::read_cube(truncated), ParseError);
  std::istringstream trailing(bytes + "x");
  EXPECT_THROW(io::read_cube(trailing), ParseError);

  std::string wrong_dtype = bytes;
  wrong_dtype[18] = 2;
  std::istringstream dtype(wrong_dtype);
  EXPECT_THROW(io::read_cube(dtype), ParseError);
}

TEST(CubeFile, MissingFileIsIoError) {
  EXPECT_THROW(io::load_cube(scratch("does_not_exist.hsc")), IoError);
}

TEST(MaskFile, RoundTrip) {
  Mask m(3, 3, 2);
  m(1, 2, 1) = 1;
  io::save_mask(scratch("m.hsc"), m);
  EXPECT_TRUE(io::load_mask(scratch("m.hsc")) == m);
  io::save_cube(scratch("notmask.hsc"), Cube::Constant(1, 1, 1, 0.5));
  EXPECT_THROW(io::load_mask(scratch("notmask.hsc")), ParseError);
}

TEST(ExportBand, LinearMapToGray) {
  Cube c(2, 2, 1);
  c.data() << 1.0, 2.0, 3.0, 5.0;
  const auto gray = io::band_to_gray(c, 0);
  EXPECT_EQ(gray, (std::vector<std::uint8_t>{0, 64, 128, 255}));
}

TEST(ExportBand, ConstantBandGivesConstantImage) {
  const auto gray = io::band_to_gray(Cube::Constant(3, 4, 2, 0.7), 1);
  EXPECT_TRUE(std::all_of(gray.begin(), gray.end(), [&](auto g) { return g == gray.front(); }));
}

TEST(ExportBand, WritesPgm) {
  const Cube c = float_cube(4, 6, 2, 3);
  io::export_band(c, 1, scratch("b.pgm"));
  std::ifstream in(scratch("b.pgm"), std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(w, 6);
  EXPECT_EQ(h, 4);
  EXPECT_EQ(maxval, 255);
  EXPECT_EQ(fs::file_size(scratch("b.pgm")), std::string("P5\n6 4\n255\n").size() + 24);
}

TEST(ExportBand, OutOfRangeThrows) {
  EXPECT_THROW(io::band_to_gray(Cube(2, 2, 2), 2), ContractError);
  EXPECT_THROW(io::band_to_gray(Cube(2, 2, 2), -1), ContractError);
}

TEST(ExportSpectrum, CsvParsesBackToCubeValues) {
  Rng rng(4);
  Cube c(3, 3, 9);
  for (Index n = 0; n < c.size(); ++n) c.data()[n] = rng.uniform();
  io::export_spectrum(c, 2, 1, scratch("s.csv"));
  const auto values = io::read_spectrum_csv(scratch("s.csv"));
  ASSERT_EQ(values.size(), 9u);
  for (Index k = 0; k < 9; ++k) EXPECT_EQ(values[static_cast<std::size_t>(k)], c(2, 1, k));
  EXPECT_THROW(io::export_spectrum(c, 3, 0, scratch("s.csv")), ContractError);
}

TEST(Signatures, CsvRoundTrip) {
  std::vector<Signature> sigs{Signature::LinSpaced(5, 0.1, 0.9), Signature::Constant(5, 0.3)};
  io::save_signatures(scratch("sig.csv"), sigs);
  const auto back = io::load_signatures(scratch("sig.csv"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[0] == sigs[0]);
  EXPECT_TRUE(back[1] == sigs[1]);
}

TEST(Signatures, ParseErrorsCarryLineNumbers) {
  io::write_text(scratch("bad.csv"), "band,endmember0\n0,0.5\n1,abc\n");
  try {
    io::load_signatures(scratch("bad.csv"));
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Abundances, StackedAsCube) {
  std::vector<AbundanceMap> maps{AbundanceMap::Constant(2, 3, 0.25), AbundanceMap::Constant(2, 3, 0.5)};
  io::save_abundances(scratch("ab.hsc"), maps);
  const Cube c = io::load_cube(scratch("ab.hsc"));
  EXPECT_EQ(c.bands(), 2);
  EXPECT_EQ(c(1, 2, 1), 0.5);
}

} // namespace
