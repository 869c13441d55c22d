#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ds2dp/noise.hpp"
#include "ds2dp/tensor.hpp"

namespace ds2dp::io {

/// Binary cube container:
///
///   offset  size  field
///   0       4     magic "HSC1"
///   4       2     version (u16, currently 1)
///   6       4     I (u32)
///   10      4     J (u32)
///   14      4     K (u32)
///   18      2     dtype tag (u16, 1 = float32)
///   20      ...   I*J*K float32 values, band-major
///
/// All integers and floats are little-endian. Values are stored in single precision, so
/// load(save(c)) reproduces c exactly whenever every entry of c is representable as a float.
inline constexpr char kCubeMagic[4] = {'H', 'S', 'C', '1'};
inline constexpr std::uint16_t kCubeVersion = 1;
inline constexpr std::uint16_t kDtypeFloat32 = 1;
inline constexpr std::size_t kCubeHeaderBytes = 20;

void write_cube(std::ostream &out, const Cube &cube);
Cube read_cube(std::istream &in);
void save_cube(const std::filesystem::path &path, const Cube &cube);
Cube load_cube(const std::filesystem::path &path);

/// Masks use the cube container with 0/1 values.
void save_mask(const std::filesystem::path &path, const Mask &mask);
Mask load_mask(const std::filesystem::path &path);

/// Band k as an 8-bit binary PGM, linearly mapping the band's [min, max] to [0, 255].
/// A constant band maps to 0 everywhere.
void export_band(const Cube &cube, Index band, const std::filesystem::path &path);
std::vector<std::uint8_t> band_to_gray(const Cube &cube, Index band);

/// "band,value" CSV of the spectrum at pixel (i, j).
void export_spectrum(const Cube &cube, Index row, Index col, const std::filesystem::path &path);
std::vector<double> read_spectrum_csv(const std::filesystem::path &path);

/// Signatures as CSV: one row per band, one column per endmember.
void save_signatures(const std::filesystem::path &path, const std::vector<Signature> &signatures);
std::vector<Signature> load_signatures(const std::filesystem::path &path);

/// Abundance maps stacked as an I x J x R cube.
void save_abundances(const std::filesystem::path &path, const std::vector<AbundanceMap> &maps);

void write_text(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

} // namespace ds2dp::io
