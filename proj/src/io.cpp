#include "ds2dp/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ds2dp/format.hpp"

namespace ds2dp::io {

namespace {

template <typename UInt> void put_le(std::ostream &out, UInt value) {
  char bytes[sizeof(UInt)];
  for (std::size_t b = 0; b < sizeof(UInt); ++b)
    bytes[b] = static_cast<char>((value >> (8 * b)) & 0xFF);
  out.write(bytes, sizeof(UInt));
}

template <typename UInt> UInt get_le(std::istream &in, const char *field) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char *>(bytes), sizeof(UInt)))
    throw ParseError(std::string("cube file truncated while reading ") + field);
  UInt value = 0;
  for (std::size_t b = 0; b < sizeof(UInt); ++b) value |= static_cast<UInt>(bytes[b]) << (8 * b);
  return value;
}

std::ofstream open_out(const std::filesystem::path &path, std::ios::openmode mode = {}) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::out | std::ios::trunc | mode);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path &path, std::ios::openmode mode = {}) {
  std::ifstream in(path, std::ios::in | mode);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::vector<std::string> split(const std::string &line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, sep)) out.push_back(field);
  return out;
}

double parse_field(const std::string &text, int line) {
  const auto v = parse_double(text);
  if (!v) throw ParseError("expected a number, got '" + text + "'", line);
  return *v;
}

} // namespace

void write_cube(std::ostream &out, const Cube &cube) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (cube.rows() > kMax || cube.cols() > kMax || cube.bands() > kMax)
    throw ShapeError("cube dimensions exceed the file format's 32-bit range");
  out.write(kCubeMagic, 4);
  put_le<std::uint16_t>(out, kCubeVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cube.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cube.cols()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cube.bands()));
  put_le<std::uint16_t>(out, kDtypeFloat32);
  for (Index n = 0; n < cube.size(); ++n)
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(cube.data()[n])));
  if (!out) throw IoError("failed writing cube payload");
}

Cube read_cube(std::istream &in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCubeMagic))
    throw ParseError("not a cube file (bad magic)");
  const auto version = get_le<std::uint16_t>(in, "version");
  if (version != kCubeVersion) throw ParseError("unsupported cube version " + std::to_string(version));
  const Index rows = get_le<std::uint32_t>(in, "I");
  const Index cols = get_le<std::uint32_t>(in, "J");
  const Index bands = get_le<std::uint32_t>(in, "K");
  const auto dtype = get_le<std::uint16_t>(in, "dtype");
  if (dtype != kDtypeFloat32) throw ParseError("unsupported dtype tag " + std::to_string(dtype));
  Cube cube(rows, cols, bands);
  for (Index n = 0; n < cube.size(); ++n)
    cube.data()[n] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in, "payload")));
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after cube payload");
  return cube;
}

void save_cube(const std::filesystem::path &path, const Cube &cube) {
  auto out = open_out(path, std::ios::binary);
  write_cube(out, cube);
}

Cube load_cube(const std::filesystem::path &path) {
  auto in = open_in(path, std::ios::binary);
  try {
    return read_cube(in);
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_mask(const std::filesystem::path &path, const Mask &mask) {
  save_cube(path, mask.cast<double>());
}

Mask load_mask(const std::filesystem::path &path) {
  const Cube c = load_cube(path);
  Mask mask(c.rows(), c.cols(), c.bands());
  for (Index n = 0; n < c.size(); ++n) {
    const double v = c.data()[n];
    if (v != 0.0 && v != 1.0) throw ParseError(path.string() + ": mask entries must be 0 or 1");
    mask.data()[n] = static_cast<std::uint8_t>(v);
  }
  return mask;
}

std::vector<std::uint8_t> band_to_gray(const Cube &cube, Index band) {
  if (band < 0 || band >= cube.bands())
    throw ContractError("band " + std::to_string(band) + " out of range [0, " +
                        std::to_string(cube.bands()) + ")");
  const auto slab = cube.band(band);
  const double lo = slab.minCoeff();
  const double hi = slab.maxCoeff();
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(cube.pixels()), 0);
  if (!(hi > lo)) return gray;
  for (Index i = 0; i < cube.rows(); ++i)
    for (Index j = 0; j < cube.cols(); ++j)
      gray[static_cast<std::size_t>(i * cube.cols() + j)] =
          static_cast<std::uint8_t>(std::lround(255.0 * (slab(i, j) - lo) / (hi - lo)));
  return gray;
}

void export_band(const Cube &cube, Index band, const std::filesystem::path &path) {
  const auto gray = band_to_gray(cube, band);
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << cube.cols() << ' ' << cube.rows() << "\n255\n";
  out.write(reinterpret_cast<const char *>(gray.data()), static_cast<std::streamsize>(gray.size()));
}

void export_spectrum(const Cube &cube, Index row, Index col, const std::filesystem::path &path) {
  if (row < 0 || row >= cube.rows() || col < 0 || col >= cube.cols())
    throw ContractError("pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                        ") out of range");
  auto out = open_out(path);
  out << "band,value\n";
  for (Index k = 0; k < cube.bands(); ++k) out << k << ',' << format_double(cube(row, col, k)) << '\n';
}

std::vector<double> read_spectrum_csv(const std::filesystem::path &path) {
  auto in = open_in(path);
  std::string line;
  std::vector<double> values;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2) throw ParseError("expected 'band,value'", number);
    values.push_back(parse_field(fields[1], number));
  }
  return values;
}

void save_signatures(const std::filesystem::path &path, const std::vector<Signature> &signatures) {
  auto out = open_out(path);
  out << "band";
  for (std::size_t r = 0; r < signatures.size(); ++r) out << ",endmember" << r;
  out << '\n';
  const Index bands = signatures.empty() ? 0 : signatures.front().size();
  for (Index k = 0; k < bands; ++k) {
    out << k;
    for (const auto &s : signatures) out << ',' << format_double(s[k]);
    out << '\n';
  }
}

std::vector<Signature> load_signatures(const std::filesystem::path &path) {
  auto in = open_in(path);
  std::string line;
  std::vector<std::vector<double>> columns;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (number == 1) {
      columns.resize(fields.size() > 0 ? fields.size() - 1 : 0);
      continue;
    }
    if (fields.size() != columns.size() + 1) throw ParseError("ragged signature row", number);
    for (std::size_t r = 0; r < columns.size(); ++r) columns[r].push_back(parse_field(fields[r + 1], number));
  }
  std::vector<Signature> out;
  for (const auto &c : columns) out.push_back(Eigen::Map<const Signature>(c.data(), static_cast<Index>(c.size())));
  return out;
}

void save_abundances(const std::filesystem::path &path, const std::vector<AbundanceMap> &maps) {
  if (maps.empty()) throw ContractError("no abundance maps to save");
  Cube stacked(maps.front().rows(), maps.front().cols(), static_cast<Index>(maps.size()));
  for (std::size_t r = 0; r < maps.size(); ++r) stacked.band(static_cast<Index>(r)) = maps[r];
  save_cube(path, stacked);
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  auto out = open_out(path, std::ios::binary);
  out << text;
}

std::string read_text(const std::filesystem::path &path) {
  auto in = open_in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

} // namespace ds2dp::io
