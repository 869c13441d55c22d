#pragma once

#include <cstdint>
#include <vector>

#include "ds2dp/tensor.hpp"

namespace ds2dp {

struct IntRange {
  Index lo = 0;
  Index hi = 0;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Corruption scenario. Cases:
///   1 Gaussian
///   2 Gaussian + impulse (Laplacian)
///   3 case 2 + deadlines
///   4 case 2 + diagonal stripes
///   5 case 2 + vertical stripes
///   6 case 2 + deadlines + diagonal stripes + vertical stripes
struct NoiseSpec {
  int case_id = 1;
  double gaussian_variance = 0.1;
  double laplace_density = 0.1; ///< Laplace scale parameter b
  double affected_band_fraction = 0.3;
  IntRange deadline_count{10, 15};
  IntRange deadline_width{1, 3};
  IntRange diag_stripe_count{15, 30};
  IntRange vert_stripe_count{10, 15};
  RealRange vert_stripe_value{0.6, 0.8};
  std::uint64_t seed = 0;

  void validate() const;
};

/// 1 where a structured corruption overwrote the entry.
using Mask = CubeT<std::uint8_t>;

struct BandEvent {
  Index band = 0;
  Index count = 0; ///< deadlines or stripes placed in this band
};

struct NoiseTrace {
  std::vector<BandEvent> deadlines;
  std::vector<BandEvent> diagonal;
  std::vector<BandEvent> vertical;
  std::vector<double> stripe_values; ///< one per vertical stripe, in placement order
};

enum class NoiseComponent : std::uint64_t { deadlines = 1, diagonal, vertical, gaussian, impulse };

/// Seed used for one component inside corrupt().
std::uint64_t component_seed(std::uint64_t seed, NoiseComponent component);

Cube add_gaussian(const Cube &c, double variance, std::uint64_t seed);
Cube add_impulse(const Cube &c, double density, std::uint64_t seed);

// Structured corruptions. Each band is affected independently with probability
// spec.affected_band_fraction. Mask and trace are optional outputs; a mask must already
// have the cube's shape.
Cube add_deadlines(const Cube &c, const NoiseSpec &spec, std::uint64_t seed, Mask *mask = nullptr,
                   NoiseTrace *trace = nullptr);
Cube add_diag_stripes(const Cube &c, const NoiseSpec &spec, std::uint64_t seed,
                      Mask *mask = nullptr, NoiseTrace *trace = nullptr);
Cube add_vert_stripes(const Cube &c, const NoiseSpec &spec, std::uint64_t seed,
                      Mask *mask = nullptr, NoiseTrace *trace = nullptr);

/// Overwrites band k along the diagonal j - i = offset.
void paint_diagonal(Cube &c, Index band, Index offset, double value, Mask *mask = nullptr);
/// Overwrites columns [col, col + width) of band k, clipped to the image.
void paint_columns(Cube &c, Index band, Index col, Index width, double value, Mask *mask = nullptr);

struct Corruption {
  Cube cube;
  Mask mask;
  NoiseTrace trace;
};

/// Applies the case's components in the order deadlines, diagonal stripes, vertical
/// stripes, Gaussian, impulse.
Corruption corrupt(const Cube &c, const NoiseSpec &spec);

} // namespace ds2dp
