#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ds2dp/tensor.hpp"

namespace ds2dp {

/// Ground-truth linear-mixture cube with known factors.
///
/// Abundance maps are Gaussian-filtered white noise rescaled to [0, 1]; signatures are
/// sums of Gaussian bumps over a small positive floor. The maps are finally divided by
/// the peak of the mixture so the cube's maximum is 1. An infinite smoothness scale
/// yields constant factors.
struct SynthSpec {
  Index rows = 32;
  Index cols = 32;
  Index bands = 16;
  int rank = 3;
  double spatial_scale = 3.0;  ///< Gaussian filter sigma for the maps, in pixels
  double spectral_scale = 2.0; ///< bump width for the signatures, in bands
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthCube {
  Cube cube;
  std::vector<AbundanceMap> maps;
  std::vector<Signature> signatures;
};

SynthCube make_lmm_cube(const SynthSpec &spec);

} // namespace ds2dp
