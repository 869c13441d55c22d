#include "ds2dp/synth.hpp"

#include <algorithm>
#include <cmath>

#include "ds2dp/random.hpp"

namespace ds2dp {

namespace {

Eigen::VectorXd gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Eigen::VectorXd k(2 * radius + 1);
  for (int n = -radius; n <= radius; ++n) k[n + radius] = std::exp(-0.5 * (n / sigma) * (n / sigma));
  return k / k.sum();
}

// Separable blur with clamp-to-edge boundaries.
AbundanceMap blur(const AbundanceMap &img, double sigma) {
  const Eigen::VectorXd k = gaussian_kernel(sigma);
  const Index radius = (k.size() - 1) / 2;
  const Index rows = img.rows(), cols = img.cols();
  AbundanceMap tmp(rows, cols), out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (Index t = -radius; t <= radius; ++t)
        acc += k[t + radius] * img(i, std::clamp<Index>(j + t, 0, cols - 1));
      tmp(i, j) = acc;
    }
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (Index t = -radius; t <= radius; ++t)
        acc += k[t + radius] * tmp(std::clamp<Index>(i + t, 0, rows - 1), j);
      out(i, j) = acc;
    }
  return out;
}

AbundanceMap smooth_field(Index rows, Index cols, double sigma, Rng &rng) {
  if (std::isinf(sigma)) return AbundanceMap::Ones(rows, cols);
  AbundanceMap noise(rows, cols);
  for (Index n = 0; n < noise.size(); ++n) noise.data()[n] = rng.normal();
  AbundanceMap field = blur(noise, sigma);
  const double lo = field.minCoeff();
  const double hi = field.maxCoeff();
  if (hi - lo <= 0.0) return AbundanceMap::Ones(rows, cols);
  return (field.array() - lo) / (hi - lo);
}

Signature bump_spectrum(Index bands, double width, Rng &rng) {
  if (std::isinf(width)) return Signature::Ones(bands);
  constexpr int kBumps = 3;
  constexpr double kFloor = 0.05;
  Signature s = Signature::Constant(bands, kFloor);
  for (int b = 0; b < kBumps; ++b) {
    const double center = rng.uniform(0.0, static_cast<double>(bands - 1));
    const double spread = width * rng.uniform(1.0, 2.5);
    const double height = rng.uniform(0.3, 1.0);
    for (Index k = 0; k < bands; ++k) {
      const double u = (static_cast<double>(k) - center) / spread;
      s[k] += height * std::exp(-0.5 * u * u);
    }
  }
  return s;
}

} // namespace

void SynthSpec::validate() const {
  if (rows <= 0 || cols <= 0 || bands <= 0) throw ContractError("synthetic cube dims must be positive");
  if (rank < 1 || rank > bands || rank > rows * cols)
    throw ContractError("synthetic rank must lie in [1, min(K, I*J)]");
  if (!(spatial_scale > 0.0) || !(spectral_scale > 0.0))
    throw ContractError("smoothness scales must be positive");
}

SynthCube make_lmm_cube(const SynthSpec &spec) {
  spec.validate();
  Rng rng(spec.seed);
  SynthCube out;
  for (int r = 0; r < spec.rank; ++r) {
    out.maps.push_back(smooth_field(spec.rows, spec.cols, spec.spatial_scale, rng));
    out.signatures.push_back(bump_spectrum(spec.bands, spec.spectral_scale, rng));
  }
  const Cube raw = outer_accumulate<double>(std::span<const AbundanceMap>(out.maps),
                                            std::span<const Signature>(out.signatures),
                                            spec.rows, spec.cols, spec.bands);
  const double peak = raw.data().maxCoeff();
  if (peak > 0.0)
    for (auto &m : out.maps) m /= peak;
  out.cube = outer_accumulate<double>(std::span<const AbundanceMap>(out.maps),
                                      std::span<const Signature>(out.signatures), spec.rows,
                                      spec.cols, spec.bands);
  return out;
}

} // namespace ds2dp
