#include "ds2dp/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ds2dp/random.hpp"

namespace ds2dp {

namespace {

void check_range(const IntRange &r, const char *name, Index min_lo) {
  if (r.lo < min_lo || r.hi < r.lo)
    throw ContractError(std::string(name) + " range must satisfy " + std::to_string(min_lo) +
                        " <= lo <= hi");
}

void check_mask(const Cube &c, const Mask *mask) {
  if (mask != nullptr && (mask->rows() != c.rows() || mask->cols() != c.cols() ||
                          mask->bands() != c.bands()))
    throw ShapeError("mask shape does not match cube");
}

// k distinct values from [0, n), in draw order (partial Fisher-Yates).
std::vector<Index> sample_distinct(Index n, Index k, Rng &rng) {
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  k = std::min(k, n);
  for (Index i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.integer(i, n - 1));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

// Per-band Bernoulli selection followed by a per-band placement callback.
template <typename Place>
Cube structured(const Cube &c, const NoiseSpec &spec, std::uint64_t seed, Mask *mask,
                std::vector<BandEvent> *events, Place place) {
  spec.validate();
  check_mask(c, mask);
  Cube out = c;
  Rng rng(seed);
  for (Index k = 0; k < c.bands(); ++k) {
    if (!rng.bernoulli(spec.affected_band_fraction)) continue;
    const Index placed = place(out, k, rng);
    if (events != nullptr) events->push_back({k, placed});
  }
  return out;
}

} // namespace

void NoiseSpec::validate() const {
  if (case_id < 1 || case_id > 6)
    throw ContractError("case must be between 1 and 6, got " + std::to_string(case_id));
  if (!(gaussian_variance >= 0.0)) throw ContractError("gaussian_variance must be >= 0");
  if (!(laplace_density > 0.0)) throw ContractError("laplace_density must be > 0");
  if (!(affected_band_fraction >= 0.0 && affected_band_fraction <= 1.0))
    throw ContractError("affected_band_fraction must lie in [0, 1]");
  check_range(deadline_count, "deadline_count", 0);
  check_range(deadline_width, "deadline_width", 1);
  check_range(diag_stripe_count, "diag_stripe_count", 0);
  check_range(vert_stripe_count, "vert_stripe_count", 0);
  if (!(vert_stripe_value.lo <= vert_stripe_value.hi))
    throw ContractError("vert_stripe_value range must satisfy lo <= hi");
}

std::uint64_t component_seed(std::uint64_t seed, NoiseComponent component) {
  return mix_seed(seed, static_cast<std::uint64_t>(component));
}

Cube add_gaussian(const Cube &c, double variance, std::uint64_t seed) {
  if (!(variance >= 0.0)) throw ContractError("add_gaussian: variance must be >= 0");
  Cube out = c;
  if (variance == 0.0) return out;
  const double sd = std::sqrt(variance);
  Rng rng(seed);
  for (Index n = 0; n < out.size(); ++n) out.data()[n] += sd * rng.normal();
  return out;
}

Cube add_impulse(const Cube &c, double density, std::uint64_t seed) {
  if (!(density > 0.0)) throw ContractError("add_impulse: density must be > 0");
  Cube out = c;
  Rng rng(seed);
  for (Index n = 0; n < out.size(); ++n) out.data()[n] += rng.laplace(density);
  return out;
}

void paint_diagonal(Cube &c, Index band, Index offset, double value, Mask *mask) {
  check_mask(c, mask);
  for (Index i = 0; i < c.rows(); ++i) {
    const Index j = i + offset;
    if (j < 0 || j >= c.cols()) continue;
    c(i, j, band) = value;
    if (mask != nullptr) (*mask)(i, j, band) = 1;
  }
}

void paint_columns(Cube &c, Index band, Index col, Index width, double value, Mask *mask) {
  check_mask(c, mask);
  const Index end = std::min(col + width, c.cols());
  for (Index j = std::max<Index>(col, 0); j < end; ++j)
    for (Index i = 0; i < c.rows(); ++i) {
      c(i, j, band) = value;
      if (mask != nullptr) (*mask)(i, j, band) = 1;
    }
}

Cube add_deadlines(const Cube &c, const NoiseSpec &spec, std::uint64_t seed, Mask *mask,
                   NoiseTrace *trace) {
  return structured(c, spec, seed, mask, trace ? &trace->deadlines : nullptr,
                    [&](Cube &out, Index k, Rng &rng) {
                      const Index count = rng.integer(spec.deadline_count.lo, spec.deadline_count.hi);
                      const auto starts = sample_distinct(out.cols(), count, rng);
                      for (const Index start : starts) {
                        const Index width = rng.integer(spec.deadline_width.lo, spec.deadline_width.hi);
                        paint_columns(out, k, start, width, 0.0, mask);
                      }
                      return static_cast<Index>(starts.size());
                    });
}

Cube add_diag_stripes(const Cube &c, const NoiseSpec &spec, std::uint64_t seed, Mask *mask,
                      NoiseTrace *trace) {
  return structured(c, spec, seed, mask, trace ? &trace->diagonal : nullptr,
                    [&](Cube &out, Index k, Rng &rng) {
                      const Index count =
                          rng.integer(spec.diag_stripe_count.lo, spec.diag_stripe_count.hi);
                      // Offsets j - i range over [-(I-1), J-1].
                      const auto picks = sample_distinct(out.rows() + out.cols() - 1, count, rng);
                      for (const Index p : picks) paint_diagonal(out, k, p - (out.rows() - 1), 1.0, mask);
                      return static_cast<Index>(picks.size());
                    });
}

Cube add_vert_stripes(const Cube &c, const NoiseSpec &spec, std::uint64_t seed, Mask *mask,
                      NoiseTrace *trace) {
  return structured(c, spec, seed, mask, trace ? &trace->vertical : nullptr,
                    [&](Cube &out, Index k, Rng &rng) {
                      const Index count =
                          rng.integer(spec.vert_stripe_count.lo, spec.vert_stripe_count.hi);
                      const auto cols = sample_distinct(out.cols(), count, rng);
                      for (const Index col : cols) {
                        const double value =
                            rng.uniform(spec.vert_stripe_value.lo, spec.vert_stripe_value.hi);
                        if (trace != nullptr) trace->stripe_values.push_back(value);
                        paint_columns(out, k, col, 1, value, mask);
                      }
                      return static_cast<Index>(cols.size());
                    });
}

Corruption corrupt(const Cube &c, const NoiseSpec &spec) {
  spec.validate();
  Corruption out;
  out.mask = Mask(c.rows(), c.cols(), c.bands());
  out.cube = c;
  const int id = spec.case_id;
  if (id == 3 || id == 6)
    out.cube = add_deadlines(out.cube, spec, component_seed(spec.seed, NoiseComponent::deadlines),
                             &out.mask, &out.trace);
  if (id == 4 || id == 6)
    out.cube = add_diag_stripes(out.cube, spec, component_seed(spec.seed, NoiseComponent::diagonal),
                                &out.mask, &out.trace);
  if (id == 5 || id == 6)
    out.cube = add_vert_stripes(out.cube, spec, component_seed(spec.seed, NoiseComponent::vertical),
                                &out.mask, &out.trace);
  out.cube = add_gaussian(out.cube, spec.gaussian_variance,
                          component_seed(spec.seed, NoiseComponent::gaussian));
  if (id >= 2)
    out.cube = add_impulse(out.cube, spec.laplace_density,
                           component_seed(spec.seed, NoiseComponent::impulse));
  return out;
}

} // namespace ds2dp
