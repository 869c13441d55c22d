#include <gtest/gtest.h>

#include <cmath>

#include "ds2dp/metrics.hpp"
#include "ds2dp/solver.hpp"
#include "ds2dp/synth.hpp"
#include "oracles.hpp"

using namespace ds2dp;

namespace {

SolverConfig small_config(int rank = 2, int iterations = 5) {
  SolverConfig cfg;
  cfg.rank = rank;
  cfg.iterations = iterations;
  cfg.spatial = SpatialNetConfig::desk();
  cfg.spectral_code = 16;
  cfg.spectral_hidden = 16;
  return cfg;
}

Cube random_cube(Index i, Index j, Index k, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Cube c(i, j, k);
  for (Index n = 0; n < c.size(); ++n) c.data()[n] = rng.uniform(lo, hi);
  return c;
}

TEST(SoftThreshold, MatchesGridMinimizer) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const double r = rng.uniform(-2.0, 2.0);
    const double lambda = rng.uniform(0.0, 2.0);
    EXPECT_NEAR(soft_threshold(r, lambda / 2), oracle::grid_prox(r, lambda), 1e-4);
  }
}

TEST(SoftThreshold, EdgeCases) {
  EXPECT_EQ(soft_threshold(0.3, 0.0), 0.3);
  EXPECT_EQ(soft_threshold(-0.3, 0.3), 0.0);
  EXPECT_EQ(soft_threshold(-0.5, 0.2), -0.3);
  EXPECT_THROW(soft_threshold(1.0, -0.1), ContractError);
  EXPECT_THROW(soft_threshold(Cube(1, 1, 1), -0.1), ContractError);
}

// Shrinkage never flips sign and never grows magnitude.
TEST(SoftThreshold, ShrinksTowardZero) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const double x = rng.uniform(-3.0, 3.0), t = rng.uniform(0.0, 1.0);
    const double y = soft_threshold(x, t);
    EXPECT_LE(std::abs(y), std::abs(x));
    EXPECT_GE(x * y, 0.0);
    EXPECT_NEAR(std::abs(x - y), std::min(std::abs(x), t), 1e-15);
  }
}

TEST(UpdateOutliers, UsesHalfLambdaThreshold) {
  Cube x(1, 1, 3), recon(1, 1, 3);
  x.data() << 1.0, 0.02, -0.5;
  const Cube y = update_outliers(x, recon, 0.1);
  EXPECT_DOUBLE_EQ(y.data()[0], 0.95);
  EXPECT_EQ(y.data()[1], 0.0);
  EXPECT_DOUBLE_EQ(y.data()[2], -0.45);
  EXPECT_THROW(update_outliers(x, Cube(1, 1, 2), 0.1), ShapeError);
}

TEST(UpdateOutliers, NeverIncreasesLoss) {
  const SolverConfig cfg = small_config(2, 0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SolverState state = initialize(8, 8, 4, cfg);
    const Cube x = random_cube(8, 8, 4, seed);
    state.outliers = random_cube(8, 8, 4, seed + 100, -0.5, 0.5);
    const double before = loss(x, state, cfg.lambda);
    state.outliers = update_outliers(x, reconstruct(state), cfg.lambda);
    EXPECT_LE(loss(x, state, cfg.lambda), before + 1e-10);
  }
}

TEST(Loss, EqualsStatedObjective) {
  SolverConfig cfg = small_config(3, 0);
  SolverState state = initialize(8, 8, 5, cfg);
  const Cube x = random_cube(8, 8, 5, 7);
  state.outliers = random_cube(8, 8, 5, 8, -0.1, 0.1);
  const Factors f = current_factors(state);
  const Cube recon = oracle::naive_lmm(f.maps, f.signatures);
  long double expected = 0.0L;
  for (Index n = 0; n < x.size(); ++n) {
    const long double d = static_cast<long double>(x.data()[n]) - recon.data()[n] - state.outliers.data()[n];
    expected += d * d + 0.3L * std::abs(static_cast<long double>(state.outliers.data()[n]));
  }
  EXPECT_NEAR(loss(x, state, 0.3), static_cast<double>(expected), 1e-10);
  EXPECT_THROW(loss(Cube(8, 8, 4), state, 0.3), ShapeError);
}

TEST(Initialize, ProducesFeasibleFactors) {
  SolverState state = initialize(16, 8, 6, small_config(3, 0));
  const Factors f = current_factors(state);
  ASSERT_EQ(f.maps.size(), 3u);
  for (const auto &m : f.maps) {
    EXPECT_GE(m.minCoeff(), 0.0);
    EXPECT_LE(m.maxCoeff(), 1.0);
  }
  for (const auto &s : f.signatures) EXPECT_GE(s.minCoeff(), 0.0);
  EXPECT_EQ(squared_norm(state.outliers), 0.0);
}

TEST(Initialize, SharedVariantHasOneSpatialStore) {
  SolverConfig cfg = small_config(4, 0);
  cfg.share_spatial = true;
  const SolverState shared = initialize(8, 8, 3, cfg);
  cfg.share_spatial = false;
  const SolverState split = initialize(8, 8, 3, cfg);
  EXPECT_EQ(shared.spatial.size(), 1u);
  EXPECT_EQ(split.spatial.size(), 4u);
  EXPECT_LT(shared.param_count(), split.param_count());
}

TEST(Initialize, RejectsBadConfig) {
  SolverConfig cfg = small_config();
  cfg.rank = 0;
  EXPECT_THROW(initialize(8, 8, 3, cfg), ContractError);
  cfg = small_config();
  cfg.lambda = -1.0;
  EXPECT_THROW(initialize(8, 8, 3, cfg), ContractError);
  EXPECT_THROW(initialize(12, 8, 3, small_config()), ShapeError);
}

TEST(Gradients, MatchFiniteDifferencesOfObjective) {
  SolverConfig cfg = small_config(2, 0);
  cfg.spatial.down_channels = {3, 4, 4};
  cfg.spatial.up_channels = {2, 3, 3};
  SolverState state = initialize(8, 8, 3, cfg);
  const Cube x = random_cube(8, 8, 3, 4);
  state.outliers = random_cube(8, 8, 3, 5, -0.1, 0.1);
  accumulate_gradients(x, state);
  ad::Param &w = state.spectral[1].at("fc2.w");
  const ad::Vector analytic = w.grad;
  for (auto &s : state.spatial) s.zero_grad();
  for (auto &s : state.spectral) s.zero_grad();
  double worst = 0.0;
  for (Index n = 0; n < w.value.size(); ++n) {
    const double saved = w.value[n], h = 1e-6;
    w.value[n] = saved + h;
    const double plus = loss(x, state, cfg.lambda);
    w.value[n] = saved - h;
    const double minus = loss(x, state, cfg.lambda);
    w.value[n] = saved;
    worst = std::max(worst, std::abs((plus - minus) / (2 * h) - analytic[n]));
  }
  EXPECT_LT(worst / analytic.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Run, ZeroIterationsGivesEmptyTrace) {
  const Cube x = random_cube(8, 8, 3, 1);
  const DenoiseResult r = run(x, small_config(2, 0));
  EXPECT_TRUE(r.loss_trace.empty());
  EXPECT_EQ(r.denoised.size(), x.size());
  EXPECT_EQ(r.maps.size(), 2u);
}

TEST(Run, IsDeterministic) {
  const Cube x = random_cube(8, 8, 3, 1);
  const DenoiseResult a = run(x, small_config(2, 6));
  const DenoiseResult b = run(x, small_config(2, 6));
  EXPECT_TRUE(a.denoised == b.denoised);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(Run, OutputIsLinearMixtureOfReturnedFactors) {
  const Cube x = scale(random_cube(8, 8, 4, 3), 5.0);
  const DenoiseResult r = run(x, small_config(3, 4));
  const Cube again = oracle::naive_lmm(r.maps, r.signatures);
  EXPECT_LT((again.data() - r.denoised.data()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GE(r.denoised.data().minCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(r.scale, x.data().maxCoeff());
}

TEST(Run, LossDecreasesOnCleanLowRankData) {
  SynthSpec spec;
  spec.rows = spec.cols = 16;
  spec.bands = 8;
  const SynthCube s = make_lmm_cube(spec);
  SolverConfig cfg = small_config(3, 60);
  cfg.adam.lr = 0.01;
  const DenoiseResult r = run(s.cube, cfg);
  EXPECT_LT(r.loss_trace.back(), 0.5 * r.loss_trace.front());
}

TEST(Run, ZeroLambdaKeepsOutliersZero) {
  const Cube x = random_cube(8, 8, 3, 1);
  SolverConfig cfg = small_config(2, 3);
  cfg.lambda = 0.0;
  EXPECT_EQ(squared_norm(run(x, cfg).outliers), 0.0);
  cfg.lambda = 0.01;
  cfg.sparse_outliers = false;
  EXPECT_EQ(squared_norm(run(x, cfg).outliers), 0.0);
}

TEST(Run, OutliersAreSoftThresholdedResidual) {
  const Cube x = random_cube(8, 8, 3, 9);
  SolverConfig cfg = small_config(2, 3);
  cfg.lambda = 0.2;
  const DenoiseResult r = run(x, cfg);
  // Every nonzero outlier is at least lambda/2 (working scale) away from the residual.
  for (Index n = 0; n < x.size(); ++n) {
    const double y = r.outliers.data()[n];
    if (y == 0.0) continue;
    EXPECT_NEAR(std::abs(x.data()[n] - r.denoised.data()[n] - y), 0.1 * r.scale, 1e-9);
  }
}

TEST(Run, ReferenceEnablesPsnrTrace) {
  const Cube x = random_cube(8, 8, 3, 1);
  RunOptions opts;
  opts.reference = &x;
  int calls = 0;
  opts.progress = [&](const Progress &p) {
    ++calls;
    EXPECT_TRUE(p.mpsnr.has_value());
  };
  SolverConfig cfg = small_config(2, 4);
  cfg.snapshot_stride = 2;
  const DenoiseResult r = run(x, cfg, opts);
  EXPECT_EQ(r.psnr_trace.size(), 4u);
  EXPECT_EQ(calls, 2);
  const Cube wrong(8, 8, 2);
  opts.reference = &wrong;
  EXPECT_THROW(run(x, cfg, opts), ShapeError);
}

TEST(Run, DivergenceIsReportedWithTrace) {
  const Cube x = random_cube(8, 8, 3, 1);
  SolverConfig cfg = small_config(2, 50);
  cfg.spectral_prior = SpectralPrior::free;
  cfg.sparse_outliers = false; // no outlier block to absorb the overshoot
  cfg.lambda = 0.0;
  cfg.adam.lr = 1e6;
  cfg.divergence_factor = 1.0;
  try {
    run(x, cfg);
    FAIL() << "expected divergence";
  } catch (const SolverDivergence &e) {
    EXPECT_LT(e.trace().size(), 50u);
  }
}

TEST(Run, FreePriorsRunToCompletion) {
  const Cube x = random_cube(8, 8, 3, 1);
  SolverConfig cfg = small_config(2, 5);
  cfg.spatial_prior = SpatialPrior::free;
  cfg.spectral_prior = SpectralPrior::free;
  const DenoiseResult r = run(x, cfg);
  EXPECT_TRUE(r.denoised.data().allFinite());
  EXPECT_EQ(r.param_count, 2 * (64 + 3));
}

} // namespace
