#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ds2dp/autodiff.hpp"
#include "ds2dp/generators.hpp"
#include "ds2dp/tensor.hpp"

namespace ds2dp {

enum class SpatialPrior { network, free };
enum class SpectralPrior { network, free };

struct SolverConfig {
  int rank = 5;            ///< number of endmembers R
  double lambda = 0.01;    ///< weight of the L1 outlier term
  int iterations = 1000;   ///< T
  ad::AdamOptions adam;
  std::uint64_t seed = 0;
  SpatialNetConfig spatial = SpatialNetConfig::reference();
  int spectral_code = 64;  ///< N_s
  int spectral_hidden = 128;
  bool share_spatial = false;  ///< one hourglass trunk with R heads
  SpatialPrior spatial_prior = SpatialPrior::network;
  SpectralPrior spectral_prior = SpectralPrior::network;
  /// When false the outlier tensor stays zero and the L1 term is dropped. A zero
  /// lambda implies the same, since an unpenalized Y would absorb the whole residual.
  bool sparse_outliers = true;
  int snapshot_stride = 1;     ///< progress callback period, in iterations
  bool normalize_input = true; ///< divide the input by its maximum before solving
  double divergence_factor = 100.0;

  void validate() const;
  bool outliers_active() const { return sparse_outliers && lambda > 0.0; }
};

/// Networks, fixed inputs and the outlier tensor for one problem instance. All values
/// live on the solver's working scale (the normalized input).
struct SolverState {
  SolverConfig config;
  Index rows = 0, cols = 0, bands = 0;
  std::vector<ad::ParamStore> spatial;  ///< R stores, or one shared store with R heads
  std::vector<ad::ParamStore> spectral; ///< R stores
  std::vector<LatentInput> latents;     ///< per endmember; the shared trunk reads latents[0]
  Cube outliers;
  int iteration = 0;
  std::vector<double> loss_history;

  Index param_count() const;
};

struct Factors {
  std::vector<AbundanceMap> maps;
  std::vector<Signature> signatures;
};

struct DenoiseResult {
  Cube denoised;
  Cube outliers;
  std::vector<double> loss_trace;
  std::vector<double> psnr_trace; ///< MPSNR against the reference, when one was given
  std::vector<AbundanceMap> maps;
  std::vector<Signature> signatures;
  double scale = 1.0; ///< input normalization factor
  Index param_count = 0;
};

struct Progress {
  int iteration = 0;
  double loss = 0.0;
  std::optional<double> mpsnr;
};

using ProgressCallback = std::function<void(const Progress &)>;

struct RunOptions {
  ProgressCallback progress;
  const Cube *reference = nullptr; ///< enables the per-iteration MPSNR trace
  double peak = 1.0;
};

/// Raised when the objective becomes non-finite or runs away; carries the trace so far.
class SolverDivergence : public DivergenceError {
public:
  SolverDivergence(const std::string &what, std::vector<double> trace)
      : DivergenceError(what), trace_(std::move(trace)) {}
  const std::vector<double> &trace() const { return trace_; }

private:
  std::vector<double> trace_;
};

double soft_threshold(double x, double threshold);
/// Entrywise soft-thresholding.
Cube soft_threshold(const Cube &c, double threshold);

/// Exact minimizer over Y of ||X - recon - Y||_F^2 + lambda ||Y||_1.
Cube update_outliers(const Cube &observed, const Cube &recon, double lambda);

SolverState initialize(Index rows, Index cols, Index bands, const SolverConfig &cfg);

/// Current generator outputs (forward pass only).
Factors current_factors(SolverState &state);
Cube reconstruct(SolverState &state);

/// ||X - sum_r S_r o c_r - Y||_F^2 + lambda ||Y||_1 at the current state.
double loss(const Cube &observed, SolverState &state, double lambda);

/// One Adam step on every generator with Y held fixed. Returns the objective evaluated
/// before the step.
double step_networks(const Cube &observed, SolverState &state);

/// Computes the gradient of the objective into each parameter's grad buffer without
/// stepping. Returns the objective.
double accumulate_gradients(const Cube &observed, SolverState &state);

/// The full alternating scheme: T rounds of {network step, outlier update}.
DenoiseResult run(const Cube &observed, const SolverConfig &cfg, const RunOptions &options = {});

} // namespace ds2dp
