#include "ds2dp/solver.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "ds2dp/metrics.hpp"
#include "ds2dp/random.hpp"

namespace ds2dp {

namespace {

// Sub-seed streams; fixed so that a given seed always maps to the same networks.
constexpr std::uint64_t kSpatialStream = 100;
constexpr std::uint64_t kSpectralStream = 200;
constexpr std::uint64_t kLatentStream = 300;

struct ForwardPass {
  ad::Graph graph;
  std::vector<ad::Var> maps;
  std::vector<ad::Var> signatures;
  ad::Var recon;
};

void forward(SolverState &state, ForwardPass &pass) {
  const SolverConfig &cfg = state.config;
  const auto rank = static_cast<std::size_t>(cfg.rank);
  ad::Graph &g = pass.graph;

  if (cfg.spatial_prior == SpatialPrior::free) {
    for (std::size_t r = 0; r < rank; ++r)
      pass.maps.push_back(free_abundance_forward(g, state.spatial[r]));
  } else if (cfg.share_spatial) {
    const LatentInput &z = state.latents.front();
    pass.maps = spatial_forward(g, state.spatial.front(), cfg.spatial,
                                g.constant(z.spatial_shape, z.spatial));
  } else {
    for (std::size_t r = 0; r < rank; ++r) {
      const LatentInput &z = state.latents[r];
      pass.maps.push_back(spatial_forward(g, state.spatial[r], cfg.spatial,
                                          g.constant(z.spatial_shape, z.spatial))
                              .front());
    }
  }

  const SpectralNetConfig spectral{cfg.spectral_code, cfg.spectral_hidden,
                                   static_cast<int>(state.bands)};
  for (std::size_t r = 0; r < rank; ++r) {
    if (cfg.spectral_prior == SpectralPrior::free) {
      pass.signatures.push_back(free_signature_forward(g, state.spectral[r]));
    } else {
      const LatentInput &w = state.latents[r];
      pass.signatures.push_back(spectral_forward(
          g, state.spectral[r], spectral, g.constant(ad::Shape::vector(w.spectral.size()), w.spectral)));
    }
  }
  pass.recon = ad::lmm_compose(pass.maps, pass.signatures);
}

void require_state_shape(const Cube &observed, const SolverState &state) {
  if (observed.rows() != state.rows || observed.cols() != state.cols ||
      observed.bands() != state.bands)
    throw ShapeError("observed cube " +
                     shape_string(observed.rows(), observed.cols(), observed.bands()) +
                     " does not match solver state " +
                     shape_string(state.rows, state.cols, state.bands));
}

double outlier_penalty(const SolverState &state) {
  return state.config.outliers_active() ? state.config.lambda * l1_norm(state.outliers) : 0.0;
}

Cube as_cube(const ForwardPass &pass, Index rows, Index cols, Index bands) {
  return Cube(rows, cols, bands, pass.recon.value());
}

} // namespace

void SolverConfig::validate() const {
  if (rank < 1) throw ContractError("rank R must be at least 1");
  if (iterations < 0) throw ContractError("iteration budget must be non-negative");
  if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
  if (!(adam.lr >= 0.0)) throw ContractError("learning rate must be non-negative");
  if (spectral_code < 1 || spectral_hidden < 1)
    throw ContractError("spectral network sizes must be positive");
  if (snapshot_stride < 1) throw ContractError("snapshot stride must be positive");
  spatial.validate();
}

Index SolverState::param_count() const {
  Index total = 0;
  for (const auto &s : spatial) total += ad::param_count(s);
  for (const auto &s : spectral) total += ad::param_count(s);
  return total;
}

double soft_threshold(double x, double threshold) {
  if (!(threshold >= 0.0)) throw ContractError("soft_threshold: threshold must be non-negative");
  const double magnitude = std::abs(x) - threshold;
  if (magnitude <= 0.0) return 0.0;
  return x > 0.0 ? magnitude : -magnitude;
}

Cube soft_threshold(const Cube &c, double threshold) {
  if (!(threshold >= 0.0)) throw ContractError("soft_threshold: threshold must be non-negative");
  Cube out(c.rows(), c.cols(), c.bands());
  for (Index n = 0; n < c.size(); ++n) out.data()[n] = soft_threshold(c.data()[n], threshold);
  return out;
}

Cube update_outliers(const Cube &observed, const Cube &recon, double lambda) {
  require_same_shape(observed, recon, "update_outliers");
  return soft_threshold(sub(observed, recon), 0.5 * lambda);
}

SolverState initialize(Index rows, Index cols, Index bands, const SolverConfig &cfg) {
  cfg.validate();
  if (bands < 1) throw ShapeError("cube needs at least one band");
  SolverState state;
  state.config = cfg;
  state.rows = rows;
  state.cols = cols;
  state.bands = bands;
  state.outliers = Cube(rows, cols, bands);
  if (cfg.spatial_prior == SpatialPrior::network) cfg.spatial.validate(rows, cols);

  const SpectralNetConfig spectral{cfg.spectral_code, cfg.spectral_hidden, static_cast<int>(bands)};
  for (int r = 0; r < cfg.rank; ++r) {
    const auto stream = static_cast<std::uint64_t>(r);
    state.latents.push_back(LatentInput::sample(cfg.spatial.input_channels, rows, cols,
                                                cfg.spectral_code,
                                                mix_seed(cfg.seed, kLatentStream + stream)));
    const std::uint64_t spatial_seed = mix_seed(cfg.seed, kSpatialStream + stream);
    if (cfg.spatial_prior == SpatialPrior::free)
      state.spatial.push_back(build_free_abundance(rows, cols, spatial_seed));
    else if (!cfg.share_spatial)
      state.spatial.push_back(build_spatial(cfg.spatial, spatial_seed));
    else if (r == 0)
      state.spatial.push_back(build_shared_spatial(cfg.spatial, cfg.rank, spatial_seed));

    const std::uint64_t spectral_seed = mix_seed(cfg.seed, kSpectralStream + stream);
    if (cfg.spectral_prior == SpectralPrior::free)
      state.spectral.push_back(build_free_signature(bands, spectral_seed));
    else
      state.spectral.push_back(build_spectral(spectral, spectral_seed));
  }
  return state;
}

Factors current_factors(SolverState &state) {
  ForwardPass pass;
  forward(state, pass);
  Factors f;
  for (const auto &m : pass.maps) f.maps.push_back(to_abundance(m));
  for (const auto &s : pass.signatures) f.signatures.push_back(s.value());
  return f;
}

Cube reconstruct(SolverState &state) {
  ForwardPass pass;
  forward(state, pass);
  return as_cube(pass, state.rows, state.cols, state.bands);
}

double loss(const Cube &observed, SolverState &state, double lambda) {
  require_state_shape(observed, state);
  const Cube residual = sub(sub(observed, reconstruct(state)), state.outliers);
  return squared_norm(residual) + lambda * l1_norm(state.outliers);
}

namespace {

// Appends the data term to an existing forward pass and backpropagates it.
double backpropagate(const Cube &observed, SolverState &state, ForwardPass &pass) {
  const ad::Vector target = observed.data() - state.outliers.data();
  const ad::Var data_term = ad::squared_distance(pass.recon, target);
  const double objective = data_term.value()[0] + outlier_penalty(state);
  if (!std::isfinite(objective))
    throw SolverDivergence("objective is not finite at iteration " + std::to_string(state.iteration),
                           state.loss_history);
  pass.graph.backward(data_term);
  return objective;
}

void apply_adam(SolverState &state) {
  for (auto &s : state.spatial) ad::adam_step(s, state.config.adam);
  for (auto &s : state.spectral) ad::adam_step(s, state.config.adam);
}

} // namespace

double accumulate_gradients(const Cube &observed, SolverState &state) {
  require_state_shape(observed, state);
  ForwardPass pass;
  forward(state, pass);
  return backpropagate(observed, state, pass);
}

double step_networks(const Cube &observed, SolverState &state) {
  const double objective = accumulate_gradients(observed, state);
  apply_adam(state);
  return objective;
}

DenoiseResult run(const Cube &observed, const SolverConfig &cfg, const RunOptions &options) {
  cfg.validate();
  if (options.reference != nullptr) require_same_shape(*options.reference, observed, "run reference");

  double scale = 1.0;
  if (cfg.normalize_input && observed.size() > 0) {
    const double peak = observed.data().maxCoeff();
    if (peak > 0.0 && std::isfinite(peak)) scale = peak;
  }
  const Cube x = scale == 1.0 ? observed : ds2dp::scale(observed, 1.0 / scale);

  SolverState state = initialize(x.rows(), x.cols(), x.bands(), cfg);
  DenoiseResult result;
  result.scale = scale;
  result.param_count = state.param_count();

  const double initial = loss(x, state, cfg.lambda);
  const double ceiling = cfg.divergence_factor * initial;
  // The pass that produced iteration t's reconstruction also serves the gradient of step t+1.
  auto pass = std::make_unique<ForwardPass>();
  forward(state, *pass);
  for (int t = 1; t <= cfg.iterations; ++t) {
    backpropagate(x, state, *pass);
    apply_adam(state);
    pass = std::make_unique<ForwardPass>();
    forward(state, *pass);
    const Cube recon = as_cube(*pass, x.rows(), x.cols(), x.bands());
    if (cfg.outliers_active()) state.outliers = update_outliers(x, recon, cfg.lambda);
    const double value =
        squared_norm(sub(sub(x, recon), state.outliers)) + outlier_penalty(state);
    state.iteration = t;
    if (!std::isfinite(value) || (initial > 0.0 && value > ceiling))
      throw SolverDivergence("objective diverged at iteration " + std::to_string(t),
                             state.loss_history);
    state.loss_history.push_back(value);

    std::optional<double> mpsnr;
    if (options.reference != nullptr) {
      mpsnr = psnr(*options.reference, ds2dp::scale(recon, scale), options.peak).mean;
      result.psnr_trace.push_back(*mpsnr);
    }
    if (options.progress && (t % cfg.snapshot_stride == 0 || t == cfg.iterations))
      options.progress(Progress{t, value, mpsnr});
  }

  Factors factors = current_factors(state);
  for (auto &s : factors.signatures) s *= scale;
  result.denoised = outer_accumulate<double>(std::span<const AbundanceMap>(factors.maps),
                                             std::span<const Signature>(factors.signatures),
                                             x.rows(), x.cols(), x.bands());
  result.outliers = ds2dp::scale(state.outliers, scale);
  result.loss_trace = std::move(state.loss_history);
  result.maps = std::move(factors.maps);
  result.signatures = std::move(factors.signatures);
  return result;
}

} // namespace ds2dp
