#pragma once

#include <cstdint>
#include <vector>

#include "ds2dp/autodiff.hpp"
#include "ds2dp/tensor.hpp"

namespace ds2dp {

/// Hourglass (encoder-decoder with skip connections) producing abundance maps.
///
/// Each encoder scale is a stride-2 k x k convolution; each decoder scale upsamples by
/// nearest neighbour, concatenates the skip branch taken at that resolution, normalizes,
/// and applies a k x k convolution. Every convolution except the output head is followed
/// by per-channel normalization and a leaky ReLU. The output head is a 1 x 1 convolution
/// to one channel with a sigmoid, so abundances lie in [0, 1].
struct SpatialNetConfig {
  std::vector<int> down_channels{16, 32, 64, 128, 128};
  std::vector<int> up_channels{8, 16, 32, 64, 64};
  int kernel_size = 3;
  int skip_channels = 4;
  int input_channels = 8;
  double slope = 0.1;
  bool normalize = true;

  int num_scales() const { return static_cast<int>(down_channels.size()); }

  /// Full-size architecture (about 0.39M parameters per network).
  static SpatialNetConfig reference() { return {}; }
  /// Small architecture for desk-scale experiments and tests.
  static SpatialNetConfig desk() { return {{8, 16, 32}, {4, 8, 16}, 3, 4, 4, 0.1, true}; }

  /// Throws ContractError for inconsistent settings and ShapeError when rows/cols are not
  /// divisible by 2^num_scales.
  void validate(Index rows, Index cols) const;
  void validate() const;
};

/// Three affine layers: input_size -> hidden -> hidden -> output_size, ReLU between
/// layers and softplus at the output so signatures are non-negative.
struct SpectralNetConfig {
  int input_size = 64;
  int hidden = 128;
  int output_size = 1;

  void validate() const;
};

/// Fixed random network inputs: a spatial field z (channels x rows x cols) and a spectral
/// code w, both drawn from U(-0.05, 0.05).
struct LatentInput {
  ad::Shape spatial_shape;
  ad::Vector spatial;
  ad::Vector spectral;
  std::uint64_t seed = 0;

  static LatentInput sample(Index channels, Index rows, Index cols, Index spectral_size,
                            std::uint64_t seed);
};

inline constexpr double kLatentHalfWidth = 0.05;

ad::ParamStore build_spatial(const SpatialNetConfig &cfg, std::uint64_t seed);
/// One trunk and `heads` output heads (DS2DP* variant). heads == 1 is structurally the
/// same network as build_spatial.
ad::ParamStore build_shared_spatial(const SpatialNetConfig &cfg, int heads, std::uint64_t seed);
ad::ParamStore build_spectral(const SpectralNetConfig &cfg, std::uint64_t seed);

/// Unconstrained per-pixel logits, mapped through a sigmoid (spatial-prior ablation).
ad::ParamStore build_free_abundance(Index rows, Index cols, std::uint64_t seed);
/// Unconstrained per-band pre-activations, mapped through a softplus (spectral-prior ablation).
ad::ParamStore build_free_signature(Index bands, std::uint64_t seed);

/// Forward pass of the hourglass; returns one (1, rows, cols) node per head.
std::vector<ad::Var> spatial_forward(ad::Graph &graph, ad::ParamStore &params,
                                     const SpatialNetConfig &cfg, ad::Var input);
ad::Var spectral_forward(ad::Graph &graph, ad::ParamStore &params, const SpectralNetConfig &cfg,
                         ad::Var input);
ad::Var free_abundance_forward(ad::Graph &graph, ad::ParamStore &params);
ad::Var free_signature_forward(ad::Graph &graph, ad::ParamStore &params);

/// Number of output heads in a spatial store.
int head_count(const ad::ParamStore &params);

AbundanceMap generate_abundance(ad::ParamStore &params, const SpatialNetConfig &cfg,
                                const LatentInput &z, int head = 0);
Signature generate_signature(ad::ParamStore &params, const SpectralNetConfig &cfg,
                             const LatentInput &w);

// Converts a (1, I, J) node to an abundance map.
AbundanceMap to_abundance(ad::Var node);

} // namespace ds2dp
