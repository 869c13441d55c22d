#include "ds2dp/generators.hpp"

#include <cmath>
#include <string>

#include "ds2dp/random.hpp"

namespace ds2dp {

namespace {

using ad::Graph;
using ad::ParamStore;
using ad::Shape;
using ad::Var;

std::string layer(const char *kind, int index) { return kind + std::to_string(index); }

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
void init_uniform(ad::Param &p, double fan_in, Rng &rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  for (Index n = 0; n < p.value.size(); ++n) p.value[n] = rng.uniform(-bound, bound);
}

void add_conv(ParamStore &store, const std::string &name, int in, int out, int kernel, Rng &rng) {
  const double fan_in = static_cast<double>(in) * kernel * kernel;
  init_uniform(store.add(name + ".conv.w", {out, in, kernel, kernel}), fan_in, rng);
  init_uniform(store.add(name + ".conv.b", {out}), fan_in, rng);
}

void add_norm(ParamStore &store, const std::string &name, int channels) {
  store.add(name + ".gain", {channels}).value.setOnes();
  store.add(name + ".shift", {channels});
}

void add_linear(ParamStore &store, const std::string &name, int in, int out, Rng &rng) {
  init_uniform(store.add(name + ".w", {out, in}), in, rng);
  init_uniform(store.add(name + ".b", {out}), in, rng);
}

Var conv(Graph &g, ParamStore &p, const std::string &name, Var x, int stride, int padding) {
  return ad::conv2d(x, g.parameter(p, name + ".conv.w"), g.parameter(p, name + ".conv.b"), stride,
                    padding);
}

Var norm(Graph &g, ParamStore &p, const std::string &name, Var x) {
  return ad::instance_norm(x, g.parameter(p, name + ".gain"), g.parameter(p, name + ".shift"));
}

// conv -> [norm] -> leaky ReLU
Var conv_block(Graph &g, ParamStore &p, const SpatialNetConfig &cfg, const std::string &name, Var x,
               int stride, int padding) {
  Var y = conv(g, p, name, x, stride, padding);
  if (cfg.normalize) y = norm(g, p, name + ".norm", y);
  return ad::leaky_relu(y, cfg.slope);
}

void add_conv_block(ParamStore &store, const SpatialNetConfig &cfg, const std::string &name, int in,
                    int out, int kernel, Rng &rng) {
  add_conv(store, name, in, out, kernel, rng);
  if (cfg.normalize) add_norm(store, name + ".norm", out);
}

ParamStore build_trunk(const SpatialNetConfig &cfg, int heads, std::uint64_t seed) {
  cfg.validate();
  if (heads < 1) throw ContractError("spatial network needs at least one head");
  Rng rng(seed);
  ParamStore store;
  int channels = cfg.input_channels;
  for (int s = 0; s < cfg.num_scales(); ++s) {
    if (cfg.skip_channels > 0)
      add_conv_block(store, cfg, layer("skip", s), channels, cfg.skip_channels, 1, rng);
    const int out = cfg.down_channels[static_cast<std::size_t>(s)];
    add_conv_block(store, cfg, layer("down", s), channels, out, cfg.kernel_size, rng);
    channels = out;
  }
  for (int s = cfg.num_scales() - 1; s >= 0; --s) {
    const int merged = channels + cfg.skip_channels;
    if (cfg.normalize) add_norm(store, layer("up", s) + ".merge_norm", merged);
    const int out = cfg.up_channels[static_cast<std::size_t>(s)];
    add_conv_block(store, cfg, layer("up", s), merged, out, cfg.kernel_size, rng);
    channels = out;
  }
  for (int r = 0; r < heads; ++r) add_conv(store, layer("head", r), channels, 1, 1, rng);
  return store;
}

} // namespace

void SpatialNetConfig::validate() const {
  if (down_channels.empty()) throw ContractError("spatial network needs at least one scale");
  if (up_channels.size() != down_channels.size())
    throw ContractError("spatial network needs one decoder width per encoder scale");
  for (const int c : down_channels)
    if (c <= 0) throw ContractError("encoder channel counts must be positive");
  for (const int c : up_channels)
    if (c <= 0) throw ContractError("decoder channel counts must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ContractError("kernel size must be a positive odd number");
  if (skip_channels < 0 || input_channels <= 0)
    throw ContractError("skip/input channel counts out of range");
}

void SpatialNetConfig::validate(Index rows, Index cols) const {
  validate();
  const Index factor = Index{1} << num_scales();
  if (rows <= 0 || cols <= 0 || rows % factor != 0 || cols % factor != 0)
    throw ShapeError("spatial size " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " is not divisible by 2^" + std::to_string(num_scales()));
}

void SpectralNetConfig::validate() const {
  if (input_size <= 0 || hidden <= 0 || output_size <= 0)
    throw ContractError("spectral network sizes must be positive");
}

LatentInput LatentInput::sample(Index channels, Index rows, Index cols, Index spectral_size,
                                std::uint64_t seed) {
  Rng rng(seed);
  LatentInput latent;
  latent.seed = seed;
  latent.spatial_shape = Shape::image(channels, rows, cols);
  latent.spatial.resize(channels * rows * cols);
  for (Index n = 0; n < latent.spatial.size(); ++n)
    latent.spatial[n] = rng.uniform(-kLatentHalfWidth, kLatentHalfWidth);
  latent.spectral.resize(spectral_size);
  for (Index n = 0; n < spectral_size; ++n)
    latent.spectral[n] = rng.uniform(-kLatentHalfWidth, kLatentHalfWidth);
  return latent;
}

ParamStore build_spatial(const SpatialNetConfig &cfg, std::uint64_t seed) {
  return build_trunk(cfg, 1, seed);
}

ParamStore build_shared_spatial(const SpatialNetConfig &cfg, int heads, std::uint64_t seed) {
  return build_trunk(cfg, heads, seed);
}

ParamStore build_spectral(const SpectralNetConfig &cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamStore store;
  add_linear(store, "fc0", cfg.input_size, cfg.hidden, rng);
  add_linear(store, "fc1", cfg.hidden, cfg.hidden, rng);
  add_linear(store, "fc2", cfg.hidden, cfg.output_size, rng);
  return store;
}

ParamStore build_free_abundance(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore store;
  auto &p = store.add("logits", Shape::image(1, rows, cols));
  for (Index n = 0; n < p.value.size(); ++n) p.value[n] = rng.uniform(-kLatentHalfWidth, kLatentHalfWidth);
  return store;
}

ParamStore build_free_signature(Index bands, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore store;
  auto &p = store.add("preact", Shape::vector(bands));
  for (Index n = 0; n < p.value.size(); ++n) p.value[n] = rng.uniform(-kLatentHalfWidth, kLatentHalfWidth);
  return store;
}

int head_count(const ParamStore &params) {
  int heads = 0;
  while (params.contains(layer("head", heads) + ".conv.w")) ++heads;
  return heads;
}

std::vector<Var> spatial_forward(Graph &g, ParamStore &p, const SpatialNetConfig &cfg, Var input) {
  const ad::Shape &in = input.shape();
  if (in.rank() != 3 || in[0] != cfg.input_channels)
    throw ShapeError("spatial_forward: input " + in.str() + " does not match " +
                     std::to_string(cfg.input_channels) + " input channels");
  cfg.validate(in[1], in[2]);
  const int pad = cfg.kernel_size / 2;
  const int scales = cfg.num_scales();

  std::vector<Var> skips(static_cast<std::size_t>(scales));
  Var x = input;
  for (int s = 0; s < scales; ++s) {
    if (cfg.skip_channels > 0)
      skips[static_cast<std::size_t>(s)] = conv_block(g, p, cfg, layer("skip", s), x, 1, 0);
    x = conv_block(g, p, cfg, layer("down", s), x, 2, pad);
  }
  for (int s = scales - 1; s >= 0; --s) {
    x = ad::upsample_nearest(x, 2);
    if (cfg.skip_channels > 0) x = ad::concat_channels(skips[static_cast<std::size_t>(s)], x);
    if (cfg.normalize) x = norm(g, p, layer("up", s) + ".merge_norm", x);
    x = conv_block(g, p, cfg, layer("up", s), x, 1, pad);
  }

  const int heads = head_count(p);
  std::vector<Var> maps;
  maps.reserve(static_cast<std::size_t>(heads));
  for (int r = 0; r < heads; ++r) maps.push_back(ad::sigmoid(conv(g, p, layer("head", r), x, 1, 0)));
  return maps;
}

Var spectral_forward(Graph &g, ParamStore &p, const SpectralNetConfig &cfg, Var input) {
  if (input.shape().size() != cfg.input_size)
    throw ShapeError("spectral_forward: code length " + std::to_string(input.shape().size()) +
                     " != " + std::to_string(cfg.input_size));
  Var h = ad::relu(ad::linear(input, g.parameter(p, "fc0.w"), g.parameter(p, "fc0.b")));
  h = ad::relu(ad::linear(h, g.parameter(p, "fc1.w"), g.parameter(p, "fc1.b")));
  return ad::softplus(ad::linear(h, g.parameter(p, "fc2.w"), g.parameter(p, "fc2.b")));
}

Var free_abundance_forward(Graph &g, ParamStore &p) { return ad::sigmoid(g.parameter(p, "logits")); }

Var free_signature_forward(Graph &g, ParamStore &p) { return ad::softplus(g.parameter(p, "preact")); }

AbundanceMap to_abundance(Var node) {
  const ad::Shape &s = node.shape();
  const Index rows = s.rank() == 3 ? s[1] : s[0];
  const Index cols = s.rank() == 3 ? s[2] : (s.rank() == 2 ? s[1] : 1);
  return Eigen::Map<const AbundanceMap>(node.value().data(), rows, cols);
}

AbundanceMap generate_abundance(ParamStore &params, const SpatialNetConfig &cfg,
                                const LatentInput &z, int head) {
  Graph g;
  const Var input = g.constant(z.spatial_shape, z.spatial);
  const auto maps = spatial_forward(g, params, cfg, input);
  if (head < 0 || head >= static_cast<int>(maps.size()))
    throw ContractError("generate_abundance: head " + std::to_string(head) + " out of range");
  return to_abundance(maps[static_cast<std::size_t>(head)]);
}

Signature generate_signature(ParamStore &params, const SpectralNetConfig &cfg,
                             const LatentInput &w) {
  Graph g;
  const Var code = g.constant(ad::Shape::vector(w.spectral.size()), w.spectral);
  return spectral_forward(g, params, cfg, code).value();
}

} // namespace ds2dp
