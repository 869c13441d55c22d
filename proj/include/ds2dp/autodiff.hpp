#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ds2dp/tensor.hpp"

namespace ds2dp::ad {

using Vector = Eigen::VectorXd;

/// Up to four axes. Feature maps use {channels, height, width}; conv kernels use
/// {out, in, kh, kw}; flat vectors use {n}.
class Shape {
public:
  Shape() = default;
  Shape(std::initializer_list<Index> dims);

  static Shape vector(Index n) { return {n}; }
  static Shape image(Index channels, Index height, Index width) { return {channels, height, width}; }

  int rank() const { return rank_; }
  Index operator[](int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  Index size() const;

  // Feature-map accessors; axes beyond the rank read as 1.
  Index channels() const { return rank_ >= 3 ? dims_[0] : (rank_ == 1 ? dims_[0] : 1); }
  Index height() const { return rank_ >= 3 ? dims_[1] : 1; }
  Index width() const { return rank_ >= 3 ? dims_[2] : 1; }

  bool operator==(const Shape &other) const;
  std::string str() const;

private:
  std::array<Index, 4> dims_{1, 1, 1, 1};
  int rank_ = 0;
};

/// One trainable array with its gradient accumulator and Adam moments.
struct Param {
  std::string name;
  Shape shape;
  Vector value;
  Vector grad;
  Vector first_moment;
  Vector second_moment;
};

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Named trainable arrays. References returned by add() stay valid for the store's
/// lifetime; insertion order is preserved and defines iteration order.
class ParamStore {
public:
  Param &add(std::string name, Shape shape);
  Param &at(std::string_view name);
  const Param &at(std::string_view name) const;
  bool contains(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }

  std::int64_t step() const { return step_; }
  void zero_grad();

private:
  friend void adam_step(ParamStore &store, const AdamOptions &options);
  std::deque<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;
};

/// Total number of scalar trainables.
Index param_count(const ParamStore &store);

/// Bias-corrected Adam update of every parameter; gradients are zeroed afterwards.
void adam_step(ParamStore &store, const AdamOptions &options);
inline void adam_step(ParamStore &store) { adam_step(store, AdamOptions{}); }

enum class Op : std::uint8_t {
  constant,
  parameter,
  conv2d,
  linear,
  relu,
  leaky_relu,
  sigmoid,
  softplus,
  upsample,
  concat,
  instance_norm,
  lmm,
  squared_distance,
  sum,
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph *graph = nullptr;
  int id = -1;

  const Vector &value() const;
  const Shape &shape() const;
};

/// Define-by-run tape. Every op appends a node holding its forward value and a closure
/// that propagates its output gradient to its inputs.
class Graph {
public:
  struct Node {
    Op op = Op::constant;
    Shape shape;
    Vector value;
    Vector grad;
    bool requires_grad = false;
    Param *param = nullptr;
    std::vector<int> inputs;
    std::function<void(Graph &, int self)> backward;
  };

  Var constant(Shape shape, Vector values);
  Var parameter(Param &param);
  Var parameter(ParamStore &store, std::string_view name) { return parameter(store.at(name)); }

  Var push(Node node);
  Node &node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node &node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar root. Parameter gradients are accumulated into their
  /// ParamStore entries; call ParamStore::zero_grad or adam_step between passes.
  void backward(Var output);

  /// Hash of the sign pattern at every piecewise-linear activation. Two evaluations with
  /// equal patterns lie on the same smooth piece of the network function.
  std::uint64_t activation_pattern() const;

private:
  std::deque<Node> nodes_;
};

Var conv2d(Var input, Var weights, Var bias, int stride, int padding);
Var linear(Var input, Var weights, Var bias);
Var relu(Var input);
Var leaky_relu(Var input, double slope);
Var sigmoid(Var input);
Var softplus(Var input);
Var upsample_nearest(Var input, int factor);
Var concat_channels(Var a, Var b);
/// Per-channel normalization over the spatial axes followed by a learned affine map.
Var instance_norm(Var input, Var gain, Var shift, double epsilon = 1e-5);
/// Linear mixture of R abundance maps (each 1 x I x J) with R signatures (each K),
/// producing a K x I x J node in cube layout.
Var lmm_compose(const std::vector<Var> &maps, const std::vector<Var> &sigs);
/// Scalar sum of squared differences to a constant target.
Var squared_distance(Var input, const Vector &target);
Var sum(Var input);

} // namespace ds2dp::ad
