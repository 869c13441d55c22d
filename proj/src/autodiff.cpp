#include "ds2dp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace ds2dp::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

Graph &graph_of(Var a) {
  if (a.graph == nullptr) throw ContractError("variable is not attached to a graph");
  return *a.graph;
}

Graph &graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw ContractError("variables belong to different graphs");
  return graph_of(a);
}

void require_rank(const Shape &s, int rank, const char *what) {
  if (s.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     s.str());
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise op with a derivative expressed from the input and output values.
template <typename Forward, typename Derivative>
Var unary(Var input, Op op, Forward forward, Derivative derivative) {
  Graph &g = graph_of(input);
  const Graph::Node &in = g.node(input.id);
  Graph::Node node;
  node.op = op;
  node.shape = in.shape;
  node.value = in.value.unaryExpr(forward);
  node.inputs = {input.id};
  node.requires_grad = in.requires_grad;
  node.backward = [derivative](Graph &graph, int self) {
    Graph::Node &out = graph.node(self);
    Graph::Node &src = graph.node(out.inputs[0]);
    if (!src.requires_grad) return;
    for (Index n = 0; n < out.value.size(); ++n)
      src.grad[n] += out.grad[n] * derivative(src.value[n], out.value[n]);
  };
  return g.push(std::move(node));
}

} // namespace

Shape::Shape(std::initializer_list<Index> dims) {
  if (dims.size() > 4) throw ShapeError("shape rank above 4");
  rank_ = static_cast<int>(dims.size());
  std::copy(dims.begin(), dims.end(), dims_.begin());
  for (const Index d : dims)
    if (d <= 0) throw ShapeError("shape axes must be positive");
}

Index Shape::size() const {
  Index n = 1;
  for (int a = 0; a < rank_; ++a) n *= dims_[static_cast<std::size_t>(a)];
  return n;
}

bool Shape::operator==(const Shape &other) const {
  return rank_ == other.rank_ && dims_ == other.dims_;
}

std::string Shape::str() const {
  std::ostringstream out;
  out << '(';
  for (int a = 0; a < rank_; ++a) out << (a ? "," : "") << dims_[static_cast<std::size_t>(a)];
  out << ')';
  return out.str();
}

Param &ParamStore::add(std::string name, Shape shape) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  const Index n = shape.size();
  index_.emplace(name, params_.size());
  params_.push_back(Param{std::move(name), shape, Vector::Zero(n), Vector::Zero(n),
                          Vector::Zero(n), Vector::Zero(n)});
  return params_.back();
}

Param &ParamStore::at(std::string_view name) {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Param &ParamStore::at(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

bool ParamStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

void ParamStore::zero_grad() {
  for (auto &p : params_) p.grad.setZero();
}

Index param_count(const ParamStore &store) {
  Index total = 0;
  for (const auto &p : store) total += p.value.size();
  return total;
}

void adam_step(ParamStore &store, const AdamOptions &options) {
  ++store.step_;
  const double t = static_cast<double>(store.step_);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (auto &p : store.params_) {
    p.first_moment = options.beta1 * p.first_moment + (1.0 - options.beta1) * p.grad;
    p.second_moment =
        options.beta2 * p.second_moment + (1.0 - options.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= options.lr * (p.first_moment.array() / correction1) /
                       ((p.second_moment.array() / correction2).sqrt() + options.epsilon);
    p.grad.setZero();
  }
}

const Vector &Var::value() const { return graph_of(*this).node(id).value; }
const Shape &Var::shape() const { return graph_of(*this).node(id).shape; }

Var Graph::constant(Shape shape, Vector values) {
  if (values.size() != shape.size())
    throw ShapeError("constant: " + std::to_string(values.size()) + " values for shape " +
                     shape.str());
  Node node;
  node.op = Op::constant;
  node.shape = shape;
  node.value = std::move(values);
  return push(std::move(node));
}

Var Graph::parameter(Param &param) {
  Node node;
  node.op = Op::parameter;
  node.shape = param.shape;
  node.value = param.value;
  node.requires_grad = true;
  node.param = &param;
  return push(std::move(node));
}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Graph::backward(Var output) {
  if (output.graph != this) throw ContractError("backward: output belongs to another graph");
  Node &root = node(output.id);
  if (root.value.size() != 1)
    throw ContractError("backward: output must be scalar, got shape " + root.shape.str());
  for (int id = 0; id <= output.id; ++id) {
    Node &n = node(id);
    if (n.requires_grad) n.grad = Vector::Zero(n.value.size());
  }
  if (!root.requires_grad) return;
  root.grad[0] = 1.0;
  for (int id = output.id; id >= 0; --id) {
    Node &n = node(id);
    if (!n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

std::uint64_t Graph::activation_pattern() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const Node &n : nodes_) {
    if (n.op != Op::relu && n.op != Op::leaky_relu) continue;
    const Vector &x = node(n.inputs[0]).value;
    for (Index i = 0; i < x.size(); ++i) {
      hash ^= x[i] > 0.0 ? 1u : 0u;
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

Var conv2d(Var input, Var weights, Var bias, int stride, int padding) {
  Graph &g = graph_of(input, weights);
  graph_of(input, bias);
  const Shape &xs = input.shape();
  const Shape &ws = weights.shape();
  require_rank(xs, 3, "conv2d input");
  require_rank(ws, 4, "conv2d weights");
  const Index channels = xs[0], height = xs[1], width = xs[2];
  const Index out_channels = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != channels)
    throw ShapeError("conv2d: kernel expects " + std::to_string(ws[1]) + " input channels, got " +
                     std::to_string(channels));
  if (bias.shape().size() != out_channels) throw ShapeError("conv2d: bias length mismatch");
  if (stride < 1 || padding < 0) throw ContractError("conv2d: invalid stride or padding");
  const Index padded_h = height + 2 * padding, padded_w = width + 2 * padding;
  if (kh > padded_h || kw > padded_w) throw ShapeError("conv2d: kernel larger than padded input");
  const Index out_h = (padded_h - kh) / stride + 1;
  const Index out_w = (padded_w - kw) / stride + 1;
  const Index patch = channels * kh * kw;
  const Index positions = out_h * out_w;

  auto cols = std::make_shared<RowMatrix>(RowMatrix::Zero(patch, positions));
  const Vector &x = input.value();
  for (Index c = 0; c < channels; ++c)
    for (Index dy = 0; dy < kh; ++dy)
      for (Index dx = 0; dx < kw; ++dx) {
        const Index row = (c * kh + dy) * kw + dx;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index y = oy * stride - padding + dy;
          if (y < 0 || y >= height) continue;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index xx = ox * stride - padding + dx;
            if (xx < 0 || xx >= width) continue;
            (*cols)(row, oy * out_w + ox) = x[(c * height + y) * width + xx];
          }
        }
      }

  Graph::Node node;
  node.op = Op::conv2d;
  node.shape = Shape::image(out_channels, out_h, out_w);
  node.value.resize(out_channels * positions);
  RowMap out(node.value.data(), out_channels, positions);
  out.noalias() = ConstRowMap(weights.value().data(), out_channels, patch) * (*cols);
  out.colwise() += bias.value();
  node.inputs = {input.id, weights.id, bias.id};
  node.requires_grad =
      g.node(input.id).requires_grad || g.node(weights.id).requires_grad || g.node(bias.id).requires_grad;
  node.backward = [=](Graph &graph, int self) {
    Graph::Node &o = graph.node(self);
    Graph::Node &xin = graph.node(o.inputs[0]);
    Graph::Node &win = graph.node(o.inputs[1]);
    Graph::Node &bin = graph.node(o.inputs[2]);
    ConstRowMap dout(o.grad.data(), out_channels, positions);
    if (win.requires_grad)
      RowMap(win.grad.data(), out_channels, patch).noalias() += dout * cols->transpose();
    if (bin.requires_grad) bin.grad += dout.rowwise().sum();
    if (!xin.requires_grad) return;
    const RowMatrix dcols = ConstRowMap(win.value.data(), out_channels, patch).transpose() * dout;
    for (Index c = 0; c < channels; ++c)
      for (Index dy = 0; dy < kh; ++dy)
        for (Index dx = 0; dx < kw; ++dx) {
          const Index row = (c * kh + dy) * kw + dx;
          for (Index oy = 0; oy < out_h; ++oy) {
            const Index y = oy * stride - padding + dy;
            if (y < 0 || y >= height) continue;
            for (Index ox = 0; ox < out_w; ++ox) {
              const Index xx = ox * stride - padding + dx;
              if (xx < 0 || xx >= width) continue;
              xin.grad[(c * height + y) * width + xx] += dcols(row, oy * out_w + ox);
            }
          }
        }
  };
  return g.push(std::move(node));
}

Var linear(Var input, Var weights, Var bias) {
  Graph &g = graph_of(input, weights);
  graph_of(input, bias);
  const Shape &ws = weights.shape();
  require_rank(ws, 2, "linear weights");
  const Index outputs = ws[0], inputs = ws[1];
  if (input.shape().size() != inputs)
    throw ShapeError("linear: weights expect " + std::to_string(inputs) + " inputs, got " +
                     std::to_string(input.shape().size()));
  if (bias.shape().size() != outputs) throw ShapeError("linear: bias length mismatch");

  Graph::Node node;
  node.op = Op::linear;
  node.shape = Shape::vector(outputs);
  node.value = ConstRowMap(weights.value().data(), outputs, inputs) * input.value() + bias.value();
  node.inputs = {input.id, weights.id, bias.id};
  node.requires_grad =
      g.node(input.id).requires_grad || g.node(weights.id).requires_grad || g.node(bias.id).requires_grad;
  node.backward = [outputs, inputs](Graph &graph, int self) {
    Graph::Node &o = graph.node(self);
    Graph::Node &xin = graph.node(o.inputs[0]);
    Graph::Node &win = graph.node(o.inputs[1]);
    Graph::Node &bin = graph.node(o.inputs[2]);
    if (win.requires_grad)
      RowMap(win.grad.data(), outputs, inputs).noalias() += o.grad * xin.value.transpose();
    if (bin.requires_grad) bin.grad += o.grad;
    if (xin.requires_grad)
      xin.grad.noalias() += ConstRowMap(win.value.data(), outputs, inputs).transpose() * o.grad;
  };
  return g.push(std::move(node));
}

Var relu(Var input) {
  return unary(
      input, Op::relu, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var input, double slope) {
  return unary(
      input, Op::leaky_relu, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var input) {
  return unary(
      input, Op::sigmoid, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var input) {
  return unary(
      input, Op::softplus,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var upsample_nearest(Var input, int factor) {
  Graph &g = graph_of(input);
  const Shape &xs = input.shape();
  require_rank(xs, 3, "upsample_nearest");
  if (factor < 1) throw ContractError("upsample_nearest: factor must be >= 1");
  const Index channels = xs[0], height = xs[1], width = xs[2];
  const Index out_h = height * factor, out_w = width * factor;

  Graph::Node node;
  node.op = Op::upsample;
  node.shape = Shape::image(channels, out_h, out_w);
  node.value.resize(channels * out_h * out_w);
  const Vector &x = input.value();
  for (Index c = 0; c < channels; ++c)
    for (Index y = 0; y < out_h; ++y)
      for (Index xx = 0; xx < out_w; ++xx)
        node.value[(c * out_h + y) * out_w + xx] = x[(c * height + y / factor) * width + xx / factor];
  node.inputs = {input.id};
  node.requires_grad = g.node(input.id).requires_grad;
  node.backward = [=](Graph &graph, int self) {
    Graph::Node &o = graph.node(self);
    Graph::Node &src = graph.node(o.inputs[0]);
    for (Index c = 0; c < channels; ++c)
      for (Index y = 0; y < out_h; ++y)
        for (Index xx = 0; xx < out_w; ++xx)
          src.grad[(c * height + y / factor) * width + xx / factor] +=
              o.grad[(c * out_h + y) * out_w + xx];
  };
  return g.push(std::move(node));
}

Var concat_channels(Var a, Var b) {
  Graph &g = graph_of(a, b);
  const Shape &as = a.shape();
  const Shape &bs = b.shape();
  require_rank(as, 3, "concat_channels");
  require_rank(bs, 3, "concat_channels");
  if (as[1] != bs[1] || as[2] != bs[2])
    throw ShapeError("concat_channels: spatial mismatch " + as.str() + " vs " + bs.str());
  const Index na = as.size();
  const Index nb = bs.size();

  Graph::Node node;
  node.op = Op::concat;
  node.shape = Shape::image(as[0] + bs[0], as[1], as[2]);
  node.value.resize(na + nb);
  node.value << a.value(), b.value();
  node.inputs = {a.id, b.id};
  node.requires_grad = g.node(a.id).requires_grad || g.node(b.id).requires_grad;
  node.backward = [na, nb](Graph &graph, int self) {
    Graph::Node &o = graph.node(self);
    Graph::Node &first = graph.node(o.inputs[0]);
    Graph::Node &second = graph.node(o.inputs[1]);
    if (first.requires_grad) first.grad += o.grad.head(na);
    if (second.requires_grad) second.grad += o.grad.tail(nb);
  };
  return g.push(std::move(node));
}

Var instance_norm(Var input, Var gain, Var shift, double epsilon) {
  Graph &g = graph_of(input, gain);
  graph_of(input, shift);
  const Shape &xs = input.shape();
  require_rank(xs, 3, "instance_norm");
  const Index channels = xs[0];
  const Index area = xs[1] * xs[2];
  if (gain.shape().size() != channels || shift.shape().size() != channels)
    throw ShapeError("instance_norm: affine parameters must have one entry per channel");

  auto normalized = std::make_shared<Vector>(xs.size());
  auto inv_std = std::make_shared<Vector>(channels);
  const Vector &x = input.value();
  const Vector &gamma = gain.value();
  const Vector &beta = shift.value();

  Graph::Node node;
  node.op = Op::instance_norm;
  node.shape = xs;
  node.value.resize(xs.size());
  for (Index c = 0; c < channels; ++c) {
    const auto slab = x.segment(c * area, area);
    const double mean = slab.mean();
    const double var = (slab.array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + epsilon);
    (*inv_std)[c] = inv;
    normalized->segment(c * area, area) = (slab.array() - mean) * inv;
    node.value.segment(c * area, area) =
        gamma[c] * normalized->segment(c * area, area).array() + beta[c];
  }
  node.inputs = {input.id, gain.id, shift.id};
  node.requires_grad =
      g.node(input.id).requires_grad || g.node(gain.id).requires_grad || g.node(shift.id).requires_grad;
  node.backward = [=](Graph &graph, int self) {
    Graph::Node &o = graph.node(self);
    Graph::Node &xin = graph.node(o.inputs[0]);
    Graph::Node &gin = graph.node(o.inputs[1]);
    Graph::Node &bin = graph.node(o.inputs[2]);
    const double n = static_cast<double>(area);
    for (Index c = 0; c < channels; ++c) {
      const auto dy = o.grad.segment(c * area, area);
      const auto xhat = normalized->segment(c * area, area);
      if (gin.requires_grad) gin.grad[c] += dy.dot(xhat);
      if (bin.requires_grad) bin.grad[c] += dy.sum();
      if (!xin.requires_grad) continue;
      const double gamma_c = gin.value[c];
      const double sum_dxhat = gamma_c * dy.sum();
      const double sum_dxhat_xhat = gamma_c * dy.dot(xhat);
      xin.grad.segment(c * area, area).array() +=
          ((*inv_std)[c] / n) *
          (n * gamma_c * dy.array() - sum_dxhat - xhat.array() * sum_dxhat_xhat);
    }
  };
  return g.push(std::move(node));
}

Var lmm_compose(const std::vector<Var> &maps, const std::vector<Var> &sigs) {
  if (maps.empty() || maps.size() != sigs.size())
    throw ShapeError("lmm_compose: need equally many (and at least one) maps and signatures");
  Graph &g = graph_of(maps.front());
  const Shape &ms = maps.front().shape();
  const Index area = ms.size();
  const Index bands = sigs.front().shape().size();
  Index rows = ms.rank() == 3 ? ms[1] : (ms.rank() == 2 ? ms[0] : area);
  Index cols = ms.rank() == 3 ? ms[2] : (ms.rank() == 2 ? ms[1] : 1);
  const Index count = static_cast<Index>(maps.size());

  Eigen::MatrixXd spectra(bands, count);
  Eigen::MatrixXd abundances(area, count);
  Graph::Node node;
  node.op = Op::lmm;
  for (Index r = 0; r < count; ++r) {
    const Var m = maps[static_cast<std::size_t>(r)];
    const Var s = sigs[static_cast<std::size_t>(r)];
    graph_of(m, s);
    graph_of(m, maps.front());
    if (m.shape().size() != area) throw ShapeError("lmm_compose: abundance maps differ in size");
    if (s.shape().size() != bands) throw ShapeError("lmm_compose: signatures differ in length");
    abundances.col(r) = m.value();
    spectra.col(r) = s.value();
    node.inputs.push_back(m.id);
    node.inputs.push_back(s.id);
    node.requires_grad = node.requires_grad || g.node(m.id).requires_grad || g.node(s.id).requires_grad;
  }
  node.shape = Shape::image(bands, rows, cols);
  node.value.resize(bands * area);
  RowMap(node.value.data(), bands, area).noalias() = spectra * abundances.transpose();
  node.backward = [bands, area, count](Graph &graph, int self) {
    Graph::Node &o = graph.node(self);
    ConstRowMap dout(o.grad.data(), bands, area);
    for (Index r = 0; r < count; ++r) {
      Graph::Node &m = graph.node(o.inputs[static_cast<std::size_t>(2 * r)]);
      Graph::Node &s = graph.node(o.inputs[static_cast<std::size_t>(2 * r + 1)]);
      if (m.requires_grad) m.grad.noalias() += dout.transpose() * s.value;
      if (s.requires_grad) s.grad.noalias() += dout * m.value;
    }
  };
  return g.push(std::move(node));
}

Var squared_distance(Var input, const Vector &target) {
  Graph &g = graph_of(input);
  if (target.size() != input.shape().size())
    throw ShapeError("squared_distance: target has " + std::to_string(target.size()) +
                     " entries, input " + input.shape().str());
  auto diff = std::make_shared<Vector>(input.value() - target);
  Graph::Node node;
  node.op = Op::squared_distance;
  node.shape = Shape::vector(1);
  double acc = 0.0;
  for (Index n = 0; n < diff->size(); ++n) acc += (*diff)[n] * (*diff)[n];
  node.value = Vector::Constant(1, acc);
  node.inputs = {input.id};
  node.requires_grad = g.node(input.id).requires_grad;
  node.backward = [diff](Graph &graph, int self) {
    Graph::Node &o = graph.node(self);
    graph.node(o.inputs[0]).grad += (2.0 * o.grad[0]) * (*diff);
  };
  return g.push(std::move(node));
}

Var sum(Var input) {
  Graph &g = graph_of(input);
  Graph::Node node;
  node.op = Op::sum;
  node.shape = Shape::vector(1);
  node.value = Vector::Constant(1, input.value().sum());
  node.inputs = {input.id};
  node.requires_grad = g.node(input.id).requires_grad;
  node.backward = [](Graph &graph, int self) {
    Graph::Node &o = graph.node(self);
    graph.node(o.inputs[0]).grad.array() += o.grad[0];
  };
  return g.push(std::move(node));
}

} // namespace ds2dp::ad
