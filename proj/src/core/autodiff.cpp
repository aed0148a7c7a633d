// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"
#include "core/linalg.hpp"

namespace agrad {
namespace {

std::string describe(const Node& n, NodeId id) {
  std::string out = "node #" + std::to_string(id) + " (" + std::string(to_string(n.kind));
  if (!n.name.empty()) out += " '" + n.name + "'";
  return out + ")";
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
}

struct ConvDims {
  std::size_t n, c, h, w, o, k, pad, oh, ow;
  std::size_t patch() const { return c * k * k; }
  std::size_t pixels() const { return oh * ow; }
};

void im2col(const ConvDims& d, const double* x, double* cols) {
  for (std::size_t ch = 0; ch < d.c; ++ch)
    for (std::size_t ki = 0; ki < d.k; ++ki)
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        double* row = cols + ((ch * d.k + ki) * d.k + kj) * d.pixels();
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(d.pad);
          double* dst = row + oy * d.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) {
            std::fill(dst, dst + d.ow, 0.0);
            continue;
          }
          const double* src = x + (ch * d.h + static_cast<std::size_t>(iy)) * d.w;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(d.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) ? 0.0 : src[ix];
          }
        }
      }
}

void col2im_add(const ConvDims& d, const double* cols, double* dx) {
  for (std::size_t ch = 0; ch < d.c; ++ch)
    for (std::size_t ki = 0; ki < d.k; ++ki)
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        const double* row = cols + ((ch * d.k + ki) * d.k + kj) * d.pixels();
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(d.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
          double* dst = dx + (ch * d.h + static_cast<std::size_t>(iy)) * d.w;
          const double* src = row + oy * d.ow;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(d.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(d.w)) dst[ix] += src[ox];
          }
        }
      }
}

Node make_node(OpKind kind, std::vector<NodeId> inputs) {
  Node n;
  n.kind = kind;
  n.inputs = std::move(inputs);
  return n;
}

}  // namespace

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kIdentity: return "identity";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kFlatten: return "flatten";
    case OpKind::kMaxPool2: return "maxpool2";
    case OpKind::kSoftmaxCrossEntropy: return "softmax-cross-entropy";
    case OpKind::kActivation: return "activation";
    case OpKind::kQuantNoise: return "quant-noise";
  }
  return "unknown";
}

NodeId Graph::push(Node node) {
  for (NodeId in : node.inputs) check_id(in);
  const NodeId id = nodes_.size();
  if (!node.name.empty()) {
    if (by_name_.count(node.name)) throw ConfigError("duplicate node name '" + node.name + "'");
    by_name_.emplace(node.name, id);
  }
  nodes_.push_back(std::move(node));
  forward_done_ = false;
  return id;
}

void Graph::check_id(NodeId id) const {
  if (id >= nodes_.size()) throw ShapeError("unknown node id " + std::to_string(id));
}

NodeId Graph::input(std::string name) {
  if (name.empty()) throw ConfigError("inputs need a name");
  Node n;
  n.kind = OpKind::kInput;
  n.name = std::move(name);
  return push(std::move(n));
}

NodeId Graph::parameter(std::string name, Tensor init) {
  if (name.empty()) throw ConfigError("parameters need a name");
  Node n;
  n.kind = OpKind::kParameter;
  n.name = std::move(name);
  n.value = std::move(init);
  return push(std::move(n));
}

NodeId Graph::identity(NodeId x) { return push(make_node(OpKind::kIdentity, {x})); }
NodeId Graph::matmul(NodeId a, NodeId b) { return push(make_node(OpKind::kMatMul, {a, b})); }
NodeId Graph::add(NodeId a, NodeId b) { return push(make_node(OpKind::kAdd, {a, b})); }
NodeId Graph::mul(NodeId a, NodeId b) { return push(make_node(OpKind::kMul, {a, b})); }

NodeId Graph::scale(NodeId x, double factor) {
  Node n = make_node(OpKind::kScale, {x});
  n.factor = factor;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) { return push(make_node(OpKind::kSum, {x})); }

NodeId Graph::conv2d(NodeId x, NodeId w, NodeId b, std::size_t padding) {
  Node n = make_node(OpKind::kConv2d, {x, w, b});
  n.padding = padding;
  return push(std::move(n));
}

NodeId Graph::flatten(NodeId x) { return push(make_node(OpKind::kFlatten, {x})); }
NodeId Graph::maxpool2(NodeId x) { return push(make_node(OpKind::kMaxPool2, {x})); }

NodeId Graph::softmax_cross_entropy(NodeId logits, NodeId labels) {
  return push(make_node(OpKind::kSoftmaxCrossEntropy, {logits, labels}));
}

NodeId Graph::activation(NodeId x, ActivationSpec spec) {
  spec.validate();
  if (spec.is_glu()) throw ConfigError("gated activations are not elementwise graph ops", "activation.kind");
  Node n = make_node(OpKind::kActivation, {x});
  n.activation = spec;
  return push(std::move(n));
}

NodeId Graph::quant_noise(NodeId x, const QuantNoiseSpec& spec, std::uint64_t stream_id) {
  spec.validate();
  Node n = make_node(OpKind::kQuantNoise, {x});
  n.noise = spec.resolved();
  n.stream_id = stream_id;
  return push(std::move(n));
}

void Graph::set_output(std::string name, NodeId id) {
  check_id(id);
  outputs_.emplace_back(std::move(name), id);
}

NodeId Graph::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("no node named '" + std::string(name) + "'");
  return it->second;
}

bool Graph::contains(std::string_view name) const noexcept { return by_name_.find(name) != by_name_.end(); }

std::vector<NodeId> Graph::parameters() const {
  std::vector<NodeId> out;
  for (NodeId id = 0; id < nodes_.size(); ++id)
    if (nodes_[id].kind == OpKind::kParameter) out.push_back(id);
  return out;
}

Tensor& Graph::parameter_value(std::string_view name) {
  Node& n = nodes_.at(find(name));
  if (n.kind != OpKind::kParameter) throw ConfigError("'" + std::string(name) + "' is not a parameter");
  forward_done_ = false;
  return n.value;
}

const Tensor& Graph::parameter_value(std::string_view name) const {
  const Node& n = nodes_.at(find(name));
  if (n.kind != OpKind::kParameter) throw ConfigError("'" + std::string(name) + "' is not a parameter");
  return n.value;
}

std::size_t Graph::count(OpKind kind) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [kind](const Node& n) { return n.kind == kind; }));
}

TensorMap Graph::forward(const Bindings& bindings, const ForwardOptions& options) {
  forward_done_ = false;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (n.kind == OpKind::kInput) {
      auto it = bindings.find(n.name);
      if (it == bindings.end()) throw StateError("unbound input '" + n.name + "'");
      n.value = it->second;
      continue;
    }
    if (n.kind == OpKind::kParameter) continue;
    try {
      forward_node(n, options);
    } catch (const ShapeError& e) {
      throw ShapeError(describe(n, id) + ": " + e.what());
    }
  }
  forward_done_ = true;
  TensorMap out;
  for (const auto& [name, id] : outputs_) out.emplace(name, nodes_[id].value);
  return out;
}

void Graph::forward_node(Node& n, const ForwardOptions& options) {
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

  switch (n.kind) {
    case OpKind::kIdentity:
    case OpKind::kFlatten: {
      const Tensor& x = in(0);
      if (n.kind == OpKind::kIdentity || x.rank() < 2) {
        n.value = x;
      } else {
        n.value = x.reshaped({x.dim(0), x.size() / x.dim(0)});
      }
      break;
    }
    case OpKind::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
      n.value = Tensor({a.dim(0), b.dim(1)});
      linalg::gemm_nn(a.dim(0), b.dim(1), a.dim(1), a.data().data(), b.data().data(), n.value.data().data());
      break;
    }
    case OpKind::kAdd: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      n.value = a;
      auto out = n.value.data();
      if (a.same_shape(b)) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += b[k];
      } else if (b.rank() == 1 && b.size() == a.shape().back()) {
        const std::size_t width = b.size();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += b[k % width];
      } else {
        throw ShapeError("cannot add " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (!a.same_shape(b)) throw ShapeError("cannot multiply " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
      n.value = a;
      for (std::size_t k = 0; k < a.size(); ++k) n.value[k] *= b[k];
      break;
    }
    case OpKind::kScale: {
      n.value = in(0);
      for (auto& v : n.value.data()) v *= n.factor;
      break;
    }
    case OpKind::kSum: {
      double acc = 0.0;
      for (double v : in(0).data()) acc += v;
      n.value = Tensor::scalar(acc);
      break;
    }
    case OpKind::kConv2d: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const Tensor& b = in(2);
      if (x.rank() != 4 || w.rank() != 4 || w.dim(2) != w.dim(3) || x.dim(1) != w.dim(1))
        throw ShapeError("conv2d expects x [N,C,H,W] and w [O,C,K,K], got " + shape_str(x.shape()) + " and " +
                         shape_str(w.shape()));
      if (b.rank() != 1 || b.size() != w.dim(0))
        throw ShapeError("conv2d bias " + shape_str(b.shape()) + " does not match " + std::to_string(w.dim(0)) +
                         " output channels");
      ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), n.padding, 0, 0};
      if (d.h + 2 * d.pad < d.k || d.w + 2 * d.pad < d.k)
        throw ShapeError("conv2d kernel larger than padded input " + shape_str(x.shape()));
      d.oh = d.h + 2 * d.pad - d.k + 1;
      d.ow = d.w + 2 * d.pad - d.k + 1;
      n.value = Tensor({d.n, d.o, d.oh, d.ow});
      std::vector<double> cols(d.patch() * d.pixels());
      const std::size_t in_stride = d.c * d.h * d.w;
      const std::size_t out_stride = d.o * d.pixels();
      for (std::size_t s = 0; s < d.n; ++s) {
        im2col(d, x.data().data() + s * in_stride, cols.data());
        double* out = n.value.data().data() + s * out_stride;
        for (std::size_t o = 0; o < d.o; ++o) std::fill(out + o * d.pixels(), out + (o + 1) * d.pixels(), b[o]);
        linalg::gemm_nn(d.o, d.pixels(), d.patch(), w.data().data(), cols.data(), out);
      }
      break;
    }
    case OpKind::kMaxPool2: {
      const Tensor& x = in(0);
      if (x.rank() != 4 || x.dim(2) < 2 || x.dim(3) < 2)
        throw ShapeError("maxpool2 expects [N,C,H,W] with H,W >= 2, got " + shape_str(x.shape()));
      const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
      const std::size_t oh = h / 2, ow = w / 2;
      n.value = Tensor({x.dim(0), x.dim(1), oh, ow});
      n.argmax.assign(n.value.size(), 0);
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            std::size_t best = p * h * w + (2 * oy) * w + 2 * ox;
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t idx = p * h * w + (2 * oy + dy) * w + 2 * ox + dx;
                if (x[idx] > x[best]) best = idx;
              }
            const std::size_t o = (p * oh + oy) * ow + ox;
            n.value[o] = x[best];
            n.argmax[o] = best;
          }
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      const Tensor& logits = in(0);
      const Tensor& labels = in(1);
      if (logits.rank() != 2) throw ShapeError("logits must be [N,K], got " + shape_str(logits.shape()));
      const std::size_t rows = logits.dim(0), classes = logits.dim(1);
      if (labels.size() != rows)
        throw ShapeError("expected " + std::to_string(rows) + " labels, got " + std::to_string(labels.size()));
      n.aux = Tensor(logits.shape());
      double loss = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double label = labels[r];
        if (!(label >= 0) || label >= static_cast<double>(classes) || label != std::floor(label))
          throw ShapeError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
        const double* z = logits.data().data() + r * classes;
        double* p = n.aux.data().data() + r * classes;
        const double zmax = *std::max_element(z, z + classes);
        double total = 0.0;
        for (std::size_t k = 0; k < classes; ++k) total += (p[k] = std::exp(z[k] - zmax));
        for (std::size_t k = 0; k < classes; ++k) p[k] /= total;
        loss += -(z[static_cast<std::size_t>(label)] - zmax - std::log(total));
      }
      n.value = Tensor::scalar(loss / static_cast<double>(rows));
      break;
    }
    case OpKind::kActivation: {
      const Tensor& x = in(0);
      n.value = Tensor(x.shape());
      for (std::size_t k = 0; k < x.size(); ++k) n.value[k] = act_eval(n.activation, x[k]);
      break;
    }
    case OpKind::kQuantNoise: {
      const Tensor& x = in(0);
      n.value = x;
      n.passes.assign(x.size(), 1);
      if (n.noise.has_stage(Stage::kClamp))
        for (std::size_t k = 0; k < x.size(); ++k)
          n.passes[k] = (x[k] >= n.noise.clamp_lo && x[k] <= n.noise.clamp_hi) ? 1 : 0;
      RngStream rng(options.noise_seed, n.stream_id);
      pipeline_inplace(n.value.data(), n.noise, *n.noise.sigma, rng, options.noise);
      break;
    }
    case OpKind::kInput:
    case OpKind::kParameter:
      break;
  }
}

TensorMap Graph::backward(NodeId loss) {
  check_id(loss);
  if (!forward_done_) throw StateError("backward called before forward");
  if (nodes_[loss].value.size() != 1)
    throw ShapeError("loss must be scalar, " + describe(nodes_[loss], loss) + " has shape " +
                     shape_str(nodes_[loss].value.shape()));
  for (auto& n : nodes_) n.gradient = n.value.empty() ? Tensor() : Tensor(n.value.shape());
  nodes_[loss].gradient[0] = 1.0;
  for (NodeId id = loss + 1; id-- > 0;) backward_node(nodes_[id]);

  TensorMap grads;
  for (NodeId id = 0; id <= loss; ++id)
    if (nodes_[id].is_leaf()) grads.emplace(nodes_[id].name, nodes_[id].gradient);
  return grads;
}

void Graph::backward_node(Node& n) {
  if (n.is_leaf()) return;
  const Tensor& g = n.gradient;
  auto grad_of = [&](std::size_t k) -> Tensor& { return nodes_[n.inputs[k]].gradient; };
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

  switch (n.kind) {
    case OpKind::kIdentity:
    case OpKind::kFlatten:
      add_into(grad_of(0), g);
      break;
    case OpKind::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.dim(0), k = a.dim(1), cols = b.dim(1);
      linalg::gemm_nt(m, k, cols, g.data().data(), b.data().data(), grad_of(0).data().data());
      linalg::gemm_tn(k, cols, m, a.data().data(), g.data().data(), grad_of(1).data().data());
      break;
    }
    case OpKind::kAdd: {
      add_into(grad_of(0), g);
      Tensor& gb = grad_of(1);
      if (gb.size() == g.size()) {
        add_into(gb, g);
      } else {
        const std::size_t width = gb.size();
        for (std::size_t k = 0; k < g.size(); ++k) gb[k % width] += g[k];
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor& ga = grad_of(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * b[k];
      Tensor& gb = grad_of(1);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * a[k];
      break;
    }
    case OpKind::kScale: {
      Tensor& ga = grad_of(0);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += n.factor * g[k];
      break;
    }
    case OpKind::kSum: {
      for (auto& v : grad_of(0).data()) v += g[0];
      break;
    }
    case OpKind::kConv2d: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), n.padding, n.value.dim(2), n.value.dim(3)};
      std::vector<double> cols(d.patch() * d.pixels());
      std::vector<double> dcols(cols.size());
      Tensor& gx = grad_of(0);
      Tensor& gw = grad_of(1);
      Tensor& gb = grad_of(2);
      const std::size_t in_stride = d.c * d.h * d.w;
      const std::size_t out_stride = d.o * d.pixels();
      for (std::size_t s = 0; s < d.n; ++s) {
        const double* gs = g.data().data() + s * out_stride;
        im2col(d, x.data().data() + s * in_stride, cols.data());
        linalg::gemm_nt(d.o, d.patch(), d.pixels(), gs, cols.data(), gw.data().data());
        for (std::size_t o = 0; o < d.o; ++o) {
          double acc = 0.0;
          for (std::size_t p = 0; p < d.pixels(); ++p) acc += gs[o * d.pixels() + p];
          gb[o] += acc;
        }
        std::fill(dcols.begin(), dcols.end(), 0.0);
        linalg::gemm_tn(d.patch(), d.pixels(), d.o, w.data().data(), gs, dcols.data());
        col2im_add(d, dcols.data(), gx.data().data() + s * in_stride);
      }
      break;
    }
    case OpKind::kMaxPool2: {
      Tensor& gx = grad_of(0);
      for (std::size_t k = 0; k < g.size(); ++k) gx[n.argmax[k]] += g[k];
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      const Tensor& labels = in(1);
      Tensor& gz = grad_of(0);
      const std::size_t rows = n.aux.dim(0), classes = n.aux.dim(1);
      const double scale = g[0] / static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto label = static_cast<std::size_t>(labels[r]);
        for (std::size_t k = 0; k < classes; ++k) {
          const double p = n.aux[r * classes + k] - (k == label ? 1.0 : 0.0);
          gz[r * classes + k] += scale * p;
        }
      }
      break;
    }
    case OpKind::kActivation: {
      const Tensor& x = in(0);
      Tensor& gx = grad_of(0);
      for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * act_derivative(n.activation, x[k]);
      break;
    }
    case OpKind::kQuantNoise: {
      Tensor& gx = grad_of(0);
      for (std::size_t k = 0; k < g.size(); ++k)
        if (n.passes[k]) gx[k] += g[k];
      break;
    }
    case OpKind::kInput:
    case OpKind::kParameter:
      break;
  }
}

double finite_diff_check(Graph& graph, NodeId loss, std::string_view leaf, const Tensor& point_ref, double eps,
                         Bindings bindings, const ForwardOptions& options) {
  const Tensor point = point_ref;  // may alias the parameter being perturbed
  if (!(eps > 0)) throw ConfigError("eps must be positive", "eps");
  const NodeId leaf_id = graph.find(leaf);
  const bool is_param = graph.node(leaf_id).kind == OpKind::kParameter;
  if (!graph.node(leaf_id).is_leaf()) throw ConfigError("'" + std::string(leaf) + "' is not a leaf");

  Tensor saved = is_param ? graph.parameter_value(leaf) : Tensor();
  auto set_leaf = [&](const Tensor& t) {
    if (is_param)
      graph.parameter_value(leaf) = t;
    else
      bindings[std::string(leaf)] = t;
  };
  auto loss_at = [&](const Tensor& t) {
    set_leaf(t);
    graph.forward(bindings, options);
    return graph.value(loss).item();
  };

  set_leaf(point);
  graph.forward(bindings, options);
  const Tensor analytic = graph.backward(loss).at(std::string(leaf));

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t j = 0; j < point.size(); ++j) {
    probe[j] = point[j] + eps;
    const double up = loss_at(probe);
    probe[j] = point[j] - eps;
    const double down = loss_at(probe);
    probe[j] = point[j];
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[j] - numeric) / std::max(std::abs(analytic[j]), 1e-8);
    if (!std::isfinite(err)) {
      if (is_param) graph.parameter_value(leaf) = saved;
      throw NumericError("finite-difference check produced a non-finite value at component " + std::to_string(j));
    }
    worst = std::max(worst, err);
  }
  if (is_param) graph.parameter_value(leaf) = saved;
  return worst;
}

}  // namespace agrad
