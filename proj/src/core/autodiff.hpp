// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "core/activations.hpp"
#include "core/quant_noise.hpp"
#include "core/tensor.hpp"

namespace agrad {

enum class OpKind {
  kInput,
  kParameter,
  kIdentity,
  kMatMul,
  kAdd,
  kMul,
  kScale,
  kSum,
  kConv2d,
  kFlatten,
  kMaxPool2,
  kSoftmaxCrossEntropy,
  kActivation,
  kQuantNoise,
};

std::string_view to_string(OpKind kind);

using NodeId = std::size_t;
using Bindings = std::map<std::string, Tensor>;
using TensorMap = std::map<std::string, Tensor>;

struct Node {
  OpKind kind = OpKind::kIdentity;
  std::string name;
  std::vector<NodeId> inputs;
  Tensor value;
  Tensor gradient;

  ActivationSpec activation;  // kActivation
  QuantNoiseSpec noise;       // kQuantNoise (resolved)
  std::uint64_t stream_id = 0;
  double factor = 1.0;        // kScale
  std::size_t padding = 0;    // kConv2d

  // Scratch filled by forward and consumed by backward.
  std::vector<std::size_t> argmax;   // kMaxPool2
  std::vector<std::uint8_t> passes;  // kQuantNoise: 1 where the clamp passed the input
  Tensor aux;                        // kSoftmaxCrossEntropy: probabilities

  /// Noise, quantization and clamp nodes: identity backward inside the clamp
  /// bounds, zero outside.
  bool straight_through() const noexcept { return kind == OpKind::kQuantNoise || kind == OpKind::kIdentity; }
  bool is_leaf() const noexcept { return kind == OpKind::kInput || kind == OpKind::kParameter; }
};

struct ForwardOptions {
  std::uint64_t noise_seed = 0;  // combined with each node's stream id
  bool noise = true;             // false skips the Gaussian stage of every pipeline
};

/// Reverse-mode autodiff over a DAG of tensor ops. Nodes may only consume
/// nodes created before them, so creation order is a topological order.
///
/// Shapes are inferred at forward time from the bound inputs, so the leading
/// (batch) extent of an input may change between calls.
class Graph {
 public:
  NodeId input(std::string name);
  NodeId parameter(std::string name, Tensor init);

  NodeId identity(NodeId x);
  /// [m x k] * [k x n]
  NodeId matmul(NodeId a, NodeId b);
  /// Same-shape sum, or `b` of rank 1 broadcast over the last axis of `a`.
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId sum(NodeId x);
  /// x [N,C,H,W], w [O,C,K,K], b [O]; stride 1, symmetric zero padding.
  NodeId conv2d(NodeId x, NodeId w, NodeId b, std::size_t padding);
  NodeId flatten(NodeId x);
  /// 2x2 window, stride 2; odd trailing rows/columns are dropped.
  NodeId maxpool2(NodeId x);
  /// Mean over the batch of -log softmax(logits)[label]. Labels are class
  /// indices stored as doubles, shape [N].
  NodeId softmax_cross_entropy(NodeId logits, NodeId labels);
  NodeId activation(NodeId x, ActivationSpec spec);
  /// Quantized-noise pipeline. Noise parameters are resolved at construction.
  NodeId quant_noise(NodeId x, const QuantNoiseSpec& spec, std::uint64_t stream_id);

  void set_output(std::string name, NodeId id);

  /// Evaluates every node. Returns the registered outputs by name.
  TensorMap forward(const Bindings& bindings, const ForwardOptions& options = {});
  /// d(loss)/d(leaf) for every leaf (inputs and parameters), by name.
  TensorMap backward(NodeId loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  const Tensor& gradient(NodeId id) const { return nodes_.at(id).gradient; }

  NodeId find(std::string_view name) const;
  bool contains(std::string_view name) const noexcept;
  std::vector<NodeId> parameters() const;
  Tensor& parameter_value(std::string_view name);
  const Tensor& parameter_value(std::string_view name) const;
  std::size_t count(OpKind kind) const noexcept;
  bool has_forward() const noexcept { return forward_done_; }

 private:
  NodeId push(Node node);
  void check_id(NodeId id) const;
  void forward_node(Node& n, const ForwardOptions& options);
  void backward_node(Node& n);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId, std::less<>> by_name_;
  std::vector<std::pair<std::string, NodeId>> outputs_;
  bool forward_done_ = false;
};

/// Compares backward() against central differences for every component of
/// `leaf` evaluated at `point`:
///   max_j |analytic_j - numeric_j| / max(|analytic_j|, 1e-8)
/// `bindings` supplies the other inputs. The graph is left at `point`'s
/// original leaf value afterwards.
double finite_diff_check(Graph& graph, NodeId loss, std::string_view leaf, const Tensor& point, double eps,
                         Bindings bindings = {}, const ForwardOptions& options = {});

}  // namespace agrad
