// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace agrad {

std::string_view to_string(Optimizer opt) { return opt == Optimizer::kSgd ? "sgd" : "adam"; }

std::optional<Optimizer> parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "adam") return Optimizer::kAdam;
  return std::nullopt;
}

std::string_view to_string(TrainStatus status) {
  return status == TrainStatus::kCompleted ? "completed" : "diverged";
}

void TrainConfig::validate(std::string_view path) const {
  const std::string p(path);
  if (epochs == 0) throw ConfigError("must be positive", p + ".epochs");
  if (batch_size == 0) throw ConfigError("must be positive", p + ".batch_size");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("must be a positive finite number", p + ".learning_rate");
}

namespace {

// Stream ids reserved for the trainer; noise nodes draw from per-step seeds.
constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kStepSalt = 0x73746570;
constexpr std::uint64_t kEvalSalt = 0x6576616c;

class OptimizerState {
 public:
  OptimizerState(const TrainConfig& tc, const Graph& g) : tc_(tc) {
    for (NodeId id : g.parameters()) {
      ids_.push_back(id);
      if (tc.optimizer == Optimizer::kAdam) {
        m_.emplace_back(g.value(id).size(), 0.0);
        v_.emplace_back(g.value(id).size(), 0.0);
      }
    }
  }

  void step(Graph& g) {
    ++t_;
    const double lr = tc_.learning_rate;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t p = 0; p < ids_.size(); ++p) {
      const Node& n = g.node(ids_[p]);
      auto w = g.parameter_value(n.name).data();
      auto grad = g.gradient(ids_[p]).data();
      if (tc_.optimizer == Optimizer::kSgd) {
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * grad[k];
        continue;
      }
      auto& m = m_[p];
      auto& v = v_[p];
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
        v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
        w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
      }
    }
  }

 private:
  const TrainConfig& tc_;
  std::vector<NodeId> ids_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

double evaluate(Model& model, const Dataset& split, std::uint64_t seed, bool noise, std::size_t batch_size) {
  if (split.size() == 0) throw StateError("cannot evaluate on an empty split");
  if (batch_size == 0) batch_size = split.size();
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0, b = 0; start < split.size(); start += batch_size, ++b) {
    const std::size_t end = std::min(split.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    ForwardOptions opts{combine_seed(combine_seed(seed, kEvalSalt), b), noise};
    auto out = model.graph.forward({{"x", split.batch(idx)}, {"y", split.batch_labels(idx)}}, opts);
    const Tensor& logits = out.at("logits");
    const std::size_t classes = logits.dim(1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto row = logits.data().subspan(r * classes, classes);
      if (static_cast<int>(argmax_row(row)) == split.labels[idx[r]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

TrainResult train(Model& model, const DatasetSplit& data, const TrainConfig& tc) {
  tc.validate();
  if (data.train.size() == 0 || data.test.size() == 0) throw StateError("train and test splits must be non-empty");
  if (tc.batch_size > data.train.size())
    throw ConfigError("batch size " + std::to_string(tc.batch_size) + " exceeds the training set (" +
                          std::to_string(data.train.size()) + ")",
                      "train.batch_size");
  if (data.train.sample_shape != model.config.input_shape)
    throw ShapeError("dataset samples are " + shape_str(data.train.sample_shape) + " but the model expects " +
                     shape_str(model.config.input_shape));

  TrainResult result;
  OptimizerState opt(tc, model.graph);
  RngStream shuffle(tc.seed, kShuffleStream);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> idx;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    // The trailing partial batch is dropped so every step sees batch_size samples.
    for (std::size_t start = 0; start + tc.batch_size <= order.size(); start += tc.batch_size) {
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                 order.begin() + static_cast<std::ptrdiff_t>(start + tc.batch_size));
      ForwardOptions opts{combine_seed(combine_seed(tc.seed, kStepSalt), step), true};
      auto out = model.graph.forward({{"x", data.train.batch(idx)}, {"y", data.train.batch_labels(idx)}}, opts);
      const double loss = out.at("loss").item();
      ++step;
      if (!std::isfinite(loss)) {
        result.status = TrainStatus::kDiverged;
        result.diverged_at_step = step;
        result.final_top1 = result.history.empty() ? 0.0 : result.history.back().test_top1;
        return result;
      }
      model.graph.backward(model.loss);
      opt.step(model.graph);
      loss_sum += loss;
      ++batches;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
    m.test_top1 = evaluate(model, data.test, combine_seed(tc.seed, epoch), tc.eval_noise);
    result.history.push_back(m);
  }
  result.final_top1 = result.history.back().test_top1;
  return result;
}

ModelConfig with_activation(ModelConfig config, const ActivationSpec& act) {
  for (auto& l : config.layers)
    if (l.kind == LayerKind::kActivation) l.activation = act;
  return config;
}

std::vector<InterpolationPoint> interpolation_sweep_train(const ModelConfig& base, const std::vector<double>& i_values,
                                                          const DatasetSplit& data, const TrainConfig& tc) {
  ActivationSpec act;
  for (const auto& l : base.layers)
    if (l.kind == LayerKind::kActivation) act = l.activation;
  if (!act.is_interp()) throw ConfigError("interpolation sweep needs an interp-* activation", "activation.kind");
  std::vector<InterpolationPoint> out;
  for (double i : i_values) {
    act.i = i;
    act.validate();
    Model model = build_model(with_activation(base, act), tc.seed);
    out.push_back({i, train(model, data, tc)});
  }
  return out;
}

}  // namespace agrad
