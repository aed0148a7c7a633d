// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/dataset.hpp"
#include "core/models.hpp"

namespace agrad {

enum class Optimizer { kSgd, kAdam };

std::string_view to_string(Optimizer opt);
std::optional<Optimizer> parse_optimizer(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  std::uint64_t seed = 1;
  bool eval_noise = true;  // keep analog noise active at evaluation

  void validate(std::string_view path = "train") const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_top1 = 0.0;
  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

enum class TrainStatus { kCompleted, kDiverged };
std::string_view to_string(TrainStatus status);

struct TrainResult {
  TrainStatus status = TrainStatus::kCompleted;
  std::vector<EpochMetrics> history;
  double final_top1 = 0.0;
  std::size_t diverged_at_step = 0;  // only meaningful when diverged
};

/// Mini-batch training with fresh noise on every forward pass. The
/// partial history is kept if the loss becomes non-finite.
TrainResult train(Model& model, const DatasetSplit& data, const TrainConfig& tc);

/// Top-1 accuracy on `split`. Noise follows `noise`; the stream is fixed by
/// `seed`, so repeated calls agree exactly.
double evaluate(Model& model, const Dataset& split, std::uint64_t seed, bool noise = true,
                std::size_t batch_size = 250);

struct InterpolationPoint {
  double i = 0.0;
  TrainResult result;
};

/// Trains one model per interpolation factor with the activation kind taken
/// from `base` (an interp-* kind). Every model starts from identical weights.
std::vector<InterpolationPoint> interpolation_sweep_train(const ModelConfig& base, const std::vector<double>& i_values,
                                                          const DatasetSplit& data, const TrainConfig& tc);

/// Replaces the activation of every activation layer.
ModelConfig with_activation(ModelConfig config, const ActivationSpec& act);

}  // namespace agrad
