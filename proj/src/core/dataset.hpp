// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace agrad {

/// Labelled samples stored flat. Each sample has `sample_shape` (either
/// [C, H, W] for images or [F] for feature vectors).
struct Dataset {
  Shape sample_shape;
  std::size_t classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t sample_size() const { return shape_size(sample_shape); }
  std::span<const double> sample(std::size_t k) const;

  /// Stacks the selected samples into [B, ...sample_shape].
  Tensor batch(std::span<const std::size_t> indices) const;
  Tensor batch_labels(std::span<const std::size_t> indices) const;

  void append(std::span<const double> sample, int label);
  void validate() const;
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

/// Class-structured 16x16-style images with per-class shape or texture
/// generators, pixel values in [-1, 1].
struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t samples_per_class = 600;
  std::size_t image_size = 16;
  std::uint64_t seed = 1;
  double pixel_noise = 0.2;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Deterministic per spec. Each class is split 5:1 into train and test.
DatasetSplit generate_synthetic(const SyntheticSpec& spec);

/// One row per sample, label first, then the flattened sample values. The
/// first line is a header ("label,v0,v1,...").
void write_csv_dataset(const std::string& path, const Dataset& data);
/// Reads the CSV format above; a header line is optional. `sample_shape`
/// may be empty, in which case a square single-channel image is assumed when
/// the width is a perfect square and a flat feature vector otherwise.
/// `classes` of 0 means max(label) + 1.
Dataset read_csv_dataset(const std::string& path, Shape sample_shape = {}, std::size_t classes = 0);

/// Standard idx3 (images, unsigned byte) plus idx1 (labels) pair. Pixel bytes
/// are mapped to [-1, 1].
Dataset read_idx_dataset(const std::string& images_path, const std::string& labels_path, std::size_t classes = 0);

/// Converts [3, H, W] samples to [1, H, W] with luminance weights
/// 0.299 R + 0.587 G + 0.114 B. Other channel counts pass through.
Dataset to_grayscale(const Dataset& data);

}  // namespace agrad
