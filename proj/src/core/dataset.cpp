// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "core/error.hpp"
#include "core/format.hpp"
#include "core/rng.hpp"

namespace agrad {

std::span<const double> Dataset::sample(std::size_t k) const {
  const std::size_t width = sample_size();
  return std::span<const double>(features).subspan(k * width, width);
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ShapeError("empty batch");
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  std::vector<double> data;
  data.reserve(indices.size() * sample_size());
  for (auto k : indices) {
    auto s = sample(k);
    data.insert(data.end(), s.begin(), s.end());
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor Dataset::batch_labels(std::span<const std::size_t> indices) const {
  Tensor out({indices.size()});
  for (std::size_t k = 0; k < indices.size(); ++k) out[k] = labels.at(indices[k]);
  return out;
}

void Dataset::append(std::span<const double> sample, int label) {
  if (sample.size() != sample_size())
    throw ShapeError("sample has " + std::to_string(sample.size()) + " values, expected " +
                     std::to_string(sample_size()));
  features.insert(features.end(), sample.begin(), sample.end());
  labels.push_back(label);
}

void Dataset::validate() const {
  if (sample_shape.empty()) throw ShapeError("dataset has no sample shape");
  if (features.size() != labels.size() * sample_size()) throw ShapeError("dataset features and labels disagree");
  for (int label : labels)
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw ShapeError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
}

namespace {

struct Canvas {
  std::size_t size;
  std::vector<double> pixels;

  explicit Canvas(std::size_t n) : size(n), pixels(n * n, 0.0) {}
  double& at(std::size_t y, std::size_t x) { return pixels[y * size + x]; }
};

using Painter = std::function<double(double y, double x)>;

// Each generator returns ink intensity in [0, 1] at pixel (y, x) relative to
// a jittered centre (cy, cx), for a sample-specific scale r and phase.
struct Params {
  double cy, cx, r, phase;
};

double stripes(double coord, double period, double phase) {
  return 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (coord / period + phase));
}

double paint(std::size_t cls, const Params& p, double y, double x) {
  const double dy = y - p.cy, dx = x - p.cx;
  const double dist = std::hypot(dy, dx);
  const double period = 2.0 + p.r / 3.0;
  switch (cls % 10) {
    case 0:  // horizontal bars
      return stripes(y, period, p.phase) > 0.5 ? 1.0 : 0.0;
    case 1:  // vertical bars
      return stripes(x, period, p.phase) > 0.5 ? 1.0 : 0.0;
    case 2:  // filled disk
      return dist <= p.r ? 1.0 : 0.0;
    case 3:  // ring
      return std::abs(dist - p.r) <= 1.0 ? 1.0 : 0.0;
    case 4:  // upright cross
      return (std::abs(dy) <= 1.0 || std::abs(dx) <= 1.0) && std::max(std::abs(dy), std::abs(dx)) <= p.r + 1 ? 1.0 : 0.0;
    case 5:  // diagonal cross
      return (std::abs(dy - dx) <= 1.2 || std::abs(dy + dx) <= 1.2) && dist <= p.r + 1.5 ? 1.0 : 0.0;
    case 6:  // square outline
      return std::abs(std::max(std::abs(dy), std::abs(dx)) - p.r) <= 0.8 ? 1.0 : 0.0;
    case 7:  // checkerboard
      return (stripes(y, period, p.phase) > 0.5) != (stripes(x, period, p.phase) > 0.5) ? 1.0 : 0.0;
    case 8:  // triangle pointing up
      return (dy <= p.r * 0.8 && dy >= -p.r && std::abs(dx) <= (dy + p.r) * 0.6) ? 1.0 : 0.0;
    default:  // diagonal stripes
      return stripes(x + y, period * 1.4, p.phase) > 0.5 ? 1.0 : 0.0;
  }
}

}  // namespace

DatasetSplit generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ConfigError("at least two classes are required", "dataset.classes");
  if (spec.samples_per_class < 6)
    throw ConfigError("at least 6 samples per class are needed for a 5:1 split", "dataset.samples_per_class");
  if (spec.image_size < 4) throw ConfigError("image size must be at least 4", "dataset.image_size");

  const std::size_t n = spec.image_size;
  const double mid = 0.5 * static_cast<double>(n - 1);
  DatasetSplit split;
  for (Dataset* d : {&split.train, &split.test}) {
    d->sample_shape = {1, n, n};
    d->classes = spec.classes;
  }
  const std::size_t train_per_class = spec.samples_per_class * 5 / 6;

  // Interleave classes so either split is balanced at every prefix.
  for (std::size_t k = 0; k < spec.samples_per_class; ++k)
    for (std::size_t cls = 0; cls < spec.classes; ++cls) {
      RngStream rng(spec.seed, cls * 1000003ULL + k);
      const double scale = static_cast<double>(n) / 16.0;
      Params p{mid + (rng.uniform() - 0.5) * 4.0 * scale, mid + (rng.uniform() - 0.5) * 4.0 * scale,
               (3.0 + rng.uniform() * 2.5) * scale, rng.uniform()};
      const double contrast = 0.6 + 0.4 * rng.uniform();
      // Classes past the tenth reuse a generator at a different base level.
      const double base = -0.8 + 0.15 * static_cast<double>(cls / 10);
      Canvas canvas(n);
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
          const double ink = paint(cls, p, static_cast<double>(y), static_cast<double>(x));
          const double v = base + 1.6 * contrast * ink + spec.pixel_noise * rng.normal();
          canvas.at(y, x) = std::clamp(v, -1.0, 1.0);
        }
      Dataset& target = k < train_per_class ? split.train : split.test;
      target.append(canvas.pixels, static_cast<int>(cls));
    }
  return split;
}

void write_csv_dataset(const std::string& path, const Dataset& data) {
  data.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "label";
  for (std::size_t k = 0; k < data.sample_size(); ++k) out << ",v" << k;
  out << '\n';
  for (std::size_t s = 0; s < data.size(); ++s) {
    out << data.labels[s];
    for (double v : data.sample(s)) out << ',' << format_real(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

namespace {

bool parse_double(std::string_view text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Dataset read_csv_dataset(const std::string& path, Shape sample_shape, std::size_t classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  int max_label = -1;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    row.clear();
    std::size_t start = 0;
    bool numeric = true;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      double v = 0;
      if (!parse_double(std::string_view(line).substr(start, end - start), v)) numeric = false;
      row.push_back(v);
      start = end + 1;
    }
    if (!numeric) {
      if (line_no == 1) continue;  // header
      throw IoError(path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (row.size() < 2) throw IoError(path + ":" + std::to_string(line_no) + ": expected label and values");
    if (width == 0) width = row.size() - 1;
    if (row.size() - 1 != width)
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) + " values, got " +
                    std::to_string(row.size() - 1));
    const double label = row[0];
    if (label < 0 || label != std::floor(label))
      throw IoError(path + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    data.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
    data.features.insert(data.features.end(), row.begin() + 1, row.end());
  }
  if (data.labels.empty()) throw IoError(path + ": no samples");

  if (sample_shape.empty()) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(width))));
    sample_shape = side * side == width ? Shape{1, side, side} : Shape{width};
  }
  if (shape_size(sample_shape) != width)
    throw IoError(path + ": rows have " + std::to_string(width) + " values but the sample shape " +
                  shape_str(sample_shape) + " needs " + std::to_string(shape_size(sample_shape)));
  data.sample_shape = std::move(sample_shape);
  data.classes = classes ? classes : static_cast<std::size_t>(max_label + 1);
  try {
    data.validate();
  } catch (const ShapeError& e) {
    throw IoError(path + ": " + e.what());
  }
  return data;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError(path + ": truncated idx header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

Dataset read_idx_dataset(const std::string& images_path, const std::string& labels_path, std::size_t classes) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw IoError("cannot open " + images_path);
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw IoError("cannot open " + labels_path);

  const std::uint32_t image_magic = read_be32(images, images_path);
  if ((image_magic >> 8) != 0x08 || (image_magic & 0xFF) < 3)
    throw IoError(images_path + ": not an unsigned-byte idx image file");
  const std::uint32_t dims = image_magic & 0xFF;
  std::vector<std::uint32_t> extents(dims);
  for (auto& e : extents) e = read_be32(images, images_path);

  if (read_be32(labels, labels_path) != 0x00000801) throw IoError(labels_path + ": not an idx1 label file");
  const std::uint32_t count = read_be32(labels, labels_path);
  if (count != extents[0])
    throw IoError("image count " + std::to_string(extents[0]) + " does not match label count " + std::to_string(count));

  Dataset data;
  if (dims == 3)
    data.sample_shape = {1, extents[1], extents[2]};
  else
    data.sample_shape = {extents[1], extents[2], extents[3]};  // [C, H, W]
  const std::size_t width = data.sample_size();
  std::vector<unsigned char> raw(width * count);
  if (!images.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw IoError(images_path + ": truncated pixel data");
  std::vector<unsigned char> raw_labels(count);
  if (!labels.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(count)))
    throw IoError(labels_path + ": truncated label data");

  data.features.resize(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) data.features[k] = 2.0 * raw[k] / 255.0 - 1.0;
  data.labels.assign(raw_labels.begin(), raw_labels.end());
  const int max_label = data.labels.empty() ? 0 : *std::max_element(data.labels.begin(), data.labels.end());
  data.classes = classes ? classes : static_cast<std::size_t>(max_label + 1);
  data.validate();
  return data;
}

Dataset to_grayscale(const Dataset& data) {
  if (data.sample_shape.size() != 3 || data.sample_shape[0] != 3) return data;
  const std::size_t plane = data.sample_shape[1] * data.sample_shape[2];
  Dataset out;
  out.sample_shape = {1, data.sample_shape[1], data.sample_shape[2]};
  out.classes = data.classes;
  out.labels = data.labels;
  out.features.resize(data.size() * plane);
  for (std::size_t s = 0; s < data.size(); ++s) {
    auto px = data.sample(s);
    for (std::size_t k = 0; k < plane; ++k)
      out.features[s * plane + k] = 0.299 * px[k] + 0.587 * px[plane + k] + 0.114 * px[2 * plane + k];
  }
  return out;
}

}  // namespace agrad
