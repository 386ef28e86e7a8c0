// Copyright 2026 The fnproc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fnproc/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fnproc/rng.hpp"

namespace fnproc::data {
namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::filesystem::path& path) {
  if (buf.size() < offset + 4) {
    throw IdxError(IdxError::Kind::kTruncated, path.string() + ": truncated header");
  }
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

LabeledDataset make_regression(std::vector<double> xs, std::vector<double> ys) {
  LabeledDataset ds;
  ds.task = TaskKind::kRegression;
  ds.inputs = Matrix::column(std::move(xs));
  ds.values = std::move(ys);
  ds.split.assign(ds.values.size(), Split::kTrain);
  return ds;
}

}  // namespace

void LabeledDataset::validate() const {
  const std::size_t n = inputs.rows();
  if (split.size() != n) throw std::invalid_argument("dataset: split tags do not match inputs");
  if (task == TaskKind::kClassification) {
    if (labels.size() != n) throw std::invalid_argument("dataset: labels do not match inputs");
    for (int l : labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
        throw std::invalid_argument("dataset: class id " + std::to_string(l) + " out of range");
      }
    }
  } else if (values.size() != n) {
    throw std::invalid_argument("dataset: targets do not match inputs");
  }
}

std::vector<std::size_t> LabeledDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

Matrix LabeledDataset::inputs_at(std::span<const std::size_t> rows) const {
  Matrix out(rows.size(), inputs.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = inputs.row_span(rows[r]);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return out;
}

Matrix LabeledDataset::targets_at(std::span<const std::size_t> rows) const {
  if (task == TaskKind::kClassification) {
    Matrix out(rows.size(), num_classes);
    for (std::size_t r = 0; r < rows.size(); ++r) out(r, static_cast<std::size_t>(labels[rows[r]])) = 1.0;
    return out;
  }
  Matrix out(rows.size(), 1);
  for (std::size_t r = 0; r < rows.size(); ++r) out(r, 0) = values[rows[r]];
  return out;
}

void ReferenceSplit::validate() const {
  if (!base) throw std::invalid_argument("reference split: no dataset");
  if (reference.empty()) throw std::invalid_argument("reference split: R is empty");
  if (!std::is_sorted(reference.begin(), reference.end()) || !std::is_sorted(other.begin(), other.end())) {
    throw std::invalid_argument("reference split: index lists must be sorted");
  }
  std::vector<std::size_t> both;
  std::set_intersection(reference.begin(), reference.end(), other.begin(), other.end(), std::back_inserter(both));
  if (!both.empty()) throw std::invalid_argument("reference split: R and M overlap");
  std::vector<std::size_t> all;
  std::merge(reference.begin(), reference.end(), other.begin(), other.end(), std::back_inserter(all));
  if (all != base->indices(Split::kTrain)) {
    throw std::invalid_argument("reference split: R and M do not cover the training split");
  }
}

double toy1_target(double x, double eps) {
  const double s = x + eps;
  return s + std::sin(4.0 * s) + std::sin(13.0 * s);
}

double toy2_target(double x, double eps) { return x * x * x + eps; }

LabeledDataset gen_toy1(std::uint64_t seed) {
  NoiseStream rng(seed, 0, NoiseRole::kDataset, 1);
  std::vector<double> xs;
  std::vector<double> ys;
  for (int i = 0; i < 20; ++i) {
    const double u = rng.uniform();
    xs.push_back(i < 12 ? 0.6 * u : 0.8 + 0.2 * u);
  }
  for (double x : xs) ys.push_back(toy1_target(x, 0.03 * rng.normal()));
  return make_regression(std::move(xs), std::move(ys));
}

LabeledDataset gen_toy2(std::uint64_t seed) {
  NoiseStream rng(seed, 0, NoiseRole::kDataset, 2);
  std::vector<double> xs;
  std::vector<double> ys;
  for (int i = 0; i < 20; ++i) xs.push_back(-4.0 + 8.0 * rng.uniform());
  for (double x : xs) ys.push_back(toy2_target(x, 3.0 * rng.normal()));
  return make_regression(std::move(xs), std::move(ys));
}

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  if (read_be32(img, 0, images) != kIdxImageMagic) {
    throw IdxError(IdxError::Kind::kBadMagic, images.string() + ": not an IDX image file");
  }
  if (read_be32(lab, 0, labels) != kIdxLabelMagic) {
    throw IdxError(IdxError::Kind::kBadMagic, labels.string() + ": not an IDX label file");
  }
  const std::size_t count = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (count != label_count) {
    throw IdxError(IdxError::Kind::kCountMismatch, "IDX count mismatch: " + std::to_string(count) + " images vs " +
                                                       std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) {
    throw IdxError(IdxError::Kind::kTruncated, images.string() + ": truncated pixel data");
  }
  if (lab.size() < 8 + count) {
    throw IdxError(IdxError::Kind::kTruncated, labels.string() + ": truncated label data");
  }

  LabeledDataset ds;
  ds.task = TaskKind::kClassification;
  ds.num_classes = num_classes;
  ds.inputs = Matrix(count, pixels);
  for (std::size_t i = 0; i < count * pixels; ++i) ds.inputs[i] = img[16 + i] / 255.0;
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) ds.labels[i] = lab[8 + i];
  ds.split.assign(count, Split::kTrain);
  ds.validate();
  return ds;
}

void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != std::size_t{count} * rows * cols) {
    throw std::invalid_argument("write_idx_images: pixel count does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxError::Kind::kIo, "cannot write " + path.string());
  put_be32(out, kIdxImageMagic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxError::Kind::kIo, "cannot write " + path.string());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Matrix gen_ood_noise(NoiseKind kind, std::size_t count, std::size_t dim, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("gen_ood_noise: count must be >= 1");
  NoiseStream rng(seed, 0, NoiseRole::kDataset, kind == NoiseKind::kGaussian ? 3 : 4);
  return kind == NoiseKind::kGaussian ? rng.normals(count, dim) : rng.uniforms(count, dim);
}

ReferenceSplit select_reference_set(std::shared_ptr<const LabeledDataset> dataset, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> train = dataset->indices(Split::kTrain);
  if (k < 1 || k > train.size()) {
    throw std::invalid_argument("select_reference_set: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(train.size()) + "]");
  }
  NoiseStream rng(seed, 0, NoiseRole::kShuffle, 1);
  std::shuffle(train.begin(), train.end(), rng);
  ReferenceSplit split;
  split.base = std::move(dataset);
  split.reference.assign(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(k));
  split.other.assign(train.begin() + static_cast<std::ptrdiff_t>(k), train.end());
  std::sort(split.reference.begin(), split.reference.end());
  std::sort(split.other.begin(), split.other.end());
  split.validate();
  return split;
}

ReferenceSplit hold_out_validation(const ReferenceSplit& split, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw std::invalid_argument("hold_out_validation: fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> m = split.other;
  const auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(m.size())));
  NoiseStream rng(seed, 0, NoiseRole::kShuffle, 2);
  std::shuffle(m.begin(), m.end(), rng);

  auto copy = std::make_shared<LabeledDataset>(*split.base);
  for (std::size_t i = 0; i < n_val; ++i) copy->split[m[i]] = Split::kVal;

  ReferenceSplit out;
  out.base = copy;
  out.reference = split.reference;
  out.other.assign(m.begin() + static_cast<std::ptrdiff_t>(n_val), m.end());
  std::sort(out.other.begin(), out.other.end());
  out.validate();
  return out;
}

LabeledDataset load_manifest_dataset(const DatasetManifest& manifest) {
  LabeledDataset full = load_idx(manifest.images, manifest.labels, manifest.num_classes);
  const std::size_t want = manifest.train + manifest.val + manifest.test;
  if (want > full.size()) {
    throw std::invalid_argument("manifest asks for " + std::to_string(want) + " points but " +
                                manifest.images.string() + " holds " + std::to_string(full.size()));
  }
  std::vector<std::size_t> order(full.size());
  std::iota(order.begin(), order.end(), 0);
  NoiseStream rng(manifest.seed, 0, NoiseRole::kShuffle, 3);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(want);

  LabeledDataset ds;
  ds.task = TaskKind::kClassification;
  ds.num_classes = full.num_classes;
  ds.inputs = full.inputs_at(order);
  for (std::size_t i = 0; i < want; ++i) {
    ds.labels.push_back(full.labels[order[i]]);
    ds.split.push_back(i < manifest.train                  ? Split::kTrain
                       : i < manifest.train + manifest.val ? Split::kVal
                                                           : Split::kTest);
  }
  ds.validate();
  return ds;
}

}  // namespace fnproc::data
