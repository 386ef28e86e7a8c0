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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fnproc/matrix.hpp"

namespace fnproc::data {

enum class TaskKind { kClassification, kRegression };
enum class Split : std::uint8_t { kTrain, kVal, kTest };

/// Inputs with class ids (classification) or real targets (regression).
/// Point identity is the row index.
struct LabeledDataset {
  TaskKind task = TaskKind::kRegression;
  Matrix inputs;
  std::vector<int> labels;
  std::vector<double> values;
  std::size_t num_classes = 0;
  std::vector<Split> split;

  std::size_t size() const { return inputs.rows(); }
  std::size_t input_dim() const { return inputs.cols(); }
  /// Throws std::invalid_argument when a field disagrees with the others.
  void validate() const;
  std::vector<std::size_t> indices(Split s) const;
  Matrix inputs_at(std::span<const std::size_t> rows) const;
  /// One-hot rows (classification) or a column of targets (regression).
  Matrix targets_at(std::span<const std::size_t> rows) const;
};

/// Training points partitioned into the reference set R and the rest M.
struct ReferenceSplit {
  std::shared_ptr<const LabeledDataset> base;
  std::vector<std::size_t> reference;
  std::vector<std::size_t> other;

  /// R and M are disjoint, sorted, and together cover the training split.
  void validate() const;
};

/// y = x + eps + sin(4 (x + eps)) + sin(13 (x + eps)).
double toy1_target(double x, double eps);
/// y = x^3 + eps.
double toy2_target(double x, double eps);

/// 12 points from U[0, 0.6] and 8 from U[0.8, 1], eps ~ N(0, 0.03^2).
LabeledDataset gen_toy1(std::uint64_t seed);
/// 20 points from U[-4, 4], eps ~ N(0, 9).
LabeledDataset gen_toy2(std::uint64_t seed);

class IdxError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kTruncated, kCountMismatch };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Big-endian IDX image/label pair; pixels are scaled by 1/255.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t num_classes = 10);
void write_idx_images(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

enum class NoiseKind { kGaussian, kUniform };

/// count x dim i.i.d. draws from N(0, 1) or U[0, 1].
Matrix gen_ood_noise(NoiseKind kind, std::size_t count, std::size_t dim, std::uint64_t seed);

/// Uniform sample of k training points as R, without replacement.
ReferenceSplit select_reference_set(std::shared_ptr<const LabeledDataset> dataset, std::size_t k, std::uint64_t seed);

/// Moves round(fraction * |M|) points of M into the validation split (on a
/// copy of the base dataset).
ReferenceSplit hold_out_validation(const ReferenceSplit& split, double fraction, std::uint64_t seed);

/// IDX-backed classification data with seeded train/val/test subsets.
struct DatasetManifest {
  std::filesystem::path images;
  std::filesystem::path labels;
  std::size_t train = 5000;
  std::size_t val = 1000;
  std::size_t test = 1000;
  std::uint64_t seed = 0;
  std::size_t num_classes = 10;
};

/// Loads the IDX pair and keeps a seeded random subset tagged by split.
LabeledDataset load_manifest_dataset(const DatasetManifest& manifest);

}  // namespace fnproc::data
