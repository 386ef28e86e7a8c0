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
#include <limits>
#include <random>
#include <span>

#include "fnproc/matrix.hpp"

namespace fnproc {

/// What a noise draw is used for. Part of the stream key, so two roles never
/// share randomness even for the same point.
enum class NoiseRole : std::uint64_t {
  kU = 1,
  kZ = 2,
  kARow = 3,
  kGRow = 4,
  kGlobalLatent = 5,
  kDropout = 6,
  kContext = 7,
  kShuffle = 8,
  kInit = 9,
  kDataset = 10,
};

/// Counter-based random stream. The state is a hash of the key
/// (seed, round, role, id, sub); draws advance a splitmix64 counter. Streams
/// with equal keys are identical no matter when or in which order they are
/// created, which is what makes per-point noise independent of storage order.
class NoiseStream {
 public:
  using result_type = std::uint64_t;

  NoiseStream(std::uint64_t seed, std::uint64_t round, NoiseRole role, std::uint64_t id, std::uint64_t sub = 0);
  explicit NoiseStream(std::uint64_t seed) : NoiseStream(seed, 0, NoiseRole::kShuffle, 0) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  Matrix normals(std::size_t rows, std::size_t cols);
  Matrix uniforms(std::size_t rows, std::size_t cols);

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t x);

/// Noise for one evaluation of the bound or one predictive draw. Every draw
/// is addressed by (role, point identity[, partner identity]).
class NoiseBundle {
 public:
  NoiseBundle(std::uint64_t seed, std::uint64_t round) : seed_(seed), round_(round) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t round() const { return round_; }

  /// 1 x n standard normals for point `id`.
  Matrix normals(NoiseRole role, std::uint64_t id, std::size_t n) const;
  /// One row of `n` normals per id, stacked in the order given.
  Matrix stacked_normals(NoiseRole role, std::span<const std::uint64_t> ids, std::size_t n) const;
  /// One uniform on (0, 1) for the ordered pair (id, partner).
  double pair_uniform(NoiseRole role, std::uint64_t id, std::uint64_t partner) const;
  NoiseStream stream(NoiseRole role, std::uint64_t id, std::uint64_t sub = 0) const {
    return NoiseStream(seed_, round_, role, id, sub);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t round_;
};

}  // namespace fnproc
