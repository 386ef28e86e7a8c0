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

#include "fnproc/rng.hpp"

namespace fnproc {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t round, NoiseRole role, std::uint64_t id, std::uint64_t sub) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ round);
  h = mix64(h ^ static_cast<std::uint64_t>(role));
  h = mix64(h ^ id);
  h = mix64(h ^ sub);
  state_ = h;
}

NoiseStream::result_type NoiseStream::operator()() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double NoiseStream::uniform() {
  // 53 random mantissa bits, shifted by half an ulp away from 0 and 1.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double NoiseStream::normal() { return normal_(*this); }

Matrix NoiseStream::normals(std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = normal();
  return m;
}

Matrix NoiseStream::uniforms(std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = uniform();
  return m;
}

Matrix NoiseBundle::normals(NoiseRole role, std::uint64_t id, std::size_t n) const {
  return stream(role, id).normals(1, n);
}

Matrix NoiseBundle::stacked_normals(NoiseRole role, std::span<const std::uint64_t> ids, std::size_t n) const {
  Matrix out(ids.size(), n);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    NoiseStream s = stream(role, ids[i]);
    for (std::size_t k = 0; k < n; ++k) out(i, k) = s.normal();
  }
  return out;
}

double NoiseBundle::pair_uniform(NoiseRole role, std::uint64_t id, std::uint64_t partner) const {
  return stream(role, id, partner).uniform();
}

}  // namespace fnproc
