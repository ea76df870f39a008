// Copyright 2026 The d2dfl Authors
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

#include "d2dfl/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>

namespace d2dfl {

Error::Error(std::string code, const std::string& message)
    : std::runtime_error(message), code_(std::move(code)) {}

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  std::uint64_t h = splitmix(master);
  h = splitmix(h ^ a);
  h = splitmix(h ^ b);
  return splitmix(h ^ c);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = rng.max() - (rng.max() % n);
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return static_cast<std::size_t>(r % n);
}

std::vector<int> sample_without_replacement(Rng& rng, int n, int k) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int j = 0; j < k; ++j) {
    const auto pick = static_cast<std::size_t>(j) +
                      uniform_index(rng, static_cast<std::size_t>(n - j));
    std::swap(pool[static_cast<std::size_t>(j)], pool[pick]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

SamplingDecision SamplingDecision::from_members(int num_devices,
                                                const std::vector<int>& members) {
  SamplingDecision d;
  d.mask.assign(static_cast<std::size_t>(num_devices), false);
  for (int m : members) {
    if (m < 0 || m >= num_devices) throw Error("invalid_sampling", "sampled index out of range");
    d.mask[static_cast<std::size_t>(m)] = true;
  }
  return d;
}

SamplingDecision SamplingDecision::all(int num_devices) {
  SamplingDecision d;
  d.mask.assign(static_cast<std::size_t>(num_devices), true);
  return d;
}

int SamplingDecision::count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

std::vector<int> SamplingDecision::members() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> SamplingDecision::non_members() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace d2dfl
