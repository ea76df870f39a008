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

#ifndef D2DFL_COMMON_HPP_
#define D2DFL_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace d2dfl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

// Error with a stable machine-readable code (e.g. "invalid_config").
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message);
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Derives an independent stream seed from a master seed and a tag sequence.
// SplitMix64 finalizer over the combined words.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
// Box-Muller standard normal.
double standard_normal(Rng& rng);
// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);
// Draws k distinct indices from [0, n) uniformly (partial Fisher-Yates), in draw order.
std::vector<int> sample_without_replacement(Rng& rng, int n, int k);

// The binary sampling vector x and its budget.
struct SamplingDecision {
  std::vector<bool> mask;

  static SamplingDecision from_members(int num_devices, const std::vector<int>& members);
  static SamplingDecision all(int num_devices);

  int size() const { return static_cast<int>(mask.size()); }
  bool contains(int i) const { return mask[static_cast<std::size_t>(i)]; }
  int count() const;
  std::vector<int> members() const;
  std::vector<int> non_members() const;
};

}  // namespace d2dfl

#endif  // D2DFL_COMMON_HPP_
