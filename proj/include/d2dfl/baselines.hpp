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

#ifndef D2DFL_BASELINES_HPP_
#define D2DFL_BASELINES_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "d2dfl/common.hpp"
#include "d2dfl/network.hpp"
#include "d2dfl/offload.hpp"

namespace d2dfl {

enum class SamplingKind { kSmart, kRandom, kHeuristic, kAllNodes };
enum class OffloadKind { kOptimized, kRandom, kGreedy, kNone };

std::string to_string(SamplingKind kind);
std::string to_string(OffloadKind kind);

struct SchemeSpec {
  SamplingKind sampling = SamplingKind::kSmart;
  OffloadKind offload = OffloadKind::kOptimized;
  int repetitions = 1;

  // "<sampling>+<offload>", e.g. "smart+optimized", "random+none", "all_nodes+none".
  std::string name() const;
  // Accepts the canonical form plus the short aliases smart, random, heuristic
  // (with optimized / random / greedy offloading respectively), their "-nooffload"
  // variants, and all_nodes.
  static SchemeSpec parse(const std::string& text);
  void validate() const;
};

SamplingDecision sample_random(int num_devices, int budget, std::uint64_t seed);
SamplingDecision sample_random(const NetworkState& net, int budget, std::uint64_t seed);
// Top-budget devices by P_i(0); ties go to the lowest index.
SamplingDecision sample_heuristic(const NetworkState& net, int budget);

struct OffloadRun {
  OffloadPlan plan;
  std::vector<NetworkState> trajectory;  // t = 0..T
};

// One step of each baseline rule on the current state.
Matrix random_offload_step(const NetworkState& state, const SamplingDecision& sampling, Rng& rng);
Matrix greedy_offload_step(const NetworkState& state, const SamplingDecision& sampling);

// Uniform draw on every unsampled -> sampled edge, divided by the row sum when
// it exceeds one, rows scaled to the transmit budget, then columns scaled to the
// receive and processing limits. Redrawn at every step.
OffloadRun offload_random(const NetworkState& net, const SamplingDecision& sampling, int horizon,
                          std::uint64_t seed);
// Sampled receivers in index order pull from unsampled neighbors in descending
// D_k (lowest index on ties) until the row, budget, buffer or processing
// constraint saturates. Similarity is ignored.
OffloadRun offload_greedy(const NetworkState& net, const SamplingDecision& sampling, int horizon,
                          std::uint64_t seed);

}  // namespace d2dfl

#endif  // D2DFL_BASELINES_HPP_
