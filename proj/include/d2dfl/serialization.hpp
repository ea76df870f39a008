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

#ifndef D2DFL_SERIALIZATION_HPP_
#define D2DFL_SERIALIZATION_HPP_

#include <filesystem>

#include "json.hpp"

#include "d2dfl/gcn.hpp"
#include "d2dfl/harness.hpp"
#include "d2dfl/network.hpp"
#include "d2dfl/offload.hpp"

namespace d2dfl {

using Json = nlohmann::ordered_json;

inline constexpr int kScenarioFormatVersion = 1;
inline constexpr int kPlanFormatVersion = 1;
inline constexpr int kGcnFormatVersion = 1;
inline constexpr int kCorpusFormatVersion = 1;

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& value);

// Nested config sections: scenario, learning, schemes, gcn, bounds. Missing keys
// keep their defaults; unknown keys are rejected with invalid_config.
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

Json scenario_to_json(const NetworkState& net);
NetworkState scenario_from_json(const Json& j);

// Sparse (sender, receiver, value) triplets per step.
Json plan_to_json(const OffloadPlan& plan);
OffloadPlan plan_from_json(const Json& j);

// Dimensions plus row-major values of Q1 and Q2.
Json gcn_to_json(const GcnModel& model);
GcnModel gcn_from_json(const Json& j);

Json corpus_to_json(const TrainingCorpus& corpus);
TrainingCorpus corpus_from_json(const Json& j);

Json sampling_to_json(const SamplingDecision& sampling);
SamplingDecision sampling_from_json(const Json& j);

Json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const Json& j);

}  // namespace d2dfl

#endif  // D2DFL_SERIALIZATION_HPP_
