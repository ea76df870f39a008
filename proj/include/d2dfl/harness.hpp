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

#ifndef D2DFL_HARNESS_HPP_
#define D2DFL_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "d2dfl/baselines.hpp"
#include "d2dfl/bounds.hpp"
#include "d2dfl/dataset.hpp"
#include "d2dfl/gcn.hpp"
#include "d2dfl/losses.hpp"
#include "d2dfl/network.hpp"

namespace d2dfl {

inline constexpr int kReportSchemaVersion = 1;

struct ExperimentConfig {
  ScenarioConfig scenario;
  LossKind loss = LossKind::kLogistic;
  double step_size = 0.01;
  double stat_constant = 1.0;
  int test_size = 1000;
  double reference_fraction = 0.6;  // of the all-nodes final accuracy
  int repetitions = 5;              // random sampling / random offloading draws
  std::vector<std::string> schemes = {"smart+optimized", "smart+none",     "random+random",
                                      "random+none",     "heuristic+greedy", "heuristic+none",
                                      "all_nodes+none"};
  CorpusConfig corpus;
  int corpus_size = 20;
  GcnTrainOptions gcn;
  bool run_bounds = false;
  FleetConfig fleet;

  ExperimentConfig();
  // Copies the scenario-level settings (task, resources, tau, seed) into the corpus.
  void sync_corpus();
  void validate() const;
};

// Shared inputs of every scheme in one experiment.
struct ExperimentContext {
  NetworkState network;
  Dataset test_set;
  LossSpec spec;
  std::optional<GcnModel> gcn;
};

// Generates the scenario and the held-out test set; trains the GCN when no
// weights are supplied and a smart scheme is requested.
ExperimentContext prepare_experiment(const ExperimentConfig& config,
                                     std::optional<GcnModel> gcn = std::nullopt);
GcnModel train_sampler(const ExperimentConfig& config);

struct ExperimentResult {
  SchemeSpec scheme;
  std::vector<double> accuracy;    // test accuracy after each aggregation
  std::vector<double> datapoints;  // cumulative sum_t sum_{i in S} |D_i(t)| at each aggregation
  std::vector<double> datapoints_per_step;  // the same, after every step
  std::optional<int> aggregations_to_threshold;
  std::optional<double> datapoints_to_threshold;
  std::vector<std::vector<int>> sampled_sets;  // one per repetition
  std::vector<std::uint64_t> seeds;

  double final_accuracy() const;
};

SamplingDecision choose_sampling(const ExperimentConfig& config, const ExperimentContext& context,
                                 SamplingKind kind, std::uint64_t seed);
// The offloading plan of one scheme on its own; optimized plans run FedL
// alongside so that the optimizer sees the observed gradients.
OffloadRun plan_offloading(const ExperimentConfig& config, const ExperimentContext& context,
                           const SamplingDecision& sampling, OffloadKind kind, std::uint64_t seed);

// One sampling draw and one offloading run, without averaging.
ExperimentResult run_single(const ExperimentConfig& config, const ExperimentContext& context,
                            const SchemeSpec& scheme, std::uint64_t seed);
// Averages curves over scheme.repetitions draws for random sampling or offloading.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentContext& context,
                                const SchemeSpec& scheme);

// First 1-based aggregation index with accuracy >= the reference; nullopt if none.
std::optional<int> aggregations_to_threshold(const std::vector<double>& curve,
                                             double reference_accuracy);

// Reference accuracy from the all-nodes result (if any), then per-scheme threshold metrics.
double finalize_metrics(std::vector<ExperimentResult>& results, double reference_fraction,
                        std::optional<double> reference = std::nullopt);

struct ExperimentReport {
  std::uint64_t seed = 0;
  double reference_accuracy = 0.0;
  std::vector<ExperimentResult> results;
  std::vector<FleetRun> fleet;
};

// Runs every configured scheme (and the convex fleet when enabled).
ExperimentReport run_all(const ExperimentConfig& config,
                         std::optional<GcnModel> gcn = std::nullopt);

// Writes accuracy_curves.csv, aggregations.csv, datapoints.csv, bounds.csv (when
// the fleet ran) and results.json into `dir`, creating it when needed.
void write_report(const std::filesystem::path& dir, const ExperimentReport& report);

}  // namespace d2dfl

#endif  // D2DFL_HARNESS_HPP_
