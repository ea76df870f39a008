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

#ifndef D2DFL_NETWORK_HPP_
#define D2DFL_NETWORK_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "d2dfl/common.hpp"
#include "d2dfl/dataset.hpp"

namespace d2dfl {

using Adjacency = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class TaskKind { kClassification, kRegression };

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct ScenarioConfig {
  int num_devices = 20;
  int sample_budget = 3;
  int horizon = 50;
  int agg_period = 5;
  double link_prob = 0.1;

  TaskKind task = TaskKind::kClassification;
  int num_classes = 10;
  int labels_per_device = 3;
  int feature_dim = 8;
  double class_separation = 2.0;
  double feature_noise = 1.0;
  double target_noise = 0.1;  // regression only
  int pool_per_class = 200;

  double data_mean = 60.0;
  std::optional<double> data_variance;  // defaults to 0.2 * data_mean

  double similarity_epsilon = 1e-9;
  double probe_fraction = 0.1;
  int probe_min = 5;

  // Per-device resources. Processing capacity is p_i * D_i(0) * (1 + headroom)
  // so that the initial state satisfies the processing constraint.
  Range proc_cost{0.5, 1.5};
  Range proc_headroom{1.0, 3.0};
  Range recv_buffer{30.0, 120.0};
  Range tx_budget{20.0, 80.0};
  Range tx_cost{0.5, 1.5};

  std::uint64_t seed = 1;

  double variance() const { return data_variance.value_or(0.2 * data_mean); }
  void validate() const;
};

struct DeviceState {
  int id = 0;
  double proc_capacity = 0.0;  // P_i
  double proc_cost = 0.0;      // p_i
  double recv_buffer = 0.0;    // theta_i
  double tx_budget = 0.0;      // Psi_i
  Vector tx_cost;              // psi_{i,j}, one entry per device
  // Continuous data quantity D_i(t) used by the optimizer. The physical dataset
  // differs from it by at most one datapoint per edge per offloading step.
  double data_count = 0.0;
  Dataset dataset;
  std::vector<int> label_pool;
};

// Generative parameters of the synthetic task, kept with the network so that
// held-out test data can be drawn from the same distributions.
struct SyntheticTask {
  TaskKind kind = TaskKind::kClassification;
  Matrix class_means;  // num_classes x feature_dim
  double feature_noise = 1.0;
  Vector regression_weights;
  Vector label_offsets;
  double target_noise = 0.1;
  Dataset pool;  // every datapoint devices may hold, indexed by id
};

struct NetworkState {
  std::vector<DeviceState> devices;
  Adjacency adjacency;      // A(t), directed, zero diagonal
  Matrix similarity;        // lambda(0)
  Matrix conn_similarity;   // Lambda(t)
  int time = 0;
  SyntheticTask task;

  int size() const { return static_cast<int>(devices.size()); }
  Vector data_counts() const;
  Vector dataset_sizes() const;
  bool has_edge(int k, int i) const { return adjacency(k, i) != 0; }
};

// Optional per-step mutation of A(t) / P_i(t); the default is time-invariant.
using RegenerationHook = std::function<void(NetworkState&, int t)>;

NetworkState generate_scenario(const ScenarioConfig& config);

// Probe-based estimate of lambda(0). A non-positive probe_size selects the
// default: max(probe_min, ceil(probe_fraction * D_i)), capped at D_i.
Matrix estimate_similarity(const NetworkState& net, int probe_size, double epsilon,
                           double probe_fraction, int probe_min, std::uint64_t seed);

struct OffloadStep {
  NetworkState next;
  Vector received;          // R_i(t), continuous
  Matrix transferred;       // physical datapoints moved k -> i
};

// One offloading transition. Rejects matrices that break any constraint that
// does not depend on the sampling vector; the message names the constraint.
OffloadStep apply_offload_step(const NetworkState& net, const Matrix& phi, std::uint64_t seed,
                               double tolerance = 1e-9);

// Fresh datapoints from the task distribution restricted to `labels`.
Dataset draw_task_samples(const SyntheticTask& task, const std::vector<int>& labels,
                          int count, std::uint64_t seed);

// Held-out test set drawn uniformly over every label present in the network.
Dataset make_test_set(const NetworkState& net, int count, std::uint64_t seed);

}  // namespace d2dfl

#endif  // D2DFL_NETWORK_HPP_
