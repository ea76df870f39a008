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

#ifndef D2DFL_FEDL_HPP_
#define D2DFL_FEDL_HPP_

#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "d2dfl/common.hpp"
#include "d2dfl/losses.hpp"
#include "d2dfl/network.hpp"

namespace d2dfl {

struct ModelState {
  std::vector<Vector> local_params;  // one per sampled device, in member order
  Vector global_params;              // w_S
  Vector centralized_params;         // v_k
  double step_size = 0.01;
  int agg_period = 1;
  LossKind loss_kind = LossKind::kLogistic;
};

struct LossTrace {
  std::vector<int> steps;
  std::vector<double> global_loss;    // F(w_S(t) | D_N(t)); NaN when not tracked
  std::vector<double> accuracy;       // test accuracy of w_S(t); NaN when not evaluated
  std::vector<double> gradient_norm;  // ||sampled weighted gradient|| at w_S(t)
  std::vector<Vector> data_counts;    // physical |D_i(t)| for every device
  std::vector<Vector> aggregation_weights;  // Delta_i(k tau), sampled members only

  std::size_t size() const { return steps.size(); }
};

// CSV rows: step, loss, accuracy, then one D_i column per device.
void write_trace_csv(std::ostream& out, const LossTrace& trace);

// Model shape for a network's task: regression always uses the quadratic loss.
LossSpec make_loss_spec(const NetworkState& net, LossKind kind);

// w - eta * grad F(w | D).
Vector local_step(const LossSpec& spec, const Vector& w, const Dataset& data, double eta);

// Weighted average of the locals; every local is overwritten with the result.
Vector aggregate(std::span<Vector> locals, std::span<const double> weights);

// Data-weighted loss over every device, equal to the flat multiset average.
double global_loss(const LossSpec& spec, const Vector& w, const NetworkState& net);

// Multiset union of every device dataset.
Dataset network_dataset(const NetworkState& net);

// Sum_{i in members} |D_i| grad F(w | D_i) / sum |D_i|.
Vector weighted_gradient(const LossSpec& spec, const Vector& w, const NetworkState& net,
                         std::span<const int> members);

struct TrainerOptions {
  double step_size = 0.01;
  int agg_period = 5;
  bool track_reference = true;
  bool track_loss = true;
  const Dataset* test_set = nullptr;
};

// Snapshot of the parameters after step t, before any synchronization.
struct StepRecord {
  int t = 0;
  Vector virtual_global;  // sum D_i(t) w_i(t) / D_S(t)
  std::vector<Vector> locals;
  Vector reference;       // v_k(t); empty when not tracked
  bool aggregated = false;
  Vector synced;          // w_S(k tau) after the weighted average (when aggregated)
};

// Sampled federated training driven one time step at a time so that it can be
// interleaved with an offloading optimizer that observes aggregate gradients.
class FedlTrainer {
 public:
  FedlTrainer(LossSpec spec, SamplingDecision sampling, const Vector& initial,
              TrainerOptions options);

  // Sampled gradient magnitude at the current global parameters.
  double gradient_magnitude(const NetworkState& state) const;

  // Performs step t = time()+1 on the datasets of `state`. Returns the observed
  // sampled gradient magnitude when the step closes an aggregation period.
  std::optional<double> advance(const NetworkState& state);

  int time() const { return time_; }
  const ModelState& model() const { return model_; }
  const LossTrace& trace() const { return trace_; }
  const std::vector<StepRecord>& records() const { return records_; }
  // Test accuracy after each aggregation (requires a test set).
  const std::vector<double>& accuracy_curve() const { return accuracy_curve_; }
  const LossSpec& spec() const { return spec_; }
  const SamplingDecision& sampling() const { return sampling_; }

 private:
  LossSpec spec_;
  SamplingDecision sampling_;
  std::vector<int> members_;
  TrainerOptions options_;
  ModelState model_;
  LossTrace trace_;
  std::vector<StepRecord> records_;
  std::vector<double> accuracy_curve_;
  Vector period_weights_;
  int time_ = 0;
};

// Centralized reference v_k(t), t = 0..T, re-run independently of the trainer:
// gradient descent on the union of `trajectory[t]` datasets, resynchronized to
// `synced[k-1]` at t = k tau. trajectory[0] is the initial state.
std::vector<Vector> run_centralized_reference(const LossSpec& spec,
                                              std::span<const NetworkState> trajectory,
                                              const Vector& initial,
                                              std::span<const Vector> synced, double step_size,
                                              int agg_period);

}  // namespace d2dfl

#endif  // D2DFL_FEDL_HPP_
