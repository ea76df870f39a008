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

#ifndef D2DFL_GCN_HPP_
#define D2DFL_GCN_HPP_

#include <cstdint>
#include <vector>

#include "d2dfl/common.hpp"
#include "d2dfl/losses.hpp"
#include "d2dfl/network.hpp"

namespace d2dfl {

inline constexpr int kGcnFeatures = 4;  // [D_i, P_i, p_i, theta_i]

struct GcnModel {
  Matrix q1;  // U x O
  Vector q2;  // O

  static GcnModel random(int hidden, std::uint64_t seed);
  int hidden() const { return static_cast<int>(q1.cols()); }
  // Throws dimension_mismatch / non_finite_weights.
  void validate() const;
};

struct GcnInput {
  Matrix features;    // pi, N x U
  Matrix augmented;   // Lambda(0) + I
  Matrix normalized;  // Dt^{-1/2} (Lambda(0) + I) Dt^{-1/2}, Dt = row sums

  int size() const { return static_cast<int>(features.rows()); }
};

GcnInput make_gcn_input(const Matrix& features, const Matrix& conn_similarity);
// Rows [D_i, P_i, p_i, theta_i] at t = 0, each column divided by its network mean
// so that weights carry over between network sizes and resource scales.
GcnInput make_gcn_input(const NetworkState& net);

// Gamma = softmax(A ReLU(A pi Q1) Q2), summing to one over the nodes.
Vector gcn_forward(const GcnModel& model, const GcnInput& input);

struct GcnSample {
  GcnInput input;
  std::vector<int> target;  // the best sampled set x*, ascending
  int sample_budget = 0;
  std::uint64_t seed = 0;
  double objective = 0.0;
  int candidates = 0;
};

struct TrainingCorpus {
  std::vector<GcnSample> samples;
};

struct CorpusConfig {
  ScenarioConfig scenario;  // network template; num_devices defaults to 10 below
  int min_budget = 3;
  int max_budget = 6;
  int periods = 1;          // aggregation periods simulated per candidate
  LossKind loss = LossKind::kLogistic;
  double step_size = 0.01;
  double stat_constant = 1.0;
  long long max_candidates = 5000;
  std::uint64_t seed = 1;

  CorpusConfig() { scenario.num_devices = 10; }
};

// Realized objective of one candidate: the optimized offloading plan is solved
// alongside FedL for `periods` aggregation periods and the time-averaged global
// loss is returned.
double evaluate_candidate(const NetworkState& net, const SamplingDecision& sampling,
                          const CorpusConfig& config);

// For each realization e = 0..count-1: a seeded network, a budget drawn from
// [min_budget, max_budget], and the best of all C(N, S) candidate samplings.
TrainingCorpus build_corpus(const CorpusConfig& config, int count);

// Enumerates the S-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<int>> enumerate_subsets(int n, int k);
long long binomial(int n, int k);

// Multi-label negative log-likelihood -sum_{j in x*} log Gamma_j, averaged over samples.
double gcn_loss(const GcnModel& model, const TrainingCorpus& corpus);
double gcn_loss(const GcnModel& model, const GcnSample& sample);
// Analytic gradient with the same shapes as the model.
GcnModel gcn_gradient(const GcnModel& model, const TrainingCorpus& corpus);
GcnModel gcn_gradient(const GcnModel& model, const GcnSample& sample);

struct GcnTrainOptions {
  int epochs = 200;
  double learning_rate = 0.5;
  int hidden = 16;
  std::uint64_t seed = 1;
};

struct GcnTrainResult {
  GcnModel model;
  std::vector<double> loss_history;  // loss before epoch 1, then after each epoch
};

// Full-batch gradient descent. Each epoch tries the learning rate and halves it
// until the loss does not increase, so the history is non-increasing.
GcnTrainResult train_gcn(const TrainingCorpus& corpus, const GcnTrainOptions& options);
// Continues training from given weights.
GcnTrainResult train_gcn(const TrainingCorpus& corpus, GcnModel initial,
                         const GcnTrainOptions& options);

struct BranchTrace {
  std::vector<int> order;        // selection order
  std::vector<bool> fallback;    // true when the step restarted outside R
  std::vector<int> elite;        // N_p
};

// Top max(1, ceil(0.02 n)) entries of `score`, with every tie of the last one.
std::vector<int> top_fraction(const Vector& score, const std::vector<int>& candidates);

// Branch walk: start at argmax Gamma over the high-data set N_p, then repeatedly
// take argmax Gamma over the most dissimilar neighbors of the last pick.
BranchTrace gcn_branch_trace(const Vector& gamma, const NetworkState& net, int budget);
SamplingDecision gcn_branch_select(const Vector& gamma, const NetworkState& net, int budget);

}  // namespace d2dfl

#endif  // D2DFL_GCN_HPP_
