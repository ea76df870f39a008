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

#ifndef D2DFL_BOUNDS_HPP_
#define D2DFL_BOUNDS_HPP_

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "d2dfl/common.hpp"
#include "d2dfl/fedl.hpp"
#include "d2dfl/losses.hpp"
#include "d2dfl/network.hpp"

namespace d2dfl {

struct BoundParams {
  double lipschitz = 1.0;   // L
  double smoothness = 1.0;  // beta
  double step_size = 1.0;   // eta, must satisfy eta * beta <= 1
  double loss_floor = 1.0;  // epsilon
  double xi = 1.0;
  double gamma = 1.0;
  double similarity_threshold = 1e-9;

  void validate() const;
};

struct SmoothnessEstimate {
  double lipschitz = 0.0;
  double smoothness = 0.0;
};

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration(const Matrix& sym, int max_iterations = 10000, double tolerance = 1e-14);

// Quadratic: beta = ||X^T X / n||, L = max per-sample gradient norm over the
// ball of the given radius. Logistic: beta = 1/4 ||X^T X / n|| (binary) or
// 1/2 (softmax) with the matching per-sample gradient bound. Rejects the MLP.
SmoothnessEstimate estimate_smoothness(const LossSpec& spec, const Dataset& data,
                                       double radius = 1.0);

// zeta(w) = sampled weighted gradient - full weighted gradient.
Vector compute_zeta(const LossSpec& spec, const Vector& w, const NetworkState& state,
                    const SamplingDecision& sampling);

struct DeltaTerms {
  double value = 0.0;     // delta_i
  double lhs = 0.0;       // ||grad F_i - grad F_N - zeta||
  double sampling_term = 0.0;
  double statistical_term = 0.0;
  double unsampled_term = 0.0;
};

DeltaTerms compute_delta_i(const LossSpec& spec, const Vector& w, const NetworkState& state,
                           const SamplingDecision& sampling, int device, double gamma);

// Data-weighted delta_S (exact ratio form) and the plain mean used by the optimizer.
double delta_sampled_exact(std::span<const double> deltas, std::span<const double> data);
double delta_sampled_mean(std::span<const double> deltas);

// Per-step quantities feeding the bound formulas; index t = 0..T (entry 0 unused
// where a quantity starts at t = 1).
struct BoundTrace {
  int agg_period = 1;
  std::vector<double> zeta_prev_norm;  // ||zeta(w_S(t-1))|| on the step-t datasets
  std::vector<double> delta_sampled;   // delta_S(t), exact form
  std::vector<double> delta_mean;      // mean surrogate of delta_S(t)
  std::vector<double> observed_divergence;  // ||w_S(t) - v_k(t)|| before resync
  std::vector<double> loss_gap;        // F(w_S(t)) - F(w*(t))
  std::vector<double> xi;              // min_k 1 / ||v_k((k-1)tau) - w*(t)||^2
  std::vector<double> prop_excess;     // max_i (lhs_i - delta_i), per step

  int horizon() const { return static_cast<int>(zeta_prev_norm.size()) - 1; }
};

// (1/beta) * sum_{y=(k-1)tau+1}^{t} (Upsilon(y,k) + ||zeta(w_S(y-1))||),
// Upsilon(y,k) = delta_S(y) (2^{y-1-(k-1)tau} - 1).
double theorem1_bound(const BoundTrace& trace, const BoundParams& params, int t, int k);

struct CorollaryValue {
  bool vacuous = true;
  double denominator = 0.0;
  double value = 0.0;    // g(Upsilon_hat)
  double taylor = 0.0;   // two-term expansion
  double upsilon_hat = 0.0;
  int k_hat = 0;
};

// g(U) = (t xi eta (1 - beta eta / 2) - (Khat+1) L / (beta eps^2) U)^{-1}, with
// Khat = floor(t / tau) and U accumulated over period max(Khat, 1). Uses the
// trace's xi(t) when present, otherwise params.xi.
CorollaryValue corollary1_bound(const BoundTrace& trace, const BoundParams& params, int t);
// Closed forms for a given Upsilon_hat, shared with the trace-based evaluation.
CorollaryValue corollary1_closed_form(const BoundParams& params, int t, int k_hat,
                                      double upsilon_hat);

// Minimizer of the convex global loss: normal equations for the quadratic loss,
// Newton descent until the gradient norm falls below 1e-10 for the logistic loss.
Vector global_minimizer(const LossSpec& spec, const Dataset& data);

struct BoundRow {
  int t = 0;
  int k = 0;
  double observed_divergence = 0.0;
  double theorem1 = 0.0;
  double loss_gap = 0.0;
  CorollaryValue corollary;
  double delta_exact = 0.0;
  double delta_mean = 0.0;
  double prop_excess = 0.0;
};

struct BoundEvaluation {
  BoundParams params;
  BoundTrace trace;
  std::vector<BoundRow> rows;
  int theorem_violations = 0;
  int proposition_violations = 0;
  int corollary_violations = 0;
  int corollary_checked = 0;
  int taylor_checked = 0;
  int taylor_violations = 0;
};

// Evaluates every bound on a finished run. `trajectory[t]` are the datasets
// used by step t; records come from FedlTrainer with reference tracking on.
// A non-positive gamma selects 2 L sqrt(max_t,i |D_i(t)|), the worst-case
// constant under which the gradient-divergence bound holds for any data.
BoundEvaluation evaluate_bounds(const LossSpec& spec, std::span<const NetworkState> trajectory,
                                const Vector& initial, const std::vector<StepRecord>& records,
                                const SamplingDecision& sampling, double smoothness,
                                double step_size, double gamma);

struct FleetConfig {
  int runs = 60;
  int min_devices = 3;
  int max_devices = 10;
  int periods = 4;
  std::uint64_t seed = 7;
};

struct FleetRun {
  int index = 0;
  LossKind kind = LossKind::kQuadratic;
  int num_devices = 0;
  int sample_budget = 0;
  int agg_period = 1;
  BoundEvaluation evaluation;
};

// Seeded convex runs (quadratic and logistic, tau in {1,2,3}) with optimized
// offloading, each followed by evaluate_bounds.
std::vector<FleetRun> run_convex_fleet(const FleetConfig& config);

// Columns: t,k,observed_divergence,theorem1_bound,loss_gap,corollary1_bound,
// taylor_surrogate,vacuous_flag, then run,delta_s_exact,delta_s_mean.
void write_bound_csv(std::ostream& out, std::span<const FleetRun> runs);

}  // namespace d2dfl

#endif  // D2DFL_BOUNDS_HPP_
