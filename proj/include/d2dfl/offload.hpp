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

#ifndef D2DFL_OFFLOAD_HPP_
#define D2DFL_OFFLOAD_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "d2dfl/common.hpp"
#include "d2dfl/network.hpp"

namespace d2dfl {

// Lower clamp for the gradient scaling factor (the "1 + epsilon" floor).
inline constexpr double kAlphaFloor = 1.0 + 1e-6;

// Per-timestep surrogate objective:
//   (D_unsampled / D_N) * grad_estimate + (1/|S|) * sum_{i in S} gamma / sqrt(D_i).
struct ObjectiveModel {
  double gradient_estimate = 1.0;  // extrapolated sampled gradient magnitude at t
  double last_observed = 1.0;      // magnitude observed at the latest aggregation
  double scaling_factor = kAlphaFloor;
  double stat_constant = 1.0;      // gamma
  double alpha_max = 10.0;
  SamplingDecision sampling;
  double unsampled_mass = 0.0;     // D of the unsampled devices, constant over the horizon

  static ObjectiveModel make(const NetworkState& net, SamplingDecision sampling, double gamma,
                             double initial_gradient);
  // grad_estimate(k tau + steps) = last_observed / alpha^steps.
  double extrapolate(int steps) const;
};

double objective(const Matrix& phi, const NetworkState& state, const ObjectiveModel& model);

struct ConstraintViolation {
  std::string constraint;
  int sender = -1;
  int receiver = -1;
  double slack = 0.0;
};

// Every constraint of the offloading problem at one step. Inequalities report
// rhs - lhs; equality (support) constraints report -|lhs|.
struct FeasibilityReport {
  std::map<std::string, double> min_slack;
  std::vector<ConstraintViolation> violations;

  bool feasible() const { return violations.empty(); }
  void merge(const FeasibilityReport& other);
  std::string summary() const;
};

FeasibilityReport check_feasible(const Matrix& phi, const NetworkState& state,
                                 const SamplingDecision& sampling, double tolerance = 1e-9,
                                 std::optional<int> sample_budget = std::nullopt);

struct SolverOptions {
  double tolerance = 1e-8;  // barrier duality gap
  int max_iterations = 10000;
  int projection_sweeps = 2000;
  double projection_tolerance = 1e-15;
};

struct TimestepSolution {
  Matrix phi;
  double objective = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Minimizes the surrogate objective over the offloading polytope with the
// similarity state of the previous step held fixed. Log-barrier Newton over the
// box, the per-sender row and budget half-spaces and the per-receiver
// receive/processing half-spaces, then every free variable is raised to its
// largest feasible value since the objective decreases in each of them.
TimestepSolution solve_timestep(const NetworkState& state, const ObjectiveModel& model,
                                const SolverOptions& options = {});

// Euclidean projection onto {0 <= z <= 1, a_j^T z <= b_j} by Dykstra's method.
struct HalfSpace {
  std::vector<Index> support;
  std::vector<double> coef;
  double bound = 0.0;
};
Vector project_polytope(const Vector& point, const std::vector<HalfSpace>& halfspaces,
                        int max_sweeps = 2000, double tolerance = 1e-15);

// Refreshes the scaling factor after an aggregation:
//   alpha = (previous / observed)^(1/tau), clamped to [1+eps, alpha_max].
ObjectiveModel update_gradient_estimate(ObjectiveModel model, double observed, double previous,
                                        int agg_period);

struct OffloadPlan {
  int num_devices = 0;
  std::vector<Matrix> phi;  // phi[t-1] is the matrix applied at step t
  FeasibilityReport feasibility;
  std::vector<double> step_objectives;
  double objective_value = 0.0;  // time average of step_objectives

  int horizon() const { return static_cast<int>(phi.size()); }
};

// Called after every step with the post-offloading state; returns the observed
// sampled gradient magnitude when the step closes an aggregation period.
using AggregationObserver = std::function<std::optional<double>(const NetworkState&, int t)>;

struct HorizonOptions {
  int agg_period = 5;
  SolverOptions solver;
  std::uint64_t seed = 1;
  RegenerationHook regenerate;
};

struct HorizonResult {
  OffloadPlan plan;
  std::vector<NetworkState> trajectory;  // trajectory[t], t = 0..T
  std::vector<double> gradient_estimates;
};

HorizonResult solve_horizon(const NetworkState& net, ObjectiveModel model, int horizon,
                            const HorizonOptions& options,
                            const AggregationObserver& observer = {});

// Applies a fixed sequence of offloading matrices, producing the trajectory.
std::vector<NetworkState> replay_plan(const NetworkState& net, const OffloadPlan& plan,
                                      std::uint64_t seed);

}  // namespace d2dfl

#endif  // D2DFL_OFFLOAD_HPP_
