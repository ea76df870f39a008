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

#include "d2dfl/fedl.hpp"

#include <cmath>
#include <iomanip>
#include <limits>

namespace d2dfl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_number(std::ostream& out, double v) {
  if (std::isnan(v)) return;
  out << v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const LossTrace& trace) {
  const Index devices = trace.data_counts.empty() ? 0 : trace.data_counts.front().size();
  out << "step,loss,accuracy";
  for (Index i = 0; i < devices; ++i) out << ",D_" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < trace.size(); ++r) {
    out << trace.steps[r] << ',';
    write_number(out, trace.global_loss[r]);
    out << ',';
    write_number(out, trace.accuracy[r]);
    for (Index i = 0; i < devices; ++i) out << ',' << trace.data_counts[r](i);
    out << '\n';
  }
}

LossSpec make_loss_spec(const NetworkState& net, LossKind kind) {
  LossSpec spec;
  spec.kind = net.task.kind == TaskKind::kRegression ? LossKind::kQuadratic : kind;
  spec.input_dim = static_cast<int>(net.task.class_means.cols());
  spec.num_classes = static_cast<int>(net.task.class_means.rows());
  if (spec.kind == LossKind::kQuadratic) spec.num_classes = 1;
  return spec;
}

Vector local_step(const LossSpec& spec, const Vector& w, const Dataset& data, double eta) {
  if (data.empty()) throw Error("empty_dataset", "local step on an empty dataset");
  const Vector g = gradient(spec, w, data);
  if (!g.allFinite()) throw Error("non_finite_gradient", "gradient has non-finite entries");
  return w - eta * g;
}

Vector aggregate(std::span<Vector> locals, std::span<const double> weights) {
  if (locals.empty()) throw Error("invalid_argument", "aggregation needs at least one device");
  if (locals.size() != weights.size())
    throw Error("dimension_mismatch", "one weight per local model is required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error("invalid_argument", "aggregation weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw Error("invalid_argument", "aggregation weights are all zero");
  Vector global = Vector::Zero(locals.front().size());
  for (std::size_t j = 0; j < locals.size(); ++j) global += (weights[j] / total) * locals[j];
  for (Vector& w : locals) w = global;
  return global;
}

double global_loss(const LossSpec& spec, const Vector& w, const NetworkState& net) {
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& dev : net.devices) {
    if (dev.dataset.empty()) continue;
    const auto d = static_cast<double>(dev.dataset.size());
    weighted += d * loss(spec, w, dev.dataset);
    total += d;
  }
  if (total <= 0.0) throw Error("empty_dataset", "network holds no data");
  return weighted / total;
}

Dataset network_dataset(const NetworkState& net) {
  std::vector<const Dataset*> parts;
  parts.reserve(net.devices.size());
  for (const auto& dev : net.devices) parts.push_back(&dev.dataset);
  return concatenate(parts);
}

Vector weighted_gradient(const LossSpec& spec, const Vector& w, const NetworkState& net,
                         std::span<const int> members) {
  Vector g = Vector::Zero(spec.param_count());
  double total = 0.0;
  for (int m : members) {
    const Dataset& data = net.devices[static_cast<std::size_t>(m)].dataset;
    const auto d = static_cast<double>(data.size());
    if (d == 0.0) continue;
    g += d * gradient(spec, w, data);
    total += d;
  }
  if (total <= 0.0) throw Error("empty_dataset", "sampled devices hold no data");
  return g / total;
}

FedlTrainer::FedlTrainer(LossSpec spec, SamplingDecision sampling, const Vector& initial,
                         TrainerOptions options)
    : spec_(spec), sampling_(std::move(sampling)), options_(options) {
  members_ = sampling_.members();
  if (members_.empty()) throw Error("invalid_sampling", "no sampled devices");
  if (options_.agg_period < 1) throw Error("invalid_config", "aggregation period must be >= 1");
  if (!(options_.step_size >= 0.0)) throw Error("invalid_config", "step size must be >= 0");
  if (initial.size() != spec_.param_count())
    throw Error("dimension_mismatch", "initial parameters do not match the model");
  model_.local_params.assign(members_.size(), initial);
  model_.global_params = initial;
  model_.centralized_params = initial;
  model_.step_size = options_.step_size;
  model_.agg_period = options_.agg_period;
  model_.loss_kind = spec_.kind;
  period_weights_ = Vector::Zero(static_cast<Index>(members_.size()));
}

double FedlTrainer::gradient_magnitude(const NetworkState& state) const {
  return weighted_gradient(spec_, model_.global_params, state, members_).norm();
}

std::optional<double> FedlTrainer::advance(const NetworkState& state) {
  const int t = ++time_;
  const double eta = options_.step_size;

  Vector virtual_global = Vector::Zero(spec_.param_count());
  double sampled_total = 0.0;
  for (std::size_t j = 0; j < members_.size(); ++j) {
    const Dataset& data = state.devices[static_cast<std::size_t>(members_[j])].dataset;
    model_.local_params[j] = local_step(spec_, model_.local_params[j], data, eta);
    const auto d = static_cast<double>(data.size());
    period_weights_(static_cast<Index>(j)) += d;
    virtual_global += d * model_.local_params[j];
    sampled_total += d;
  }
  virtual_global /= sampled_total;

  StepRecord rec;
  rec.t = t;
  rec.virtual_global = virtual_global;
  rec.locals = model_.local_params;
  if (options_.track_reference) {
    const Dataset all = network_dataset(state);
    model_.centralized_params = local_step(spec_, model_.centralized_params, all, eta);
    rec.reference = model_.centralized_params;
  }
  model_.global_params = virtual_global;

  std::optional<double> observed;
  double acc = kNaN;
  if (t % options_.agg_period == 0) {
    const std::vector<double> w(period_weights_.data(), period_weights_.data() + period_weights_.size());
    model_.global_params = aggregate(model_.local_params, w);
    model_.centralized_params = model_.global_params;
    trace_.aggregation_weights.push_back(period_weights_);
    period_weights_.setZero();
    rec.aggregated = true;
    rec.synced = model_.global_params;
    observed = gradient_magnitude(state);
    if (options_.test_set != nullptr) {
      acc = accuracy(spec_, model_.global_params, *options_.test_set);
      accuracy_curve_.push_back(acc);
    }
  }
  records_.push_back(std::move(rec));

  trace_.steps.push_back(t);
  trace_.global_loss.push_back(options_.track_loss ? global_loss(spec_, model_.global_params, state)
                                                   : kNaN);
  trace_.accuracy.push_back(acc);
  trace_.gradient_norm.push_back(observed ? *observed
                                 : options_.track_loss ? gradient_magnitude(state)
                                                       : kNaN);
  trace_.data_counts.push_back(state.dataset_sizes());
  return observed;
}

std::vector<Vector> run_centralized_reference(const LossSpec& spec,
                                              std::span<const NetworkState> trajectory,
                                              const Vector& initial,
                                              std::span<const Vector> synced, double step_size,
                                              int agg_period) {
  if (agg_period < 1) throw Error("invalid_config", "aggregation period must be >= 1");
  std::vector<Vector> v{initial};
  Vector cur = initial;
  for (std::size_t t = 1; t < trajectory.size(); ++t) {
    cur = local_step(spec, cur, network_dataset(trajectory[t]), step_size);
    if (static_cast<int>(t) % agg_period == 0) {
      const std::size_t k = t / static_cast<std::size_t>(agg_period);
      if (k - 1 >= synced.size()) throw Error("invalid_argument", "missing synchronization point");
      cur = synced[k - 1];
    }
    v.push_back(cur);
  }
  return v;
}

}  // namespace d2dfl
