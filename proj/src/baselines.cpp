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

#include "d2dfl/baselines.hpp"

#include <algorithm>
#include <numeric>

namespace d2dfl {

namespace {

constexpr double kShrink = 1.0 - 1e-12;

double receive_cap(const DeviceState& dev) {
  double cap = dev.recv_buffer;
  if (dev.proc_cost > 0.0) cap = std::min(cap, dev.proc_capacity / dev.proc_cost - dev.data_count);
  return std::max(cap, 0.0);
}

template <typename StepRule>
OffloadRun run_rule(const NetworkState& net, const SamplingDecision& sampling, int horizon,
                    std::uint64_t seed, StepRule rule) {
  if (sampling.size() != net.size()) throw Error("dimension_mismatch", "sampling vector length != N");
  if (horizon < 0) throw Error("invalid_argument", "horizon must be non-negative");
  OffloadRun run;
  run.plan.num_devices = net.size();
  run.trajectory.push_back(net);
  for (int t = 1; t <= horizon; ++t) {
    const NetworkState& state = run.trajectory.back();
    Matrix phi = rule(state, t);
    run.plan.feasibility.merge(check_feasible(phi, state, sampling));
    OffloadStep step = apply_offload_step(state, phi, derive_seed(seed, 0x0ff1u, static_cast<std::uint64_t>(t)));
    run.plan.phi.push_back(std::move(phi));
    run.trajectory.push_back(std::move(step.next));
  }
  return run;
}

}  // namespace

std::string to_string(SamplingKind kind) {
  switch (kind) {
    case SamplingKind::kSmart: return "smart";
    case SamplingKind::kRandom: return "random";
    case SamplingKind::kHeuristic: return "heuristic";
    case SamplingKind::kAllNodes: return "all_nodes";
  }
  return "?";
}

std::string to_string(OffloadKind kind) {
  switch (kind) {
    case OffloadKind::kOptimized: return "optimized";
    case OffloadKind::kRandom: return "random";
    case OffloadKind::kGreedy: return "greedy";
    case OffloadKind::kNone: return "none";
  }
  return "?";
}

std::string SchemeSpec::name() const { return to_string(sampling) + "+" + to_string(offload); }

SchemeSpec SchemeSpec::parse(const std::string& text) {
  SchemeSpec s;
  std::string head = text;
  std::string tail;
  const auto plus = text.find('+');
  if (plus != std::string::npos) {
    head = text.substr(0, plus);
    tail = text.substr(plus + 1);
  }
  bool no_offload = false;
  for (const std::string suffix : {"-nooffload", "_nooffload"}) {
    if (head.size() > suffix.size() && head.ends_with(suffix)) {
      head.resize(head.size() - suffix.size());
      no_offload = true;
    }
  }
  if (head == "smart") {
    s.sampling = SamplingKind::kSmart;
    s.offload = OffloadKind::kOptimized;
  } else if (head == "random") {
    s.sampling = SamplingKind::kRandom;
    s.offload = OffloadKind::kRandom;
    s.repetitions = 5;
  } else if (head == "heuristic") {
    s.sampling = SamplingKind::kHeuristic;
    s.offload = OffloadKind::kGreedy;
  } else if (head == "all_nodes" || head == "all-nodes" || head == "all") {
    s.sampling = SamplingKind::kAllNodes;
    s.offload = OffloadKind::kNone;
  } else {
    throw Error("unknown_scheme", "unknown sampling scheme '" + head + "'");
  }
  if (no_offload) s.offload = OffloadKind::kNone;
  if (!tail.empty()) {
    if (tail == "optimized") s.offload = OffloadKind::kOptimized;
    else if (tail == "random") s.offload = OffloadKind::kRandom;
    else if (tail == "greedy") s.offload = OffloadKind::kGreedy;
    else if (tail == "none") s.offload = OffloadKind::kNone;
    else throw Error("unknown_scheme", "unknown offloading scheme '" + tail + "'");
  }
  s.validate();
  return s;
}

void SchemeSpec::validate() const {
  if (sampling == SamplingKind::kAllNodes && offload != OffloadKind::kNone)
    throw Error("invalid_scheme", "all_nodes pairs only with offload none");
  if (repetitions < 1) throw Error("invalid_scheme", "repetitions must be >= 1");
}

SamplingDecision sample_random(int num_devices, int budget, std::uint64_t seed) {
  if (budget < 1 || budget > num_devices) throw Error("invalid_sampling", "budget must lie in [1, N]");
  Rng rng(derive_seed(seed, 0x5a1u));
  return SamplingDecision::from_members(num_devices,
                                        sample_without_replacement(rng, num_devices, budget));
}

SamplingDecision sample_random(const NetworkState& net, int budget, std::uint64_t seed) {
  return sample_random(net.size(), budget, seed);
}

SamplingDecision sample_heuristic(const NetworkState& net, int budget) {
  const int n = net.size();
  if (budget < 1 || budget > n) throw Error("invalid_sampling", "budget must lie in [1, N]");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return net.devices[static_cast<std::size_t>(a)].proc_capacity >
           net.devices[static_cast<std::size_t>(b)].proc_capacity;
  });
  order.resize(static_cast<std::size_t>(budget));
  return SamplingDecision::from_members(n, order);
}

Matrix random_offload_step(const NetworkState& state, const SamplingDecision& sampling, Rng& rng) {
  const int n = state.size();
  Matrix phi = Matrix::Zero(n, n);
  const std::vector<int> members = sampling.members();
  for (int k : sampling.non_members()) {
    const DeviceState& dev = state.devices[static_cast<std::size_t>(k)];
    if (dev.data_count <= 0.0) continue;
    for (int i : members)
      if (state.has_edge(k, i)) phi(k, i) = uniform01(rng);
    const double row = phi.row(k).sum();
    if (row > 1.0) phi.row(k) *= kShrink / row;
    double spend = 0.0;
    for (int i : members) spend += phi(k, i) * dev.tx_cost(i);
    spend *= dev.data_count;
    if (spend > dev.tx_budget) phi.row(k) *= dev.tx_budget / spend * kShrink;
  }
  for (int i : members) {
    const DeviceState& dev = state.devices[static_cast<std::size_t>(i)];
    double received = 0.0;
    for (int k = 0; k < n; ++k)
      received += state.devices[static_cast<std::size_t>(k)].data_count * phi(k, i) *
                  (1.0 - state.conn_similarity(k, i));
    const double cap = receive_cap(dev);
    if (received > cap) phi.col(i) *= cap / received * kShrink;
  }
  return phi;
}

Matrix greedy_offload_step(const NetworkState& state, const SamplingDecision& sampling) {
  const int n = state.size();
  Matrix phi = Matrix::Zero(n, n);
  std::vector<int> senders = sampling.non_members();
  std::stable_sort(senders.begin(), senders.end(), [&](int a, int b) {
    return state.devices[static_cast<std::size_t>(a)].data_count >
           state.devices[static_cast<std::size_t>(b)].data_count;
  });
  Vector row_left = Vector::Ones(n);
  Vector budget_left(n);
  for (int k = 0; k < n; ++k) budget_left(k) = state.devices[static_cast<std::size_t>(k)].tx_budget;
  for (int i : sampling.members()) {
    double cap_left = receive_cap(state.devices[static_cast<std::size_t>(i)]);
    for (int k : senders) {
      if (!state.has_edge(k, i)) continue;
      const DeviceState& dev = state.devices[static_cast<std::size_t>(k)];
      if (dev.data_count <= 0.0) continue;
      double v = row_left(k);
      const double unit_cost = dev.data_count * dev.tx_cost(i);
      if (unit_cost > 0.0) v = std::min(v, budget_left(k) / unit_cost);
      const double useful = dev.data_count * (1.0 - state.conn_similarity(k, i));
      if (useful > 0.0) v = std::min(v, cap_left / useful);
      v = std::max(0.0, v * kShrink);
      if (v <= 0.0) continue;
      phi(k, i) = v;
      row_left(k) -= v;
      budget_left(k) -= v * unit_cost;
      cap_left -= v * useful;
    }
  }
  return phi;
}

OffloadRun offload_random(const NetworkState& net, const SamplingDecision& sampling, int horizon,
                          std::uint64_t seed) {
  return run_rule(net, sampling, horizon, seed, [&](const NetworkState& state, int t) {
    Rng rng(derive_seed(seed, 0x4a2du, static_cast<std::uint64_t>(t)));
    return random_offload_step(state, sampling, rng);
  });
}

OffloadRun offload_greedy(const NetworkState& net, const SamplingDecision& sampling, int horizon,
                          std::uint64_t seed) {
  return run_rule(net, sampling, horizon, seed, [&](const NetworkState& state, int) {
    return greedy_offload_step(state, sampling);
  });
}

}  // namespace d2dfl
