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

#include "d2dfl/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "d2dfl/fedl.hpp"
#include "d2dfl/offload.hpp"

namespace d2dfl {

namespace {

struct Forward {
  Matrix m1;  // A pi
  Matrix z1;  // A pi Q1
  Matrix h1;  // ReLU(z1)
  Matrix m2;  // A h1
  Vector h2;  // m2 Q2
  Vector gamma;
};

Vector softmax(const Vector& h) {
  const double top = h.maxCoeff();
  Vector e = (h.array() - top).exp().matrix();
  return e / e.sum();
}

Forward forward_pass(const GcnModel& model, const GcnInput& input) {
  if (input.features.cols() != model.q1.rows() || model.q1.cols() != model.q2.size() ||
      input.normalized.rows() != input.features.rows() ||
      input.normalized.cols() != input.features.rows())
    throw Error("dimension_mismatch", "GCN weights and input do not agree");
  Forward f;
  f.m1 = input.normalized * input.features;
  f.z1 = f.m1 * model.q1;
  f.h1 = f.z1.cwiseMax(0.0);
  f.m2 = input.normalized * f.h1;
  f.h2 = f.m2 * model.q2;
  f.gamma = softmax(f.h2);
  return f;
}

double sample_loss(const Forward& f, const std::vector<int>& target) {
  const double top = f.h2.maxCoeff();
  const double lse = top + std::log((f.h2.array() - top).exp().sum());
  double s = 0.0;
  for (int j : target) s += lse - f.h2(j);
  return s;
}

void accumulate_gradient(const GcnModel& model, const GcnInput& input,
                         const std::vector<int>& target, GcnModel& grad) {
  const Forward f = forward_pass(model, input);
  Vector dh = static_cast<double>(target.size()) * f.gamma;
  for (int j : target) dh(j) -= 1.0;
  grad.q2 += f.m2.transpose() * dh;
  const Matrix dm2 = dh * model.q2.transpose();
  const Matrix dh1 = input.normalized.transpose() * dm2;
  const Matrix dz1 = dh1.cwiseProduct((f.z1.array() > 0.0).cast<double>().matrix());
  grad.q1 += f.m1.transpose() * dz1;
}

GcnModel zeros_like(const GcnModel& m) {
  return {Matrix::Zero(m.q1.rows(), m.q1.cols()), Vector::Zero(m.q2.size())};
}

}  // namespace

GcnModel GcnModel::random(int hidden, std::uint64_t seed) {
  if (hidden < 1) throw Error("invalid_config", "hidden dimension must be >= 1");
  Rng rng(derive_seed(seed, 0x6c1u));
  GcnModel m;
  m.q1.resize(kGcnFeatures, hidden);
  m.q2.resize(hidden);
  const double s1 = std::sqrt(2.0 / kGcnFeatures);
  const double s2 = std::sqrt(1.0 / hidden);
  for (Index c = 0; c < m.q1.cols(); ++c)
    for (Index r = 0; r < m.q1.rows(); ++r) m.q1(r, c) = s1 * standard_normal(rng);
  for (Index r = 0; r < m.q2.size(); ++r) m.q2(r) = s2 * standard_normal(rng);
  return m;
}

void GcnModel::validate() const {
  if (q1.rows() != kGcnFeatures || q1.cols() != q2.size() || q2.size() == 0)
    throw Error("dimension_mismatch", "GCN weights must be 4 x O and O x 1");
  if (!q1.allFinite() || !q2.allFinite()) throw Error("non_finite_weights", "GCN weights");
}

GcnInput make_gcn_input(const Matrix& features, const Matrix& conn_similarity) {
  const Index n = features.rows();
  if (conn_similarity.rows() != n || conn_similarity.cols() != n)
    throw Error("dimension_mismatch", "similarity matrix must be N x N");
  GcnInput in;
  in.features = features;
  in.augmented = conn_similarity + Matrix::Identity(n, n);
  const Vector deg = in.augmented.rowwise().sum();
  const Vector inv_sqrt = deg.array().rsqrt().matrix();
  in.normalized = inv_sqrt.asDiagonal() * in.augmented * inv_sqrt.asDiagonal();
  return in;
}

GcnInput make_gcn_input(const NetworkState& net) {
  const int n = net.size();
  Matrix pi(n, kGcnFeatures);
  for (int i = 0; i < n; ++i) {
    const DeviceState& d = net.devices[static_cast<std::size_t>(i)];
    pi.row(i) << d.data_count, d.proc_capacity, d.proc_cost, d.recv_buffer;
  }
  for (Index c = 0; c < pi.cols(); ++c) {
    const double mean = pi.col(c).mean();
    if (mean > 0.0) pi.col(c) /= mean;
  }
  return make_gcn_input(pi, net.conn_similarity);
}

Vector gcn_forward(const GcnModel& model, const GcnInput& input) {
  return forward_pass(model, input).gamma;
}

long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long r = 1;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

std::vector<std::vector<int>> enumerate_subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0 || k > n) return out;
  std::vector<int> cur(static_cast<std::size_t>(k));
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    out.push_back(cur);
    int j = k - 1;
    while (j >= 0 && cur[static_cast<std::size_t>(j)] == n - k + j) --j;
    if (j < 0) break;
    ++cur[static_cast<std::size_t>(j)];
    for (int q = j + 1; q < k; ++q) cur[static_cast<std::size_t>(q)] = cur[static_cast<std::size_t>(q - 1)] + 1;
  }
  return out;
}

double evaluate_candidate(const NetworkState& net, const SamplingDecision& sampling,
                          const CorpusConfig& config) {
  const LossSpec spec = make_loss_spec(net, config.loss);
  const Vector w0 = initial_params(spec, config.seed);
  TrainerOptions to;
  to.step_size = config.step_size;
  to.agg_period = config.scenario.agg_period;
  to.track_reference = false;
  to.track_loss = false;
  FedlTrainer trainer(spec, sampling, w0, to);
  const double g0 = std::max(trainer.gradient_magnitude(net), 1e-12);
  const ObjectiveModel model = ObjectiveModel::make(net, sampling, config.stat_constant, g0);
  HorizonOptions ho;
  ho.agg_period = config.scenario.agg_period;
  ho.seed = derive_seed(config.seed, 0xc0u);
  double total = 0.0;
  const int horizon = config.periods * config.scenario.agg_period;
  solve_horizon(net, model, horizon, ho, [&](const NetworkState& state, int) {
    auto seen = trainer.advance(state);
    total += global_loss(spec, trainer.model().global_params, state);
    return seen;
  });
  return total / horizon;
}

TrainingCorpus build_corpus(const CorpusConfig& config, int count) {
  if (config.min_budget < 1 || config.max_budget < config.min_budget ||
      config.max_budget > config.scenario.num_devices)
    throw Error("invalid_config", "corpus budgets must satisfy 1 <= min <= max <= N");
  if (config.periods < 1) throw Error("invalid_config", "corpus periods must be >= 1");
  for (int s = config.min_budget; s <= config.max_budget; ++s)
    if (binomial(config.scenario.num_devices, s) > config.max_candidates)
      throw Error("combinatorial_budget", "C(" + std::to_string(config.scenario.num_devices) +
                                              "," + std::to_string(s) +
                                              ") exceeds the candidate ceiling");
  TrainingCorpus corpus;
  const int span = config.max_budget - config.min_budget + 1;
  for (int e = 0; e < count; ++e) {
    ScenarioConfig sc = config.scenario;
    sc.seed = derive_seed(config.seed, 0xc1u, static_cast<std::uint64_t>(e));
    Rng rng(derive_seed(config.seed, 0xc2u, static_cast<std::uint64_t>(e)));
    sc.sample_budget = config.min_budget + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(span)));
    const NetworkState net = generate_scenario(sc);
    GcnSample sample;
    sample.input = make_gcn_input(net);
    sample.sample_budget = sc.sample_budget;
    sample.seed = sc.seed;
    sample.objective = std::numeric_limits<double>::infinity();
    for (const auto& subset : enumerate_subsets(sc.num_devices, sc.sample_budget)) {
      const double value =
          evaluate_candidate(net, SamplingDecision::from_members(sc.num_devices, subset), config);
      ++sample.candidates;
      if (value < sample.objective) {
        sample.objective = value;
        sample.target = subset;
      }
    }
    corpus.samples.push_back(std::move(sample));
  }
  return corpus;
}

double gcn_loss(const GcnModel& model, const GcnSample& sample) {
  return sample_loss(forward_pass(model, sample.input), sample.target);
}

double gcn_loss(const GcnModel& model, const TrainingCorpus& corpus) {
  if (corpus.samples.empty()) throw Error("empty_corpus", "no training samples");
  double s = 0.0;
  for (const GcnSample& sample : corpus.samples) s += gcn_loss(model, sample);
  return s / static_cast<double>(corpus.samples.size());
}

GcnModel gcn_gradient(const GcnModel& model, const GcnSample& sample) {
  GcnModel g = zeros_like(model);
  accumulate_gradient(model, sample.input, sample.target, g);
  return g;
}

GcnModel gcn_gradient(const GcnModel& model, const TrainingCorpus& corpus) {
  if (corpus.samples.empty()) throw Error("empty_corpus", "no training samples");
  GcnModel g = zeros_like(model);
  for (const GcnSample& sample : corpus.samples)
    accumulate_gradient(model, sample.input, sample.target, g);
  const double inv = 1.0 / static_cast<double>(corpus.samples.size());
  g.q1 *= inv;
  g.q2 *= inv;
  return g;
}

GcnTrainResult train_gcn(const TrainingCorpus& corpus, const GcnTrainOptions& options) {
  return train_gcn(corpus, GcnModel::random(options.hidden, options.seed), options);
}

GcnTrainResult train_gcn(const TrainingCorpus& corpus, GcnModel initial,
                         const GcnTrainOptions& options) {
  if (corpus.samples.empty()) throw Error("empty_corpus", "no training samples");
  if (!(options.learning_rate >= 0.0)) throw Error("invalid_config", "learning rate must be >= 0");
  initial.validate();
  GcnTrainResult out;
  out.model = std::move(initial);
  double current = gcn_loss(out.model, corpus);
  if (!std::isfinite(current)) throw Error("divergent_loss", "initial GCN loss is not finite");
  out.loss_history.push_back(current);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const GcnModel g = gcn_gradient(out.model, corpus);
    double lr = options.learning_rate;
    for (int attempt = 0; attempt < 40 && lr > 0.0; ++attempt, lr *= 0.5) {
      GcnModel trial{out.model.q1 - lr * g.q1, out.model.q2 - lr * g.q2};
      const double value = gcn_loss(trial, corpus);
      if (!std::isfinite(value)) continue;
      if (value <= current) {
        out.model = std::move(trial);
        current = value;
        break;
      }
    }
    if (!std::isfinite(current)) throw Error("divergent_loss", "GCN loss is not finite");
    out.loss_history.push_back(current);
  }
  return out;
}

std::vector<int> top_fraction(const Vector& score, const std::vector<int>& candidates) {
  if (candidates.empty()) return {};
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(0.02 * static_cast<double>(candidates.size()))));
  std::vector<int> sorted = candidates;
  std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) { return score(a) > score(b); });
  const double cut = score(sorted[std::min(keep, sorted.size()) - 1]);
  std::vector<int> out;
  for (int c : candidates)
    if (score(c) >= cut) out.push_back(c);
  return out;
}

BranchTrace gcn_branch_trace(const Vector& gamma, const NetworkState& net, int budget) {
  const int n = net.size();
  if (gamma.size() != n) throw Error("dimension_mismatch", "Gamma must have one entry per device");
  if (budget < 1 || budget > n) throw Error("invalid_argument", "budget must lie in [1, N]");
  BranchTrace trace;
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  trace.elite = top_fraction(net.data_counts(), all);
  std::vector<bool> taken(static_cast<std::size_t>(n), false);

  auto best_of = [&](const std::vector<int>& pool) {
    int best = -1;
    for (int j : pool)
      if (!taken[static_cast<std::size_t>(j)] && (best < 0 || gamma(j) > gamma(best))) best = j;
    return best;
  };
  auto pick = [&](int j, bool fallback) {
    taken[static_cast<std::size_t>(j)] = true;
    trace.order.push_back(j);
    trace.fallback.push_back(fallback);
  };

  pick(best_of(trace.elite), false);
  while (static_cast<int>(trace.order.size()) < budget) {
    const int last = trace.order.back();
    std::vector<int> nbrs;
    for (int j = 0; j < n; ++j)
      if (j != last && net.has_edge(last, j)) nbrs.push_back(j);
    Vector dissim = Vector::Zero(n);
    for (int j : nbrs) dissim(j) = 1.0 - net.conn_similarity(last, j);
    const int next = best_of(top_fraction(dissim, nbrs));
    if (next >= 0) {
      pick(next, false);
      continue;
    }
    int restart = best_of(trace.elite);
    if (restart < 0) restart = best_of(all);
    pick(restart, true);
  }
  return trace;
}

SamplingDecision gcn_branch_select(const Vector& gamma, const NetworkState& net, int budget) {
  return SamplingDecision::from_members(net.size(), gcn_branch_trace(gamma, net, budget).order);
}

}  // namespace d2dfl
