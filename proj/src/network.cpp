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

#include "d2dfl/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

namespace d2dfl {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error("invalid_config", what);
}

void require_range(const Range& r, const std::string& name, bool allow_zero) {
  require(r.lo <= r.hi, name + " range has lo > hi");
  require(allow_zero ? r.lo >= 0.0 : r.lo > 0.0,
          name + (allow_zero ? " must be non-negative" : " must be positive"));
}

Dataset make_pool(SyntheticTask& task, const ScenarioConfig& c, Rng& rng) {
  const Index m = c.feature_dim;
  Dataset pool(m);
  const Index total = static_cast<Index>(c.num_classes) * c.pool_per_class;
  pool.features.resize(total, m);
  pool.targets.resize(total);
  for (int cls = 0; cls < c.num_classes; ++cls) {
    for (int j = 0; j < c.pool_per_class; ++j) {
      const Index row = static_cast<Index>(cls) * c.pool_per_class + j;
      for (Index d = 0; d < m; ++d)
        pool.features(row, d) = task.class_means(cls, d) + c.feature_noise * standard_normal(rng);
      if (task.kind == TaskKind::kClassification) {
        pool.targets(row) = cls;
      } else {
        pool.targets(row) = pool.features.row(row).dot(task.regression_weights) +
                            task.label_offsets(cls) + c.target_noise * standard_normal(rng);
      }
      pool.labels.push_back(cls);
      pool.ids.push_back(static_cast<std::uint64_t>(row));
    }
  }
  return pool;
}

}  // namespace

void ScenarioConfig::validate() const {
  require(num_devices >= 1, "num_devices must be at least 1");
  require(sample_budget >= 1 && sample_budget <= num_devices,
          "sample budget must satisfy 1 <= S <= N");
  require(agg_period >= 1, "aggregation period must be at least 1");
  require(horizon >= agg_period, "horizon must be at least one aggregation period");
  require(link_prob >= 0.0 && link_prob <= 1.0, "link probability must lie in [0,1]");
  require(num_classes >= 1, "num_classes must be positive");
  require(labels_per_device >= 1 && labels_per_device <= num_classes,
          "labels_per_device must lie in [1, num_classes]");
  require(feature_dim >= 1, "feature_dim must be positive");
  require(pool_per_class >= 1, "pool_per_class must be positive");
  require(data_mean > 0.0, "data mean must be positive");
  require(variance() >= 0.0, "data variance must be non-negative");
  require(similarity_epsilon >= 0.0, "similarity epsilon must be non-negative");
  require(probe_fraction > 0.0 && probe_fraction <= 1.0, "probe fraction must lie in (0,1]");
  require(probe_min >= 1, "probe_min must be positive");
  require_range(proc_cost, "proc_cost", true);
  require_range(proc_headroom, "proc_headroom", true);
  require_range(recv_buffer, "recv_buffer", true);
  require_range(tx_budget, "tx_budget", false);
  require_range(tx_cost, "tx_cost", false);
}

Vector NetworkState::data_counts() const {
  Vector d(size());
  for (int i = 0; i < size(); ++i) d(i) = devices[static_cast<std::size_t>(i)].data_count;
  return d;
}

Vector NetworkState::dataset_sizes() const {
  Vector d(size());
  for (int i = 0; i < size(); ++i)
    d(i) = static_cast<double>(devices[static_cast<std::size_t>(i)].dataset.size());
  return d;
}

NetworkState generate_scenario(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int n = config.num_devices;

  NetworkState net;
  SyntheticTask& task = net.task;
  task.kind = config.task;
  task.feature_noise = config.feature_noise;
  task.target_noise = config.target_noise;
  task.class_means.resize(config.num_classes, config.feature_dim);
  for (Index c = 0; c < task.class_means.rows(); ++c)
    for (Index d = 0; d < task.class_means.cols(); ++d)
      task.class_means(c, d) = config.class_separation * standard_normal(rng);
  task.regression_weights.resize(config.feature_dim);
  for (Index d = 0; d < config.feature_dim; ++d) task.regression_weights(d) = standard_normal(rng);
  task.label_offsets.resize(config.num_classes);
  for (Index c = 0; c < config.num_classes; ++c) task.label_offsets(c) = 2.0 * standard_normal(rng);
  task.pool = make_pool(task, config, rng);

  const double sigma = std::sqrt(config.variance());
  net.devices.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    DeviceState& dev = net.devices[static_cast<std::size_t>(i)];
    dev.id = i;
    dev.label_pool = sample_without_replacement(rng, config.num_classes, config.labels_per_device);
    std::sort(dev.label_pool.begin(), dev.label_pool.end());
    const double draw = config.data_mean + sigma * standard_normal(rng);
    const Index count = std::max<Index>(1, static_cast<Index>(std::llround(draw)));
    std::vector<Index> rows(static_cast<std::size_t>(count));
    for (auto& r : rows) {
      const int cls = dev.label_pool[uniform_index(rng, dev.label_pool.size())];
      const auto j = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(config.pool_per_class)));
      r = static_cast<Index>(cls) * config.pool_per_class + j;
    }
    dev.dataset = task.pool.subset(rows);
    dev.data_count = static_cast<double>(count);

    dev.proc_cost = uniform(rng, config.proc_cost.lo, config.proc_cost.hi);
    dev.proc_capacity = dev.proc_cost * dev.data_count *
                        (1.0 + uniform(rng, config.proc_headroom.lo, config.proc_headroom.hi));
    dev.recv_buffer = uniform(rng, config.recv_buffer.lo, config.recv_buffer.hi);
    dev.tx_budget = uniform(rng, config.tx_budget.lo, config.tx_budget.hi);
    dev.tx_cost.resize(n);
    for (int j = 0; j < n; ++j) dev.tx_cost(j) = uniform(rng, config.tx_cost.lo, config.tx_cost.hi);
  }

  net.adjacency = Adjacency::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (k != i && uniform01(rng) < config.link_prob) net.adjacency(k, i) = 1;

  net.similarity = estimate_similarity(net, 0, config.similarity_epsilon, config.probe_fraction,
                                       config.probe_min, derive_seed(config.seed, 0x51u));
  net.conn_similarity = net.similarity.cwiseProduct(net.adjacency.cast<double>());
  return net;
}

Matrix estimate_similarity(const NetworkState& net, int probe_size, double epsilon,
                           double probe_fraction, int probe_min, std::uint64_t seed) {
  const int n = net.size();
  for (const auto& dev : net.devices)
    if (dev.dataset.empty())
      throw Error("empty_dataset", "device " + std::to_string(dev.id) + " has no data");

  Rng rng(seed);
  const double eps2 = epsilon * epsilon;
  Matrix lambda = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const Dataset& src = net.devices[static_cast<std::size_t>(i)].dataset;
    const int available = static_cast<int>(src.size());
    int probes = probe_size;
    if (probes <= 0)
      probes = std::max(probe_min, static_cast<int>(std::ceil(probe_fraction * available)));
    probes = std::min(probes, available);
    const std::vector<int> picked = sample_without_replacement(rng, available, probes);

    for (int j = 0; j < n; ++j) {
      const Dataset& dst = net.devices[static_cast<std::size_t>(j)].dataset;
      int hits = 0;
      for (int p : picked) {
        const auto row = src.features.row(p);
        const int label = src.labels[static_cast<std::size_t>(p)];
        for (Index q = 0; q < dst.size(); ++q) {
          if (dst.labels[static_cast<std::size_t>(q)] != label) continue;
          if ((dst.features.row(q) - row).squaredNorm() <= eps2) {
            ++hits;
            break;
          }
        }
      }
      lambda(i, j) = static_cast<double>(hits) / static_cast<double>(probes);
    }
  }
  return lambda;
}

OffloadStep apply_offload_step(const NetworkState& net, const Matrix& phi, std::uint64_t seed,
                               double tolerance) {
  const int n = net.size();
  if (phi.rows() != n || phi.cols() != n)
    throw Error("dimension_mismatch", "offloading matrix must be N x N");

  auto reject = [](const std::string& constraint, int k, int i, double slack) {
    std::ostringstream msg;
    msg << "infeasible offloading: " << constraint << " violated";
    if (k >= 0) msg << " at sender " << k;
    if (i >= 0) msg << " receiver " << i;
    msg << " (slack " << slack << ")";
    throw Error("infeasible_offload", msg.str());
  };

  const Vector d_prev = net.data_counts();
  const Matrix& lam = net.conn_similarity;
  Vector received = Vector::Zero(n);
  for (int k = 0; k < n; ++k) {
    double row_sum = 0.0;
    double spend = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = phi(k, i);
      if (!std::isfinite(v) || v < -tolerance || v > 1.0 + tolerance)
        reject("bounds", k, i, std::min(v, 1.0 - v));
      if (v > tolerance && !net.has_edge(k, i)) reject("support_adjacency", k, i, -v);
      row_sum += v;
      spend += v * net.devices[static_cast<std::size_t>(k)].tx_cost(i);
      received(i) += d_prev(k) * v * (1.0 - lam(k, i));
    }
    if (row_sum > 1.0 + tolerance) reject("row_sum", k, -1, 1.0 - row_sum);
    const double budget = net.devices[static_cast<std::size_t>(k)].tx_budget;
    if (d_prev(k) * spend > budget + tolerance) reject("transmit_budget", k, -1, budget - d_prev(k) * spend);
  }
  for (int i = 0; i < n; ++i) {
    const DeviceState& dev = net.devices[static_cast<std::size_t>(i)];
    if (received(i) > dev.recv_buffer + tolerance)
      reject("receive_buffer", -1, i, dev.recv_buffer - received(i));
    const double load = dev.proc_cost * (d_prev(i) + received(i));
    if (load > dev.proc_capacity + tolerance)
      reject("processing_capacity", -1, i, dev.proc_capacity - load);
  }

  OffloadStep out{net, received, Matrix::Zero(n, n)};
  NetworkState& next = out.next;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    DeviceState& dst = next.devices[static_cast<std::size_t>(i)];
    for (int k = 0; k < n; ++k) {
      const double v = std::max(0.0, phi(k, i));
      if (v <= 0.0) continue;
      const double useful = d_prev(k) * v * (1.0 - lam(k, i));
      // A full transfer saturates exactly so later useful volume is exactly zero.
      next.conn_similarity(k, i) =
          v >= 1.0 ? 1.0 : std::min(1.0, lam(k, i) + (1.0 - lam(k, i)) * v);

      // Uniform selection among the sender's datapoints the receiver lacks.
      const Dataset& src = net.devices[static_cast<std::size_t>(k)].dataset;
      std::unordered_set<std::uint64_t> held(dst.dataset.ids.begin(), dst.dataset.ids.end());
      std::vector<Index> fresh;
      for (Index r = 0; r < src.size(); ++r) {
        const std::uint64_t id = src.ids[static_cast<std::size_t>(r)];
        if (held.insert(id).second) fresh.push_back(r);
      }
      const auto want = static_cast<Index>(std::floor(useful + 1e-9));
      const auto take = std::min<Index>(want, static_cast<Index>(fresh.size()));
      if (take <= 0) continue;
      const std::vector<int> pick =
          sample_without_replacement(rng, static_cast<int>(fresh.size()), static_cast<int>(take));
      std::vector<Index> rows;
      rows.reserve(pick.size());
      for (int p : pick) rows.push_back(fresh[static_cast<std::size_t>(p)]);
      dst.dataset.append(src, rows);
      out.transferred(k, i) = static_cast<double>(take);
    }
    dst.data_count = d_prev(i) + received(i);
  }
  next.time = net.time + 1;
  return out;
}

Dataset draw_task_samples(const SyntheticTask& task, const std::vector<int>& labels, int count,
                          std::uint64_t seed) {
  if (labels.empty()) throw Error("invalid_argument", "no labels to draw from");
  Rng rng(seed);
  const Index m = task.class_means.cols();
  Dataset out(m);
  out.features.resize(count, m);
  out.targets.resize(count);
  for (int r = 0; r < count; ++r) {
    const int cls = labels[uniform_index(rng, labels.size())];
    for (Index d = 0; d < m; ++d)
      out.features(r, d) = task.class_means(cls, d) + task.feature_noise * standard_normal(rng);
    out.targets(r) = task.kind == TaskKind::kClassification
                         ? static_cast<double>(cls)
                         : out.features.row(r).dot(task.regression_weights) +
                               task.label_offsets(cls) + task.target_noise * standard_normal(rng);
    out.labels.push_back(cls);
    out.ids.push_back(~std::uint64_t{0});
  }
  return out;
}

Dataset make_test_set(const NetworkState& net, int count, std::uint64_t seed) {
  std::set<int> present;
  for (const auto& dev : net.devices) present.insert(dev.label_pool.begin(), dev.label_pool.end());
  return draw_task_samples(net.task, std::vector<int>(present.begin(), present.end()), count, seed);
}

}  // namespace d2dfl
