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


#include <cmath>
#include <set>

#include "doctest.h"

#include "d2dfl/network.hpp"
#include "test_util.hpp"

using namespace d2dfl;
using d2dfl::testing::add_edge;
using d2dfl::testing::bare_network;
using d2dfl::testing::make_dataset;

namespace {

bool same_state(const NetworkState& a, const NetworkState& b) {
  if (a.size() != b.size() || a.adjacency != b.adjacency || a.similarity != b.similarity ||
      a.conn_similarity != b.conn_similarity)
    return false;
  for (int i = 0; i < a.size(); ++i) {
    const DeviceState& x = a.devices[static_cast<std::size_t>(i)];
    const DeviceState& y = b.devices[static_cast<std::size_t>(i)];
    if (x.data_count != y.data_count || x.proc_capacity != y.proc_capacity ||
        x.recv_buffer != y.recv_buffer || x.tx_budget != y.tx_budget || x.tx_cost != y.tx_cost ||
        x.dataset.features != y.dataset.features || x.dataset.labels != y.dataset.labels ||
        x.label_pool != y.label_pool)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("scenario statistics follow the configuration") {
  ScenarioConfig c;
  c.num_devices = 100;
  c.link_prob = 0.1;
  c.labels_per_device = 3;
  c.data_mean = 60.0;
  c.seed = 17;
  const NetworkState net = generate_scenario(c);
  REQUIRE(net.size() == 100);

  double mean = 0.0;
  for (const auto& d : net.devices) mean += d.data_count / 100.0;
  double var = 0.0;
  for (const auto& d : net.devices) var += (d.data_count - mean) * (d.data_count - mean) / 99.0;
  // Standard error of the mean is sqrt(12 / 100); allow four of them.
  CHECK(std::abs(mean - 60.0) < 4.0 * std::sqrt(12.0 / 100.0));
  CHECK(var == doctest::Approx(12.0).epsilon(0.5));

  int edges = 0;
  for (int k = 0; k < 100; ++k) {
    CHECK(net.adjacency(k, k) == 0);
    for (int i = 0; i < 100; ++i) edges += net.adjacency(k, i);
  }
  const double expected = 0.1 * 100 * 99;
  CHECK(std::abs(edges - expected) < 4.0 * std::sqrt(expected * 0.9));

  for (const auto& d : net.devices) {
    CHECK(d.label_pool.size() == 3);
    CHECK(static_cast<double>(d.dataset.size()) == d.data_count);
    for (int l : d.dataset.labels)
      CHECK(std::find(d.label_pool.begin(), d.label_pool.end(), l) != d.label_pool.end());
    CHECK(d.proc_capacity >= d.proc_cost * d.data_count);
  }
  for (int k = 0; k < 100; ++k)
    for (int i = 0; i < 100; ++i) {
      CHECK(net.similarity(k, i) >= 0.0);
      CHECK(net.similarity(k, i) <= 1.0);
      CHECK(net.conn_similarity(k, i) == (net.has_edge(k, i) ? net.similarity(k, i) : 0.0));
    }
}

TEST_CASE("zero link probability yields an empty graph") {
  ScenarioConfig c;
  c.num_devices = 12;
  c.link_prob = 0.0;
  const NetworkState net = generate_scenario(c);
  CHECK(net.adjacency.cast<int>().sum() == 0);
  CHECK(net.conn_similarity.isZero());
}

TEST_CASE("scenario generation is deterministic per seed") {
  ScenarioConfig c;
  c.num_devices = 15;
  c.seed = 99;
  CHECK(same_state(generate_scenario(c), generate_scenario(c)));
  ScenarioConfig d = c;
  d.seed = 100;
  CHECK_FALSE(same_state(generate_scenario(c), generate_scenario(d)));
}

TEST_CASE("invalid scenario configurations are rejected") {
  ScenarioConfig c;
  c.sample_budget = c.num_devices + 1;
  CHECK_THROWS_AS(generate_scenario(c), Error);
  ScenarioConfig d;
  d.link_prob = 1.5;
  CHECK_THROWS_AS(generate_scenario(d), Error);
  ScenarioConfig e;
  e.labels_per_device = e.num_classes + 1;
  CHECK_THROWS_AS(generate_scenario(e), Error);
}

TEST_CASE("similarity of identical and label-disjoint datasets") {
  NetworkState net = bare_network({3, 3, 3});
  net.devices[0].dataset = make_dataset({{0, 0}, {1, 1}, {2, 2}}, {0, 1, 0});
  net.devices[1].dataset = make_dataset({{0, 0}, {1, 1}, {2, 2}}, {0, 1, 0});
  net.devices[2].dataset = make_dataset({{0, 0}, {1, 1}, {2, 2}}, {5, 6, 7});
  const Matrix lam = estimate_similarity(net, 3, 1e-9, 0.1, 1, 1);
  CHECK(lam(0, 1) == 1.0);
  CHECK(lam(1, 0) == 1.0);
  CHECK(lam(0, 0) == 1.0);
  CHECK(lam(0, 2) == 0.0);
  CHECK(lam(2, 1) == 0.0);
}

TEST_CASE("similarity matches an all-pairs count") {
  // Device 0 has two of its three points near device 1, device 1 has one of
  // two near device 0. Similarity is not symmetric.
  NetworkState net = bare_network({3, 2, 2});
  net.devices[0].dataset = make_dataset({{0, 0}, {5, 5}, {9, 0}}, {1, 2, 1});
  net.devices[1].dataset = make_dataset({{0.5, 0}, {5, 5.5}}, {1, 2});
  net.devices[2].dataset = make_dataset({{5, 5}, {20, 20}}, {1, 2});
  const Matrix lam = estimate_similarity(net, 100, 1.0, 0.1, 1, 3);

  Matrix oracle(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Dataset& a = net.devices[static_cast<std::size_t>(i)].dataset;
      const Dataset& b = net.devices[static_cast<std::size_t>(j)].dataset;
      int hits = 0;
      for (Index p = 0; p < a.size(); ++p) {
        bool any = false;
        for (Index q = 0; q < b.size(); ++q)
          any = any || (a.labels[static_cast<std::size_t>(p)] == b.labels[static_cast<std::size_t>(q)] &&
                        (a.features.row(p) - b.features.row(q)).norm() <= 1.0);
        hits += any ? 1 : 0;
      }
      oracle(i, j) = static_cast<double>(hits) / static_cast<double>(a.size());
    }
  CHECK(lam.isApprox(oracle, 0.0));
  CHECK(lam(0, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(lam(1, 0) == doctest::Approx(1.0));
  CHECK(lam(0, 2) == 0.0);
  CHECK(lam(2, 0) == 0.0);
}

TEST_CASE("zero offloading leaves the state unchanged") {
  ScenarioConfig c;
  c.num_devices = 8;
  c.link_prob = 0.5;
  const NetworkState net = generate_scenario(c);
  const OffloadStep step = apply_offload_step(net, Matrix::Zero(8, 8), 1);
  CHECK(step.received.isZero());
  CHECK(step.next.conn_similarity == net.conn_similarity);
  for (int i = 0; i < 8; ++i) {
    CHECK(step.next.devices[static_cast<std::size_t>(i)].data_count == net.devices[static_cast<std::size_t>(i)].data_count);
    CHECK(step.next.devices[static_cast<std::size_t>(i)].dataset.size() == net.devices[static_cast<std::size_t>(i)].dataset.size());
  }
  CHECK(step.next.time == net.time + 1);
}

TEST_CASE("hand-evaluated offloading step") {
  NetworkState net = bare_network({100, 10});
  add_edge(net, 0, 1, 0.5);
  Matrix phi = Matrix::Zero(2, 2);
  phi(0, 1) = 0.4;
  const OffloadStep step = apply_offload_step(net, phi, 1);
  CHECK(step.received(1) == doctest::Approx(20.0));
  CHECK(step.next.devices[1].data_count == doctest::Approx(30.0));
  CHECK(step.next.devices[0].data_count == 100.0);
  CHECK(step.next.conn_similarity(0, 1) == doctest::Approx(0.7));
}

TEST_CASE("a full transfer saturates similarity and stops later useful data") {
  ScenarioConfig c;
  c.num_devices = 3;
  c.sample_budget = 1;
  c.link_prob = 1.0;
  c.similarity_epsilon = 1e-9;
  c.recv_buffer = {1e4, 2e4};
  c.tx_budget = {1e4, 2e4};
  c.proc_headroom = {100.0, 200.0};
  c.seed = 5;
  NetworkState net = generate_scenario(c);
  net.conn_similarity(0, 1) = 0.0;
  const double d0 = net.devices[0].data_count;
  const double d1 = net.devices[1].data_count;

  Matrix phi = Matrix::Zero(3, 3);
  phi(0, 1) = 1.0;
  const OffloadStep first = apply_offload_step(net, phi, 2);
  CHECK(first.next.conn_similarity(0, 1) == 1.0);
  CHECK(first.received(1) == doctest::Approx(d0));
  CHECK(first.next.devices[1].data_count == doctest::Approx(d0 + d1));

  phi(0, 1) = 0.7;
  const OffloadStep second = apply_offload_step(first.next, phi, 3);
  CHECK(second.received(1) == 0.0);
  CHECK(second.transferred(0, 1) == 0.0);
  CHECK(second.next.conn_similarity(0, 1) == 1.0);
}

TEST_CASE("physical transfer is the floor of the useful volume") {
  ScenarioConfig c;
  c.num_devices = 2;
  c.sample_budget = 1;
  c.link_prob = 1.0;
  c.data_mean = 40.0;
  c.data_variance = 0.0;
  c.pool_per_class = 500;
  c.recv_buffer = {1e4, 2e4};
  c.tx_budget = {1e4, 2e4};
  c.proc_headroom = {100.0, 200.0};
  NetworkState net = generate_scenario(c);
  net.conn_similarity(0, 1) = 0.25;
  Matrix phi = Matrix::Zero(2, 2);
  phi(0, 1) = 0.33;
  const OffloadStep step = apply_offload_step(net, phi, 4);
  const double useful = 40.0 * 0.33 * 0.75;
  CHECK(step.received(1) == doctest::Approx(useful));
  CHECK(step.transferred(0, 1) <= std::floor(useful));
  CHECK(step.next.devices[1].dataset.size() == net.devices[1].dataset.size() + static_cast<Index>(step.transferred(0, 1)));
  // Received points are new to the receiver.
  std::set<std::uint64_t> ids(net.devices[1].dataset.ids.begin(), net.devices[1].dataset.ids.end());
  const Dataset& after = step.next.devices[1].dataset;
  for (Index r = net.devices[1].dataset.size(); r < after.size(); ++r)
    CHECK(ids.count(after.ids[static_cast<std::size_t>(r)]) == 0);
  CHECK(std::abs(step.next.devices[1].data_count - static_cast<double>(after.size())) <= 1.0);
}

TEST_CASE("infeasible offloading is rejected") {
  NetworkState net = bare_network({10, 10});
  add_edge(net, 0, 1);
  Matrix phi = Matrix::Zero(2, 2);
  phi(1, 0) = 0.5;  // no edge 1 -> 0
  CHECK_THROWS_AS(apply_offload_step(net, phi, 1), Error);
  phi.setZero();
  phi(0, 1) = 1.5;
  CHECK_THROWS_AS(apply_offload_step(net, phi, 1), Error);
  phi(0, 1) = 0.5;
  net.devices[1].recv_buffer = 1.0;
  try {
    apply_offload_step(net, phi, 1);
    FAIL("expected infeasible_offload");
  } catch (const Error& e) {
    CHECK(e.code() == "infeasible_offload");
  }
}

TEST_CASE("test sets cover exactly the classes held in the network") {
  ScenarioConfig c;
  c.num_devices = 5;
  const NetworkState net = generate_scenario(c);
  const Dataset test = make_test_set(net, 500, 3);
  CHECK(test.size() == 500);
  std::set<int> labels(test.labels.begin(), test.labels.end());
  std::set<int> held;
  for (const auto& d : net.devices) held.insert(d.label_pool.begin(), d.label_pool.end());
  CHECK(labels == held);
  const Dataset again = make_test_set(net, 500, 3);
  CHECK(again.features == test.features);
}
