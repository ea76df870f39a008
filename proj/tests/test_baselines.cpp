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


#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "d2dfl/baselines.hpp"
#include "test_util.hpp"

using namespace d2dfl;
using d2dfl::testing::add_edge;
using d2dfl::testing::bare_network;

TEST_CASE("random sampling") {
  CHECK(sample_random(6, 6, 3).count() == 6);
  CHECK(sample_random(6, 2, 3).members() == sample_random(6, 2, 3).members());
  CHECK_THROWS_AS(sample_random(6, 7, 3), Error);
  CHECK_THROWS_AS(sample_random(6, 0, 3), Error);

  // Every pair of a 5-choose-2 draw is equally likely.
  std::map<std::vector<int>, int> counts;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) ++counts[sample_random(5, 2, derive_seed(99, static_cast<std::uint64_t>(s))).members()];
  REQUIRE(counts.size() == 10);
  const double expected = draws / 10.0;
  const double sigma = std::sqrt(expected * 0.9);
  double chi2 = 0.0;
  for (const auto& [pair, c] : counts) {
    CHECK(std::abs(c - expected) <= 3.0 * sigma);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < 27.88);  // 0.999 quantile with 9 degrees of freedom
}

TEST_CASE("heuristic sampling ranks by processing capacity") {
  NetworkState net = bare_network({1, 1, 1, 1, 1});
  const std::vector<double> cap{5, 9, 1, 7, 3};
  for (int i = 0; i < 5; ++i) net.devices[static_cast<std::size_t>(i)].proc_capacity = cap[static_cast<std::size_t>(i)];
  CHECK(sample_heuristic(net, 2).members() == std::vector<int>{1, 3});
  CHECK(sample_heuristic(net, 5).count() == 5);

  for (auto& d : net.devices) d.proc_capacity = 4.0;
  CHECK(sample_heuristic(net, 3).members() == std::vector<int>{0, 1, 2});

  Rng rng(5);
  NetworkState big = bare_network(std::vector<double>(12, 1.0));
  std::vector<int> order(12);
  std::iota(order.begin(), order.end(), 0);
  for (auto& d : big.devices) d.proc_capacity = std::floor(uniform(rng, 0.0, 6.0));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return big.devices[static_cast<std::size_t>(a)].proc_capacity >
           big.devices[static_cast<std::size_t>(b)].proc_capacity;
  });
  std::vector<int> top(order.begin(), order.begin() + 5);
  std::sort(top.begin(), top.end());
  CHECK(sample_heuristic(big, 5).members() == top);
}

TEST_CASE("random offloading") {
  NetworkState net = bare_network({10, 10, 10});
  Rng rng(1);
  const SamplingDecision x = SamplingDecision::from_members(3, {0});
  CHECK(random_offload_step(net, x, rng).isZero());

  for (int inst = 0; inst < 100; ++inst) {
    ScenarioConfig sc;
    sc.num_devices = 8;
    sc.sample_budget = 3;
    sc.horizon = 4;
    sc.agg_period = 2;
    sc.pool_per_class = 60;
    sc.data_mean = 20;
    sc.recv_buffer = {1.0, 10.0};
    sc.tx_budget = {1.0, 10.0};
    sc.seed = derive_seed(31, static_cast<std::uint64_t>(inst));
    const NetworkState g = generate_scenario(sc);
    const SamplingDecision s = sample_random(g, 3, sc.seed);
    const OffloadRun run = offload_random(g, s, sc.horizon, sc.seed);
    CHECK(run.plan.feasibility.feasible());
    for (int t = 1; t <= sc.horizon; ++t)
      CHECK(check_feasible(run.plan.phi[static_cast<std::size_t>(t - 1)],
                           run.trajectory[static_cast<std::size_t>(t - 1)], s, 1e-9, 3)
                .feasible());
  }
}

TEST_CASE("greedy offloading") {
  SUBCASE("a lone neighbor sends everything") {
    NetworkState net = bare_network({10, 10});
    add_edge(net, 1, 0);
    const Matrix phi = greedy_offload_step(net, SamplingDecision::from_members(2, {0}));
    CHECK(phi(1, 0) == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("a zero buffer blocks offloading") {
    NetworkState net = bare_network({10, 10});
    add_edge(net, 1, 0);
    net.devices[0].recv_buffer = 0.0;
    CHECK(greedy_offload_step(net, SamplingDecision::from_members(2, {0})).isZero());
  }
  SUBCASE("four-node hand trace") {
    NetworkState net = bare_network({50, 10, 30, 20});
    for (int k = 1; k < 4; ++k) add_edge(net, k, 0, 0.0);
    net.devices[0].recv_buffer = 35.0;
    // Largest sender first: 30 points fit, then 5 of the 20, then nothing.
    const Matrix phi = greedy_offload_step(net, SamplingDecision::from_members(4, {0}));
    CHECK(phi(2, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(phi(3, 0) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(phi(1, 0) == doctest::Approx(0.0));
    CHECK(check_feasible(phi, net, SamplingDecision::from_members(4, {0})).feasible());
  }
  SUBCASE("similarity shrinks the useful volume") {
    NetworkState net = bare_network({50, 40});
    add_edge(net, 1, 0, 0.5);
    net.devices[0].recv_buffer = 10.0;
    const Matrix phi = greedy_offload_step(net, SamplingDecision::from_members(2, {0}));
    CHECK(phi(1, 0) == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("scheme names") {
  const SchemeSpec s = SchemeSpec::parse("smart");
  CHECK(s.sampling == SamplingKind::kSmart);
  CHECK(s.offload == OffloadKind::kOptimized);
  CHECK(s.name() == "smart+optimized");
  CHECK(SchemeSpec::parse("random").offload == OffloadKind::kRandom);
  CHECK(SchemeSpec::parse("heuristic").offload == OffloadKind::kGreedy);
  CHECK(SchemeSpec::parse("smart-nooffload").offload == OffloadKind::kNone);
  CHECK(SchemeSpec::parse("all_nodes").name() == "all_nodes+none");
  const SchemeSpec mixed = SchemeSpec::parse("heuristic+optimized");
  CHECK(mixed.sampling == SamplingKind::kHeuristic);
  CHECK(mixed.offload == OffloadKind::kOptimized);
  for (const char* name : {"smart+optimized", "random+none", "heuristic+greedy", "all_nodes+none"})
    CHECK(SchemeSpec::parse(name).name() == name);
  CHECK_THROWS_AS(SchemeSpec::parse("clever"), Error);
  CHECK_THROWS_AS(SchemeSpec::parse("smart+teleport"), Error);
}
