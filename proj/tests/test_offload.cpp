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
#include <limits>
#include <vector>

#include "doctest.h"

#include "d2dfl/fedl.hpp"
#include "d2dfl/offload.hpp"
#include "test_util.hpp"

using namespace d2dfl;
using d2dfl::testing::add_edge;
using d2dfl::testing::bare_network;

namespace {

// Straight re-implementation of the per-step objective.
double objective_oracle(const Matrix& phi, const NetworkState& s, const std::vector<int>& sampled,
                        double gamma, double grad) {
  double dsum = 0.0, stat = 0.0, unsampled = 0.0;
  for (int i = 0; i < s.size(); ++i)
    if (std::find(sampled.begin(), sampled.end(), i) == sampled.end())
      unsampled += s.devices[static_cast<std::size_t>(i)].data_count;
  for (int i : sampled) {
    double d = s.devices[static_cast<std::size_t>(i)].data_count;
    for (int k = 0; k < s.size(); ++k)
      d += s.devices[static_cast<std::size_t>(k)].data_count * phi(k, i) * (1.0 - s.conn_similarity(k, i));
    dsum += d;
    stat += gamma / std::sqrt(d);
  }
  return unsampled / (dsum + unsampled) * grad + stat / static_cast<double>(sampled.size());
}

NetworkState toy(int n, std::uint64_t seed, double link = 0.6) {
  ScenarioConfig c;
  c.num_devices = n;
  c.sample_budget = std::max(1, n / 2);
  c.link_prob = link;
  c.feature_dim = 3;
  c.data_mean = 25.0;
  c.pool_per_class = 60;
  c.similarity_epsilon = 2.0;
  c.recv_buffer = {2.0, 30.0};
  c.tx_budget = {2.0, 30.0};
  c.proc_headroom = {0.0, 1.0};
  c.seed = seed;
  return generate_scenario(c);
}

}  // namespace

TEST_CASE("objective of the zero plan and of saturated edges") {
  NetworkState net = bare_network({40, 20, 30});
  add_edge(net, 0, 1, 0.25);
  add_edge(net, 0, 2, 1.0);
  const SamplingDecision x = SamplingDecision::from_members(3, {1, 2});
  const ObjectiveModel m = ObjectiveModel::make(net, x, 1.5, 2.0);
  CHECK(m.unsampled_mass == 40.0);
  const double zero = objective(Matrix::Zero(3, 3), net, m);
  CHECK(zero == doctest::Approx(40.0 / 90.0 * 2.0 + 0.5 * (1.5 / std::sqrt(20.0) + 1.5 / std::sqrt(30.0))));
  Matrix phi = Matrix::Zero(3, 3);
  phi(0, 2) = 0.8;
  CHECK(objective(phi, net, m) == zero);
  phi(0, 1) = 0.1;
  CHECK(objective(phi, net, m) < zero);
}

TEST_CASE("objective matches an independent re-implementation on a grid") {
  NetworkState net = bare_network({55, 12, 31});
  add_edge(net, 0, 1, 0.3);
  add_edge(net, 0, 2, 0.6);
  const std::vector<int> sampled{1, 2};
  const ObjectiveModel m = ObjectiveModel::make(net, SamplingDecision::from_members(3, sampled), 0.7, 1.3);
  Matrix phi = Matrix::Zero(3, 3);
  for (int a = 0; a <= 10; ++a)
    for (int b = 0; b <= 10; ++b) {
      phi(0, 1) = a / 10.0;
      phi(0, 2) = b / 10.0;
      CHECK(objective(phi, net, m) == doctest::Approx(objective_oracle(phi, net, sampled, 0.7, 1.3)).epsilon(1e-14));
    }
}

TEST_CASE("feasibility of simple plans") {
  NetworkState net = bare_network({50, 10});
  add_edge(net, 0, 1);
  const SamplingDecision x = SamplingDecision::from_members(2, {1});
  CHECK(check_feasible(Matrix::Zero(2, 2), net, x).feasible());

  net.devices[0].tx_budget = 20.0;
  net.devices[0].tx_cost(1) = 1.0;
  Matrix phi = Matrix::Zero(2, 2);
  phi(0, 1) = 1.0;
  const FeasibilityReport r = check_feasible(phi, net, x);
  REQUIRE_FALSE(r.feasible());
  CHECK(r.violations.front().constraint == "transmit_budget");
  CHECK(r.min_slack.at("transmit_budget") == doctest::Approx(-30.0));
  CHECK(check_feasible(Matrix::Zero(2, 2), net, x, 1e-9, 2).min_slack.at("sampling_budget") == -1.0);
}

TEST_CASE("feasibility report matches brute-force constraint evaluation") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    NetworkState net = bare_network({uniform(rng, 5, 50), uniform(rng, 5, 50), uniform(rng, 5, 50), uniform(rng, 5, 50)});
    for (int k = 0; k < 4; ++k)
      for (int i = 0; i < 4; ++i)
        if (k != i && uniform01(rng) < 0.6) add_edge(net, k, i, uniform01(rng));
    for (auto& d : net.devices) {
      d.recv_buffer = uniform(rng, 1, 40);
      d.tx_budget = uniform(rng, 1, 40);
      d.proc_capacity = d.proc_cost * d.data_count * uniform(rng, 1.0, 2.0);
      for (int j = 0; j < 4; ++j) d.tx_cost(j) = uniform(rng, 0.5, 1.5);
    }
    const SamplingDecision x = SamplingDecision::from_members(4, {1, 3});
    Matrix phi(4, 4);
    for (int k = 0; k < 4; ++k)
      for (int i = 0; i < 4; ++i) phi(k, i) = uniform01(rng) < 0.5 ? 0.0 : uniform(rng, -0.1, 0.6);
    const FeasibilityReport r = check_feasible(phi, net, x, 0.0);

    bool ok = true;
    for (int k = 0; k < 4; ++k) {
      double row = 0.0, spend = 0.0;
      for (int i = 0; i < 4; ++i) {
        const double v = phi(k, i);
        ok = ok && v >= 0.0 && v <= 1.0;
        if (v != 0.0) ok = ok && net.has_edge(k, i) && !x.contains(k) && x.contains(i);
        row += v;
        if (x.contains(i)) spend += v * net.devices[static_cast<std::size_t>(k)].tx_cost(i);
      }
      ok = ok && row <= 1.0 && net.devices[static_cast<std::size_t>(k)].data_count * spend <= net.devices[static_cast<std::size_t>(k)].tx_budget;
    }
    for (int i = 0; i < 4; ++i) {
      double recv = 0.0;
      for (int k = 0; k < 4; ++k) recv += net.devices[static_cast<std::size_t>(k)].data_count * phi(k, i) * (1.0 - net.conn_similarity(k, i));
      const DeviceState& d = net.devices[static_cast<std::size_t>(i)];
      ok = ok && recv <= d.recv_buffer && d.proc_cost * (d.data_count + recv) <= d.proc_capacity;
    }
    CHECK(r.feasible() == ok);
  }
}

TEST_CASE("a single edge saturates its tightest constraint") {
  NetworkState net = bare_network({60, 20});
  add_edge(net, 0, 1, 0.2);
  const SamplingDecision x = SamplingDecision::from_members(2, {1});
  auto run = [&](const NetworkState& s) {
    return solve_timestep(s, ObjectiveModel::make(s, x, 1.0, 1.0)).phi(0, 1);
  };
  CHECK(run(net) == doctest::Approx(1.0).epsilon(1e-7));

  NetworkState buf = net;
  buf.devices[1].recv_buffer = 12.0;  // 60 * 0.8 * phi <= 12
  CHECK(run(buf) == doctest::Approx(0.25).epsilon(1e-7));

  NetworkState proc = net;
  proc.devices[1].proc_capacity = 2.0 * 26.0;  // 2 * (20 + 48 phi) <= 52
  proc.devices[1].proc_cost = 2.0;
  CHECK(run(proc) == doctest::Approx(0.125).epsilon(1e-7));

  NetworkState tx = net;
  tx.devices[0].tx_budget = 9.0;  // 60 * 1.5 * phi <= 9
  tx.devices[0].tx_cost(1) = 1.5;
  CHECK(run(tx) == doctest::Approx(0.1).epsilon(1e-7));
}

TEST_CASE("no edges into the sampled set means no offloading") {
  NetworkState net = bare_network({30, 30, 30});
  add_edge(net, 1, 0);
  const SamplingDecision x = SamplingDecision::from_members(3, {0, 1});
  const TimestepSolution sol = solve_timestep(net, ObjectiveModel::make(net, x, 1.0, 1.0));
  CHECK(sol.phi.isZero());
}

TEST_CASE("solver output is feasible and no worse than the zero plan") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const NetworkState net = toy(8, seed);
    const SamplingDecision x = SamplingDecision::from_members(8, {0, 3, 5, 6});
    const ObjectiveModel m = ObjectiveModel::make(net, x, 1.0, 2.0);
    const TimestepSolution sol = solve_timestep(net, m);
    CHECK(check_feasible(sol.phi, net, x, 1e-9).feasible());
    CHECK(sol.objective <= objective(Matrix::Zero(8, 8), net, m) + 1e-12);
    CHECK(sol.objective == doctest::Approx(objective(sol.phi, net, m)));
  }
}

TEST_CASE("polytope projection") {
  std::vector<HalfSpace> hs{{{0, 1}, {1.0, 1.0}, 1.0}};
  const Vector p = project_polytope((Vector(2) << 2.0, 2.0).finished(), hs);
  CHECK(p(0) == doctest::Approx(0.5));
  CHECK(p(1) == doctest::Approx(0.5));
  const Vector q = project_polytope((Vector(2) << 0.2, 0.3).finished(), hs);
  CHECK(q(0) == doctest::Approx(0.2));
  CHECK(q(1) == doctest::Approx(0.3));
  const Vector r = project_polytope((Vector(2) << -1.0, 0.4).finished(), hs);
  CHECK(r(0) == doctest::Approx(0.0));
  CHECK(r(1) == doctest::Approx(0.4));
}

TEST_CASE("scaling factor updates") {
  NetworkState net = bare_network({10, 10});
  ObjectiveModel m = ObjectiveModel::make(net, SamplingDecision::from_members(2, {1}), 1.0, 1.0);
  const ObjectiveModel flat = update_gradient_estimate(m, 3.0, 3.0, 5);
  CHECK(flat.scaling_factor == kAlphaFloor);
  CHECK(flat.extrapolate(4) == doctest::Approx(3.0).epsilon(1e-5));

  const ObjectiveModel halving = update_gradient_estimate(m, 1.0, 2.0, 1);
  CHECK(halving.scaling_factor == doctest::Approx(2.0));
  CHECK(halving.extrapolate(1) == doctest::Approx(0.5));
  CHECK(halving.extrapolate(3) == doctest::Approx(0.125));

  CHECK(update_gradient_estimate(m, 1.0, 8.0, 3).scaling_factor == doctest::Approx(2.0));
  CHECK_THROWS_AS(update_gradient_estimate(m, 0.0, 1.0, 1), Error);
}

TEST_CASE("extrapolated gradients track a convex run") {
  ScenarioConfig c;
  c.num_devices = 6;
  c.sample_budget = 3;
  c.task = TaskKind::kRegression;
  c.feature_dim = 3;
  c.seed = 21;
  const NetworkState net = generate_scenario(c);
  const LossSpec spec = make_loss_spec(net, LossKind::kQuadratic);
  const int tau = 3;
  TrainerOptions o;
  o.step_size = 0.05;
  o.agg_period = tau;
  FedlTrainer trainer(spec, SamplingDecision::from_members(6, {0, 2, 4}), Vector::Zero(spec.param_count()), o);
  std::vector<double> g;
  for (int t = 0; t < 5 * tau; ++t) {
    trainer.advance(net);
    g.push_back(trainer.trace().gradient_norm.back());
  }
  ObjectiveModel m = ObjectiveModel::make(net, trainer.sampling(), 1.0, 1.0);
  double worst = 0.0;
  for (int k = 2; k < 5; ++k) {
    const double prev = g[static_cast<std::size_t>((k - 1) * tau - 1)];
    const double now = g[static_cast<std::size_t>(k * tau - 1)];
    m = update_gradient_estimate(m, now, prev, tau);
    for (int s = 1; s <= tau; ++s) {
      const double realized = g[static_cast<std::size_t>(k * tau + s - 1)];
      worst = std::max(worst, std::abs(m.extrapolate(s) - realized) / realized);
    }
  }
  CHECK(worst <= 0.5);
}

TEST_CASE("horizon solver") {
  const NetworkState net = toy(5, 4, 0.8);
  const SamplingDecision x = SamplingDecision::from_members(5, {0, 1});
  const ObjectiveModel m = ObjectiveModel::make(net, x, 1.0, 1.0);
  HorizonOptions ho;
  ho.agg_period = 2;

  const HorizonResult empty = solve_horizon(net, m, 0, ho);
  CHECK(empty.plan.horizon() == 0);
  CHECK(empty.trajectory.size() == 1);

  const HorizonResult full = solve_horizon(net, m, 6, ho);
  REQUIRE(full.plan.horizon() == 6);
  CHECK(full.plan.feasibility.feasible());
  double zero_total = 0.0;
  for (int t = 0; t < 6; ++t) {
    const ObjectiveModel mt = [&] {
      ObjectiveModel c = m;
      c.gradient_estimate = full.gradient_estimates[static_cast<std::size_t>(t)];
      return c;
    }();
    zero_total += objective(Matrix::Zero(5, 5), net, mt) / 6.0;
  }
  CHECK(full.plan.objective_value <= zero_total + 1e-12);

  const std::vector<NetworkState> replay = replay_plan(net, full.plan, ho.seed);
  REQUIRE(replay.size() == full.trajectory.size());
  for (std::size_t t = 0; t < replay.size(); ++t) {
    CHECK(replay[t].conn_similarity == full.trajectory[t].conn_similarity);
    CHECK(replay[t].data_counts() == full.trajectory[t].data_counts());
  }
}

TEST_CASE("offloading stops once step one exhausts it") {
  const SamplingDecision x = SamplingDecision::from_members(3, {1, 2});
  HorizonOptions ho;
  ho.agg_period = 1;

  // Saturation: a single edge with ample budgets moves everything at once.
  NetworkState one = bare_network({40, 10, 10});
  add_edge(one, 0, 1);
  const HorizonResult a = solve_horizon(one, ObjectiveModel::make(one, x, 1.0, 1.0), 3, ho);
  CHECK(a.plan.phi[0](0, 1) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(a.trajectory[1].conn_similarity(0, 1) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(a.plan.phi[1].isZero());
  CHECK(a.plan.phi[2].isZero());

  // Exhaustion: processing capacity admits eight more points per receiver in
  // total, and step one takes all of them.
  NetworkState cap = bare_network({40, 10, 10});
  add_edge(cap, 0, 1);
  add_edge(cap, 0, 2);
  cap.devices[1].proc_capacity = 18.0;
  cap.devices[2].proc_capacity = 18.0;
  const HorizonResult b = solve_horizon(cap, ObjectiveModel::make(cap, x, 1.0, 1.0), 3, ho);
  CHECK(b.trajectory[1].devices[1].data_count == doctest::Approx(18.0).epsilon(1e-7));
  CHECK(b.trajectory[1].devices[2].data_count == doctest::Approx(18.0).epsilon(1e-7));
  CHECK(b.plan.phi[1].isZero());
  CHECK(b.plan.phi[2].isZero());
}

TEST_CASE("cumulative useful fraction never exceeds one") {
  // The similarity after T steps equals lambda(0) plus the useful fractions
  // moved; it must stay within [0, 1].
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NetworkState net = toy(7, seed, 0.7);
    const SamplingDecision x = SamplingDecision::from_members(7, {1, 2, 5});
    HorizonOptions ho;
    ho.agg_period = 2;
    const HorizonResult r = solve_horizon(net, ObjectiveModel::make(net, x, 1.0, 1.0), 8, ho);
    for (int k = 0; k < 7; ++k)
      for (int i = 0; i < 7; ++i) {
        double lam = net.conn_similarity(k, i);
        for (int t = 0; t < 8; ++t) {
          const double v = r.plan.phi[static_cast<std::size_t>(t)](k, i);
          CHECK(lam == doctest::Approx(r.trajectory[static_cast<std::size_t>(t)].conn_similarity(k, i)));
          lam += (1.0 - lam) * v;
        }
        CHECK(lam <= 1.0 + 1e-12);
      }
  }
}
