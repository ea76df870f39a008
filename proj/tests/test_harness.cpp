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


#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "d2dfl/harness.hpp"
#include "d2dfl/serialization.hpp"

using namespace d2dfl;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.scenario.num_devices = 6;
  c.scenario.sample_budget = 2;
  c.scenario.horizon = 6;
  c.scenario.agg_period = 2;
  c.scenario.pool_per_class = 50;
  c.scenario.data_mean = 15;
  c.scenario.seed = 3;
  c.test_size = 120;
  c.repetitions = 2;
  c.schemes = {"heuristic+greedy", "all_nodes+none"};
  c.sync_corpus();
  return c;
}

}  // namespace

TEST_CASE("aggregations to threshold") {
  const std::vector<double> curve{0.3, 0.6, 0.7};
  CHECK(aggregations_to_threshold(curve, 0.0) == 1);
  CHECK(aggregations_to_threshold(curve, 0.65) == 3);
  CHECK(aggregations_to_threshold(curve, 0.6) == 2);
  CHECK_FALSE(aggregations_to_threshold(curve, 0.8).has_value());
  CHECK_THROWS_AS(aggregations_to_threshold({}, 0.1), Error);
}

TEST_CASE("reference accuracy and derived metrics") {
  ExperimentResult all;
  all.scheme = SchemeSpec::parse("all_nodes");
  all.accuracy = {0.5, 0.8, 0.9};
  all.datapoints = {100, 200, 300};
  ExperimentResult other;
  other.scheme = SchemeSpec::parse("random+none");
  other.accuracy = {0.2, 0.6, 0.7};
  other.datapoints = {40, 80, 120};
  std::vector<ExperimentResult> rs{all, other};
  const double ref = finalize_metrics(rs, 0.6);
  CHECK(ref == doctest::Approx(0.54));
  CHECK(rs[0].aggregations_to_threshold == 2);
  CHECK(rs[0].datapoints_to_threshold == doctest::Approx(200));
  CHECK(rs[1].aggregations_to_threshold == 2);
  CHECK(rs[1].datapoints_to_threshold == doctest::Approx(80));
  CHECK(rs[1].final_accuracy() == doctest::Approx(0.7));

  std::vector<ExperimentResult> only{other};
  CHECK(finalize_metrics(only, 0.6, 0.95) == doctest::Approx(0.95));
  CHECK_FALSE(only[0].aggregations_to_threshold.has_value());
  CHECK_FALSE(only[0].datapoints_to_threshold.has_value());
}

TEST_CASE("single runs report consistent curves") {
  const ExperimentConfig c = small_config();
  const ExperimentContext ctx = prepare_experiment(c);
  CHECK_FALSE(ctx.gcn.has_value());
  CHECK(ctx.test_set.size() == 120);
  const ExperimentResult r = run_single(c, ctx, SchemeSpec::parse("heuristic+greedy"), 9);
  REQUIRE(r.accuracy.size() == 3);
  REQUIRE(r.datapoints.size() == 3);
  REQUIRE(r.datapoints_per_step.size() == 6);
  for (int k = 0; k < 3; ++k) {
    CHECK(r.datapoints[static_cast<std::size_t>(k)] ==
          doctest::Approx(r.datapoints_per_step[static_cast<std::size_t>(2 * k + 1)]));
    CHECK(r.accuracy[static_cast<std::size_t>(k)] >= 0.0);
    CHECK(r.accuracy[static_cast<std::size_t>(k)] <= 1.0);
  }
  for (std::size_t t = 1; t < r.datapoints_per_step.size(); ++t)
    CHECK(r.datapoints_per_step[t] > r.datapoints_per_step[t - 1]);
  REQUIRE(r.sampled_sets.size() == 1);
  CHECK(r.sampled_sets[0].size() == 2);

  const ExperimentResult again = run_single(c, ctx, SchemeSpec::parse("heuristic+greedy"), 9);
  CHECK(again.accuracy == r.accuracy);
}

TEST_CASE("fully similar links make offloading a no-op") {
  const ExperimentConfig c = small_config();
  ExperimentContext ctx = prepare_experiment(c);
  for (int k = 0; k < ctx.network.size(); ++k)
    for (int i = 0; i < ctx.network.size(); ++i)
      if (ctx.network.has_edge(k, i)) ctx.network.conn_similarity(k, i) = 1.0;
  const ExperimentResult none = run_single(c, ctx, SchemeSpec::parse("heuristic+none"), 4);
  for (const char* name : {"heuristic+optimized", "heuristic+greedy"}) {
    const ExperimentResult with = run_single(c, ctx, SchemeSpec::parse(name), 4);
    CHECK(with.accuracy == none.accuracy);
    CHECK(with.datapoints == none.datapoints);
  }
}

TEST_CASE("sampling everyone at random matches all nodes") {
  ExperimentConfig c = small_config();
  c.scenario.sample_budget = c.scenario.num_devices;
  const ExperimentContext ctx = prepare_experiment(c);
  const ExperimentResult all = run_single(c, ctx, SchemeSpec::parse("all_nodes"), 2);
  const ExperimentResult rnd = run_single(c, ctx, SchemeSpec::parse("random+none"), 2);
  CHECK(rnd.datapoints == all.datapoints);
  CHECK(rnd.accuracy == all.accuracy);
}

TEST_CASE("reports are written and read back") {
  const ExperimentConfig c = small_config();
  const ExperimentReport report = run_all(c);
  REQUIRE(report.results.size() == 2);
  CHECK(report.reference_accuracy ==
        doctest::Approx(c.reference_fraction * report.results[1].final_accuracy()));

  const fs::path dir = fs::temp_directory_path() / "d2dfl_test_harness_report";
  fs::remove_all(dir);
  write_report(dir, report);
  for (const char* f : {"accuracy_curves.csv", "aggregations.csv", "datapoints.csv", "results.json"})
    CHECK(fs::exists(dir / f));
  CHECK_FALSE(fs::exists(dir / "bounds.csv"));
  std::ifstream in(dir / "aggregations.csv");
  int lines = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') ++lines;
  CHECK(lines == 3);  // header plus one row per scheme

  const ExperimentReport back = report_from_json(read_json_file(dir / "results.json"));
  REQUIRE(back.results.size() == 2);
  CHECK(back.results[0].accuracy == report.results[0].accuracy);
  CHECK(back.results[0].scheme.name() == "heuristic+greedy");
  CHECK(back.reference_accuracy == report.reference_accuracy);
  fs::remove_all(dir);
}

TEST_CASE("config round trip and rejection") {
  const ExperimentConfig c = small_config();
  const Json j = config_to_json(c);
  CHECK(config_to_json(config_from_json(j)) == j);

  Json bad = j;
  bad["scenario"]["num_nodes"] = 5;
  CHECK_THROWS_AS(config_from_json(bad), Error);
  Json wrong = j;
  wrong["scenario"]["num_devices"] = "six";
  CHECK_THROWS_AS(config_from_json(wrong), Error);
  Json invalid = j;
  invalid["scenario"]["sample_budget"] = 99;
  CHECK_THROWS_AS(config_from_json(invalid).validate(), Error);
}

TEST_CASE("artifact round trips") {
  const ExperimentConfig c = small_config();
  const NetworkState net = generate_scenario(c.scenario);
  const NetworkState back = scenario_from_json(scenario_to_json(net));
  REQUIRE(back.size() == net.size());
  CHECK(back.conn_similarity == net.conn_similarity);
  CHECK(back.adjacency == net.adjacency);
  CHECK(back.data_counts() == net.data_counts());
  CHECK(scenario_to_json(back) == scenario_to_json(net));

  const GcnModel m = GcnModel::random(5, 2);
  const GcnModel mb = gcn_from_json(gcn_to_json(m));
  CHECK(mb.q1 == m.q1);
  CHECK(mb.q2 == m.q2);

  const SamplingDecision x = SamplingDecision::from_members(6, {1, 4});
  CHECK(sampling_from_json(sampling_to_json(x)).members() == x.members());

  const OffloadRun run = offload_greedy(net, x, 4, 1);
  const OffloadPlan pb = plan_from_json(plan_to_json(run.plan));
  REQUIRE(pb.phi.size() == run.plan.phi.size());
  for (std::size_t t = 0; t < pb.phi.size(); ++t) CHECK(pb.phi[t] == run.plan.phi[t]);

  CHECK_THROWS_AS(gcn_from_json(Json{{"format", "scenario"}}), Error);
}
