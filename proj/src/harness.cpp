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

#include "d2dfl/harness.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "d2dfl/fedl.hpp"
#include "d2dfl/offload.hpp"
#include "d2dfl/serialization.hpp"

namespace d2dfl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

bool random_draws(const SchemeSpec& s) {
  return s.sampling == SamplingKind::kRandom || s.offload == OffloadKind::kRandom;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  // Desk-scale network: mean out-degree near ten, same-class points within the
  // similarity radius, and tight resources so that offloading is selective.
  scenario.link_prob = 0.5;
  scenario.similarity_epsilon = 4.0;
  scenario.proc_headroom = {0.0, 0.5};
  scenario.recv_buffer = {2.0, 20.0};
  scenario.tx_budget = {2.0, 20.0};
  sync_corpus();
}

void ExperimentConfig::sync_corpus() {
  const int n = corpus.scenario.num_devices;
  corpus.scenario = scenario;
  corpus.scenario.num_devices = n;
  corpus.scenario.sample_budget = std::min(corpus.min_budget, n);
  corpus.loss = loss;
  corpus.step_size = step_size;
  corpus.stat_constant = stat_constant;
  corpus.seed = derive_seed(scenario.seed, 0xc0c0u);
  gcn.seed = derive_seed(scenario.seed, 0x6c6cu);
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (!(step_size > 0.0)) throw Error("invalid_config", "step_size must be positive");
  if (!(stat_constant > 0.0)) throw Error("invalid_config", "stat_constant must be positive");
  if (test_size < 1) throw Error("invalid_config", "test_size must be >= 1");
  if (!(reference_fraction > 0.0 && reference_fraction <= 1.0))
    throw Error("invalid_config", "reference_fraction must lie in (0, 1]");
  if (repetitions < 1) throw Error("invalid_config", "repetitions must be >= 1");
  if (corpus_size < 1) throw Error("invalid_config", "corpus_size must be >= 1");
  if (schemes.empty()) throw Error("invalid_config", "no schemes configured");
  for (const auto& s : schemes) SchemeSpec::parse(s);
}

GcnModel train_sampler(const ExperimentConfig& config) {
  const TrainingCorpus corpus = build_corpus(config.corpus, config.corpus_size);
  return train_gcn(corpus, config.gcn).model;
}

ExperimentContext prepare_experiment(const ExperimentConfig& config, std::optional<GcnModel> gcn) {
  config.validate();
  ExperimentContext ctx;
  ctx.network = generate_scenario(config.scenario);
  ctx.spec = make_loss_spec(ctx.network, config.loss);
  ctx.test_set = make_test_set(ctx.network, config.test_size, derive_seed(config.scenario.seed, 0x7e57u));
  bool smart = false;
  for (const auto& s : config.schemes) smart |= SchemeSpec::parse(s).sampling == SamplingKind::kSmart;
  if (gcn) ctx.gcn = std::move(gcn);
  else if (smart) ctx.gcn = train_sampler(config);
  return ctx;
}

double ExperimentResult::final_accuracy() const { return accuracy.empty() ? kNaN : accuracy.back(); }

SamplingDecision choose_sampling(const ExperimentConfig& config, const ExperimentContext& ctx,
                                 SamplingKind kind, std::uint64_t seed) {
  const NetworkState& net = ctx.network;
  const int budget = config.scenario.sample_budget;
  switch (kind) {
    case SamplingKind::kSmart:
      if (!ctx.gcn) throw Error("missing_model", "smart sampling needs GCN weights");
      return gcn_branch_select(gcn_forward(*ctx.gcn, make_gcn_input(net)), net, budget);
    case SamplingKind::kRandom: return sample_random(net, budget, derive_seed(seed, 0x5au));
    case SamplingKind::kHeuristic: return sample_heuristic(net, budget);
    case SamplingKind::kAllNodes: return SamplingDecision::all(net.size());
  }
  throw Error("invalid_scheme", "unknown sampling kind");
}

OffloadRun plan_offloading(const ExperimentConfig& config, const ExperimentContext& ctx,
                           const SamplingDecision& sampling, OffloadKind kind, std::uint64_t seed) {
  const NetworkState& net = ctx.network;
  const int horizon = config.scenario.horizon;
  const std::uint64_t offload_seed = derive_seed(seed, 0x0fu);
  switch (kind) {
    case OffloadKind::kOptimized: {
      const Vector w0 = initial_params(ctx.spec, derive_seed(config.scenario.seed, 0x3e1u));
      TrainerOptions to;
      to.step_size = config.step_size;
      to.agg_period = config.scenario.agg_period;
      to.track_reference = false;
      to.track_loss = false;
      FedlTrainer trainer(ctx.spec, sampling, w0, to);
      const double g0 = std::max(trainer.gradient_magnitude(net), 1e-12);
      HorizonOptions ho;
      ho.agg_period = config.scenario.agg_period;
      ho.seed = offload_seed;
      HorizonResult h = solve_horizon(
          net, ObjectiveModel::make(net, sampling, config.stat_constant, g0), horizon, ho,
          [&](const NetworkState& state, int) { return trainer.advance(state); });
      return {std::move(h.plan), std::move(h.trajectory)};
    }
    case OffloadKind::kRandom: return offload_random(net, sampling, horizon, offload_seed);
    case OffloadKind::kGreedy: return offload_greedy(net, sampling, horizon, offload_seed);
    case OffloadKind::kNone: {
      OffloadRun run;
      run.plan.num_devices = net.size();
      run.trajectory.assign(static_cast<std::size_t>(horizon + 1), net);
      for (int t = 0; t < horizon; ++t) run.plan.phi.push_back(Matrix::Zero(net.size(), net.size()));
      return run;
    }
  }
  throw Error("invalid_scheme", "unknown offloading kind");
}

ExperimentResult run_single(const ExperimentConfig& config, const ExperimentContext& ctx,
                            const SchemeSpec& scheme, std::uint64_t seed) {
  scheme.validate();
  const NetworkState& net = ctx.network;
  const int horizon = config.scenario.horizon;
  const int tau = config.scenario.agg_period;

  const SamplingDecision sampling = choose_sampling(config, ctx, scheme.sampling, seed);

  const Vector w0 = initial_params(ctx.spec, derive_seed(config.scenario.seed, 0x3e1u));
  TrainerOptions to;
  to.step_size = config.step_size;
  to.agg_period = tau;
  to.track_reference = false;
  to.track_loss = false;
  to.test_set = &ctx.test_set;
  FedlTrainer trainer(ctx.spec, sampling, w0, to);

  ExperimentResult r;
  r.scheme = scheme;
  r.sampled_sets.push_back(sampling.members());
  r.seeds.push_back(seed);
  double processed = 0.0;
  const std::vector<int> members = sampling.members();
  auto step = [&](const NetworkState& state) {
    auto seen = trainer.advance(state);
    for (int i : members) processed += static_cast<double>(state.devices[static_cast<std::size_t>(i)].dataset.size());
    r.datapoints_per_step.push_back(processed);
    if (trainer.time() % tau == 0) r.datapoints.push_back(processed);
    return seen;
  };

  const std::uint64_t offload_seed = derive_seed(seed, 0x0fu);
  switch (scheme.offload) {
    case OffloadKind::kOptimized: {
      const double g0 = std::max(trainer.gradient_magnitude(net), 1e-12);
      const ObjectiveModel model = ObjectiveModel::make(net, sampling, config.stat_constant, g0);
      HorizonOptions ho;
      ho.agg_period = tau;
      ho.seed = offload_seed;
      solve_horizon(net, model, horizon, ho, [&](const NetworkState& state, int) { return step(state); });
      break;
    }
    case OffloadKind::kRandom:
    case OffloadKind::kGreedy: {
      const OffloadRun run = scheme.offload == OffloadKind::kRandom
                                 ? offload_random(net, sampling, horizon, offload_seed)
                                 : offload_greedy(net, sampling, horizon, offload_seed);
      for (int t = 1; t <= horizon; ++t) step(run.trajectory[static_cast<std::size_t>(t)]);
      break;
    }
    case OffloadKind::kNone:
      for (int t = 1; t <= horizon; ++t) step(net);
      break;
  }
  r.accuracy = trainer.accuracy_curve();
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentContext& ctx,
                                const SchemeSpec& scheme) {
  const int reps = random_draws(scheme) ? std::max(scheme.repetitions, config.repetitions) : 1;
  ExperimentResult avg;
  try {
    for (int rep = 0; rep < reps; ++rep) {
      const std::uint64_t seed = derive_seed(config.scenario.seed, 0x5eedu, static_cast<std::uint64_t>(rep));
      ExperimentResult one = run_single(config, ctx, scheme, seed);
      if (rep == 0) {
        avg = std::move(one);
        continue;
      }
      for (std::size_t k = 0; k < avg.accuracy.size(); ++k) avg.accuracy[k] += one.accuracy[k];
      for (std::size_t k = 0; k < avg.datapoints.size(); ++k) avg.datapoints[k] += one.datapoints[k];
      for (std::size_t k = 0; k < avg.datapoints_per_step.size(); ++k)
        avg.datapoints_per_step[k] += one.datapoints_per_step[k];
      avg.sampled_sets.push_back(one.sampled_sets.front());
      avg.seeds.push_back(one.seeds.front());
    }
  } catch (const Error& e) {
    throw Error(e.code(), scheme.name() + ": " + e.what());
  }
  const double inv = 1.0 / reps;
  for (double& v : avg.accuracy) v *= inv;
  for (double& v : avg.datapoints) v *= inv;
  for (double& v : avg.datapoints_per_step) v *= inv;
  avg.scheme.repetitions = reps;
  return avg;
}

std::optional<int> aggregations_to_threshold(const std::vector<double>& curve,
                                             double reference_accuracy) {
  if (curve.empty()) throw Error("invalid_argument", "empty accuracy curve");
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve[k] >= reference_accuracy) return static_cast<int>(k + 1);
  return std::nullopt;
}

double finalize_metrics(std::vector<ExperimentResult>& results, double reference_fraction,
                        std::optional<double> reference) {
  if (!reference) {
    for (const auto& r : results)
      if (r.scheme.sampling == SamplingKind::kAllNodes) reference = reference_fraction * r.final_accuracy();
  }
  if (!reference) {
    double best = 0.0;
    for (const auto& r : results) best = std::max(best, r.final_accuracy());
    reference = reference_fraction * best;
  }
  for (auto& r : results) {
    r.aggregations_to_threshold = aggregations_to_threshold(r.accuracy, *reference);
    r.datapoints_to_threshold.reset();
    if (r.aggregations_to_threshold)
      r.datapoints_to_threshold = r.datapoints[static_cast<std::size_t>(*r.aggregations_to_threshold - 1)];
  }
  return *reference;
}

ExperimentReport run_all(const ExperimentConfig& config, std::optional<GcnModel> gcn) {
  const ExperimentContext ctx = prepare_experiment(config, std::move(gcn));
  ExperimentReport report;
  report.seed = config.scenario.seed;
  for (const auto& name : config.schemes)
    report.results.push_back(run_experiment(config, ctx, SchemeSpec::parse(name)));
  report.reference_accuracy = finalize_metrics(report.results, config.reference_fraction);
  if (config.run_bounds) report.fleet = run_convex_fleet(config.fleet);
  return report;
}

void write_report(const std::filesystem::path& dir, const ExperimentReport& report) {
  if (report.results.empty()) throw Error("invalid_argument", "no results to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("io_error", "cannot create " + dir.string() + ": " + ec.message());
  const std::string version = "# schema_version=" + std::to_string(kReportSchemaVersion) + "\n";
  {
    auto out = open_output(dir / "accuracy_curves.csv");
    out << version << "scheme,aggregation,accuracy,datapoints\n";
    for (const auto& r : report.results)
      for (std::size_t k = 0; k < r.accuracy.size(); ++k)
        out << r.scheme.name() << ',' << k + 1 << ',' << r.accuracy[k] << ',' << r.datapoints[k] << '\n';
  }
  {
    auto out = open_output(dir / "aggregations.csv");
    out << version << "scheme,final_accuracy,reference_accuracy,aggregations_to_reference\n";
    for (const auto& r : report.results) {
      out << r.scheme.name() << ',' << r.final_accuracy() << ',' << report.reference_accuracy << ',';
      if (r.aggregations_to_threshold) out << *r.aggregations_to_threshold;
      else out << '-';
      out << '\n';
    }
  }
  {
    auto out = open_output(dir / "datapoints.csv");
    out << version << "scheme,datapoints_to_reference,total_datapoints\n";
    for (const auto& r : report.results) {
      out << r.scheme.name() << ',';
      if (r.datapoints_to_threshold) out << *r.datapoints_to_threshold;
      else out << '-';
      out << ',' << (r.datapoints_per_step.empty() ? 0.0 : r.datapoints_per_step.back()) << '\n';
    }
  }
  if (!report.fleet.empty()) {
    auto out = open_output(dir / "bounds.csv");
    out << version;
    write_bound_csv(out, report.fleet);
  }
  write_json_file(dir / "results.json", report_to_json(report));
}

}  // namespace d2dfl
