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

// Command-line driver: generate, train-gcn, sample, offload, simulate, bounds, report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "d2dfl/baselines.hpp"
#include "d2dfl/bounds.hpp"
#include "d2dfl/gcn.hpp"
#include "d2dfl/harness.hpp"
#include "d2dfl/serialization.hpp"

namespace fs = std::filesystem;
using namespace d2dfl;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string scheme;
  std::string out = ".";
};

void print_error(const std::string& code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << '\n';
}

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) {
    c.scenario.seed = *o.seed;
    c.fleet.seed = *o.seed;
    c.sync_corpus();
  }
  c.validate();
  return c;
}

fs::path out_dir(const Options& o) {
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io_error", "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

// Loads artifacts from earlier subcommands when present in the output directory.
ExperimentContext load_context(const ExperimentConfig& c, const fs::path& dir, bool need_gcn) {
  std::optional<GcnModel> gcn;
  if (fs::exists(dir / "gcn.json")) gcn = gcn_from_json(read_json_file(dir / "gcn.json"));
  ExperimentConfig copy = c;
  if (!need_gcn) copy.schemes = {"random+none"};
  ExperimentContext ctx = prepare_experiment(copy, gcn);
  if (fs::exists(dir / "scenario.json")) {
    ctx.network = scenario_from_json(read_json_file(dir / "scenario.json"));
    ctx.spec = make_loss_spec(ctx.network, c.loss);
    ctx.test_set = make_test_set(ctx.network, c.test_size, derive_seed(c.scenario.seed, 0x7e57u));
  }
  return ctx;
}

void cmd_generate(const Options& o) {
  const ExperimentConfig c = resolve_config(o);
  const fs::path dir = out_dir(o);
  write_json_file(dir / "config.json", config_to_json(c));
  write_json_file(dir / "scenario.json", scenario_to_json(generate_scenario(c.scenario)));
}

void cmd_train_gcn(const Options& o) {
  const ExperimentConfig c = resolve_config(o);
  const fs::path dir = out_dir(o);
  const TrainingCorpus corpus = build_corpus(c.corpus, c.corpus_size);
  const GcnTrainResult trained = train_gcn(corpus, c.gcn);
  write_json_file(dir / "corpus.json", corpus_to_json(corpus));
  write_json_file(dir / "gcn.json", gcn_to_json(trained.model));
  std::ofstream hist(dir / "gcn_loss.csv");
  if (!hist) throw Error("io_error", "cannot write gcn_loss.csv");
  hist << "epoch,loss\n" << std::setprecision(12);
  for (std::size_t e = 0; e < trained.loss_history.size(); ++e) hist << e << ',' << trained.loss_history[e] << '\n';
}

SchemeSpec scheme_or(const Options& o, const char* fallback) {
  return SchemeSpec::parse(o.scheme.empty() ? fallback : o.scheme);
}

void cmd_sample(const Options& o) {
  const ExperimentConfig c = resolve_config(o);
  const fs::path dir = out_dir(o);
  const SchemeSpec s = scheme_or(o, "smart");
  const ExperimentContext ctx = load_context(c, dir, s.sampling == SamplingKind::kSmart);
  const SamplingDecision x = choose_sampling(c, ctx, s.sampling, derive_seed(c.scenario.seed, 0x5eedu));
  Json j = sampling_to_json(x);
  j["scheme"] = to_string(s.sampling);
  write_json_file(dir / "sampling.json", j);
}

void cmd_offload(const Options& o) {
  const ExperimentConfig c = resolve_config(o);
  const fs::path dir = out_dir(o);
  const SchemeSpec s = scheme_or(o, "smart");
  const bool have_sampling = fs::exists(dir / "sampling.json");
  const ExperimentContext ctx = load_context(c, dir, !have_sampling && s.sampling == SamplingKind::kSmart);
  const std::uint64_t seed = derive_seed(c.scenario.seed, 0x5eedu);
  const SamplingDecision x = have_sampling ? sampling_from_json(read_json_file(dir / "sampling.json"))
                                           : choose_sampling(c, ctx, s.sampling, seed);
  if (x.size() != ctx.network.size())
    throw Error("dimension_mismatch", "sampling.json does not match the scenario size");
  const OffloadRun run = plan_offloading(c, ctx, x, s.offload, seed);
  Json j = plan_to_json(run.plan);
  j["scheme"] = to_string(s.offload);
  j["sampling"] = sampling_to_json(x);
  write_json_file(dir / "plan.json", j);
  if (!run.plan.feasibility.feasible())
    throw Error("infeasible_offload", run.plan.feasibility.summary());
}

void cmd_simulate(const Options& o) {
  ExperimentConfig c = resolve_config(o);
  const fs::path dir = out_dir(o);
  if (!o.scheme.empty()) {
    c.schemes = {SchemeSpec::parse(o.scheme).name()};
    if (SchemeSpec::parse(o.scheme).sampling != SamplingKind::kAllNodes) c.schemes.push_back("all_nodes+none");
  }
  std::optional<GcnModel> gcn;
  if (fs::exists(dir / "gcn.json")) gcn = gcn_from_json(read_json_file(dir / "gcn.json"));
  write_report(dir, run_all(c, gcn));
}

void cmd_bounds(const Options& o) {
  ExperimentConfig c = resolve_config(o);
  const fs::path dir = out_dir(o);
  ExperimentReport report;
  report.seed = c.fleet.seed;
  report.fleet = run_convex_fleet(c.fleet);
  std::ofstream csv(dir / "bounds.csv");
  if (!csv) throw Error("io_error", "cannot write bounds.csv");
  csv << "# schema_version=" << kReportSchemaVersion << '\n';
  write_bound_csv(csv, report.fleet);
  Json summary = {{"format", "d2dfl.bounds_summary"}, {"version", kReportSchemaVersion}, {"seed", c.fleet.seed}};
  int th = 0, pr = 0, co = 0, cc = 0, tv = 0, tc = 0, rows = 0;
  for (const FleetRun& r : report.fleet) {
    const BoundEvaluation& e = r.evaluation;
    th += e.theorem_violations;
    pr += e.proposition_violations;
    co += e.corollary_violations;
    cc += e.corollary_checked;
    tv += e.taylor_violations;
    tc += e.taylor_checked;
    rows += static_cast<int>(e.rows.size());
  }
  summary["runs"] = report.fleet.size();
  summary["rows"] = rows;
  summary["theorem_violations"] = th;
  summary["proposition_violations"] = pr;
  summary["corollary_violations"] = co;
  summary["corollary_checked"] = cc;
  summary["taylor_violations"] = tv;
  summary["taylor_checked"] = tc;
  write_json_file(dir / "bounds_summary.json", summary);
}

void cmd_report(const Options& o, const std::vector<std::string>& inputs) {
  const fs::path dir = out_dir(o);
  std::vector<fs::path> sources;
  for (const auto& in : inputs) sources.emplace_back(fs::path(in) / "results.json");
  if (sources.empty()) sources.push_back(dir / "results.json");
  ExperimentReport merged;
  for (const auto& src : sources) {
    ExperimentReport r = report_from_json(read_json_file(src));
    if (merged.results.empty()) {
      merged.seed = r.seed;
      merged.reference_accuracy = r.reference_accuracy;
    }
    for (auto& res : r.results) merged.results.push_back(std::move(res));
    for (auto& f : r.fleet) merged.fleet.push_back(std::move(f));
  }
  write_report(dir, merged);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Device sampling and D2D offloading for federated learning"};
  app.require_subcommand(1);
  Options o;
  std::vector<std::string> inputs;
  auto add_common = [&](CLI::App* sub, bool scheme) {
    sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    if (scheme) sub->add_option("--scheme", o.scheme, "scheme name, e.g. smart+optimized");
  };
  auto* generate = app.add_subcommand("generate", "write a scenario snapshot");
  auto* train = app.add_subcommand("train-gcn", "build the training corpus and fit the GCN");
  auto* sample = app.add_subcommand("sample", "choose the sampled set");
  auto* offload = app.add_subcommand("offload", "compute an offloading plan");
  auto* simulate = app.add_subcommand("simulate", "run every configured scheme");
  auto* bounds = app.add_subcommand("bounds", "run the convex fleet and evaluate the bounds");
  auto* report = app.add_subcommand("report", "rebuild summaries from results.json files");
  add_common(generate, false);
  add_common(train, false);
  add_common(sample, true);
  add_common(offload, true);
  add_common(simulate, true);
  add_common(bounds, false);
  add_common(report, false);
  report->add_option("inputs", inputs, "directories holding results.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*generate) cmd_generate(o);
    else if (*train) cmd_train_gcn(o);
    else if (*sample) cmd_sample(o);
    else if (*offload) cmd_offload(o);
    else if (*simulate) cmd_simulate(o);
    else if (*bounds) cmd_bounds(o);
    else if (*report) cmd_report(o, inputs);
  } catch (const Error& e) {
    print_error(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
