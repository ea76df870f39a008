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

#include "d2dfl/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace d2dfl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double number(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}
Vector vector_from(const Json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i]);
  return v;
}
Json doubles_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}
std::vector<double> doubles_from(const Json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(number(x));
  return v;
}

Json matrix_json(const Matrix& m) {
  Json data = Json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(number(m(r, c)));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}
Matrix matrix_from(const Json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const Json& data = j.at("data");
  if (static_cast<Index>(data.size()) != rows * cols)
    throw Error("invalid_format", "matrix data length does not match its dimensions");
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = number(data[static_cast<std::size_t>(r * cols + c)]);
  return m;
}

Json dataset_json(const Dataset& d) {
  return {{"features", matrix_json(d.features)},
          {"labels", d.labels},
          {"targets", vector_json(d.targets)},
          {"ids", d.ids}};
}
Dataset dataset_from(const Json& j) {
  Dataset d;
  d.features = matrix_from(j.at("features"));
  d.labels = j.at("labels").get<std::vector<int>>();
  d.targets = vector_from(j.at("targets"));
  d.ids = j.at("ids").get<std::vector<std::uint64_t>>();
  return d;
}

void check_version(const Json& j, const char* format, int version) {
  if (!j.is_object() || j.value("format", std::string()) != format)
    throw Error("invalid_format", std::string("expected a ") + format + " document");
  if (j.value("version", -1) != version)
    throw Error("unsupported_version", std::string(format) + " version " +
                                           std::to_string(j.value("version", -1)) + " is not supported");
}

// Reads the listed keys of one config section into fields, rejecting unknown keys.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error("invalid_config", "section '" + name_ + "' must be an object");
  }
  ~Section() = default;

  template <typename T>
  void read(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error("invalid_config", name_ + "." + key + " has the wrong type");
    }
  }
  void read(const char* key, Range& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw Error("invalid_config", name_ + "." + key + " must be [lo, hi]");
    field = {v[0].get<double>(), v[1].get<double>()};
  }
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw Error("invalid_config", "unknown key " + name_ + "." + key);
  }

 private:
  const Json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

Json range_json(const Range& r) { return Json::array({r.lo, r.hi}); }

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("parse_error", path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
  std::ofstream out(path);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << value.dump(1) << '\n';
  if (!out) throw Error("io_error", "write failed for " + path.string());
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  Section top(j, "config");
  Json empty = Json::object();
  auto section = [&](const char* key) -> const Json& { return j.contains(key) ? j.at(key) : empty; };
  Json unused;
  top.read("scenario", unused);
  top.read("learning", unused);
  top.read("schemes", c.schemes);
  top.read("gcn", unused);
  top.read("bounds", unused);
  top.finish();

  ScenarioConfig& s = c.scenario;
  {
    Section sec(section("scenario"), "scenario");
    std::string task = s.task == TaskKind::kRegression ? "regression" : "classification";
    double variance = kNaN;
    sec.read("num_devices", s.num_devices);
    sec.read("sample_budget", s.sample_budget);
    sec.read("horizon", s.horizon);
    sec.read("agg_period", s.agg_period);
    sec.read("link_prob", s.link_prob);
    sec.read("task", task);
    sec.read("num_classes", s.num_classes);
    sec.read("labels_per_device", s.labels_per_device);
    sec.read("feature_dim", s.feature_dim);
    sec.read("class_separation", s.class_separation);
    sec.read("feature_noise", s.feature_noise);
    sec.read("target_noise", s.target_noise);
    sec.read("pool_per_class", s.pool_per_class);
    sec.read("data_mean", s.data_mean);
    sec.read("data_variance", variance);
    sec.read("similarity_epsilon", s.similarity_epsilon);
    sec.read("probe_fraction", s.probe_fraction);
    sec.read("probe_min", s.probe_min);
    sec.read("proc_cost", s.proc_cost);
    sec.read("proc_headroom", s.proc_headroom);
    sec.read("recv_buffer", s.recv_buffer);
    sec.read("tx_budget", s.tx_budget);
    sec.read("tx_cost", s.tx_cost);
    sec.read("seed", s.seed);
    sec.finish();
    if (task == "classification") s.task = TaskKind::kClassification;
    else if (task == "regression") s.task = TaskKind::kRegression;
    else throw Error("invalid_config", "scenario.task must be classification or regression");
    if (std::isfinite(variance)) s.data_variance = variance;
  }
  {
    Section sec(section("learning"), "learning");
    std::string loss = to_string(c.loss);
    sec.read("loss", loss);
    sec.read("step_size", c.step_size);
    sec.read("stat_constant", c.stat_constant);
    sec.read("test_size", c.test_size);
    sec.read("reference_fraction", c.reference_fraction);
    sec.read("repetitions", c.repetitions);
    sec.finish();
    try {
      c.loss = parse_loss_kind(loss);
    } catch (const Error& e) {
      throw Error("invalid_config", e.what());
    }
  }
  {
    Section sec(section("gcn"), "gcn");
    sec.read("corpus_size", c.corpus_size);
    sec.read("num_devices", c.corpus.scenario.num_devices);
    sec.read("min_budget", c.corpus.min_budget);
    sec.read("max_budget", c.corpus.max_budget);
    sec.read("periods", c.corpus.periods);
    sec.read("max_candidates", c.corpus.max_candidates);
    sec.read("epochs", c.gcn.epochs);
    sec.read("learning_rate", c.gcn.learning_rate);
    sec.read("hidden", c.gcn.hidden);
    sec.finish();
  }
  {
    Section sec(section("bounds"), "bounds");
    sec.read("enabled", c.run_bounds);
    sec.read("runs", c.fleet.runs);
    sec.read("min_devices", c.fleet.min_devices);
    sec.read("max_devices", c.fleet.max_devices);
    sec.read("periods", c.fleet.periods);
    sec.read("seed", c.fleet.seed);
    sec.finish();
  }
  c.sync_corpus();
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  const ScenarioConfig& s = c.scenario;
  Json scenario = {{"num_devices", s.num_devices},
                   {"sample_budget", s.sample_budget},
                   {"horizon", s.horizon},
                   {"agg_period", s.agg_period},
                   {"link_prob", s.link_prob},
                   {"task", s.task == TaskKind::kRegression ? "regression" : "classification"},
                   {"num_classes", s.num_classes},
                   {"labels_per_device", s.labels_per_device},
                   {"feature_dim", s.feature_dim},
                   {"class_separation", s.class_separation},
                   {"feature_noise", s.feature_noise},
                   {"target_noise", s.target_noise},
                   {"pool_per_class", s.pool_per_class},
                   {"data_mean", s.data_mean},
                   {"data_variance", s.variance()},
                   {"similarity_epsilon", s.similarity_epsilon},
                   {"probe_fraction", s.probe_fraction},
                   {"probe_min", s.probe_min},
                   {"proc_cost", range_json(s.proc_cost)},
                   {"proc_headroom", range_json(s.proc_headroom)},
                   {"recv_buffer", range_json(s.recv_buffer)},
                   {"tx_budget", range_json(s.tx_budget)},
                   {"tx_cost", range_json(s.tx_cost)},
                   {"seed", s.seed}};
  Json learning = {{"loss", to_string(c.loss)},
                   {"step_size", c.step_size},
                   {"stat_constant", c.stat_constant},
                   {"test_size", c.test_size},
                   {"reference_fraction", c.reference_fraction},
                   {"repetitions", c.repetitions}};
  Json gcn = {{"corpus_size", c.corpus_size},
              {"num_devices", c.corpus.scenario.num_devices},
              {"min_budget", c.corpus.min_budget},
              {"max_budget", c.corpus.max_budget},
              {"periods", c.corpus.periods},
              {"max_candidates", c.corpus.max_candidates},
              {"epochs", c.gcn.epochs},
              {"learning_rate", c.gcn.learning_rate},
              {"hidden", c.gcn.hidden}};
  Json bounds = {{"enabled", c.run_bounds},
                 {"runs", c.fleet.runs},
                 {"min_devices", c.fleet.min_devices},
                 {"max_devices", c.fleet.max_devices},
                 {"periods", c.fleet.periods},
                 {"seed", c.fleet.seed}};
  return {{"scenario", scenario},
          {"learning", learning},
          {"schemes", c.schemes},
          {"gcn", gcn},
          {"bounds", bounds}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path));
}

Json scenario_to_json(const NetworkState& net) {
  const int n = net.size();
  Matrix adj(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) adj(k, i) = net.adjacency(k, i);
  Json devices = Json::array();
  for (const DeviceState& d : net.devices)
    devices.push_back({{"id", d.id},
                       {"proc_capacity", d.proc_capacity},
                       {"proc_cost", d.proc_cost},
                       {"recv_buffer", d.recv_buffer},
                       {"tx_budget", d.tx_budget},
                       {"tx_cost", vector_json(d.tx_cost)},
                       {"data_count", d.data_count},
                       {"label_pool", d.label_pool},
                       {"dataset", dataset_json(d.dataset)}});
  const SyntheticTask& t = net.task;
  Json task = {{"kind", t.kind == TaskKind::kRegression ? "regression" : "classification"},
               {"class_means", matrix_json(t.class_means)},
               {"feature_noise", t.feature_noise},
               {"regression_weights", vector_json(t.regression_weights)},
               {"label_offsets", vector_json(t.label_offsets)},
               {"target_noise", t.target_noise},
               {"pool", dataset_json(t.pool)}};
  return {{"format", "d2dfl.scenario"},
          {"version", kScenarioFormatVersion},
          {"time", net.time},
          {"adjacency", matrix_json(adj)},
          {"similarity", matrix_json(net.similarity)},
          {"conn_similarity", matrix_json(net.conn_similarity)},
          {"task", task},
          {"devices", devices}};
}

NetworkState scenario_from_json(const Json& j) {
  check_version(j, "d2dfl.scenario", kScenarioFormatVersion);
  try {
    NetworkState net;
    net.time = j.at("time").get<int>();
    const Matrix adj = matrix_from(j.at("adjacency"));
    net.adjacency = adj.cast<std::uint8_t>();
    net.similarity = matrix_from(j.at("similarity"));
    net.conn_similarity = matrix_from(j.at("conn_similarity"));
    const Json& t = j.at("task");
    net.task.kind = t.at("kind").get<std::string>() == "regression" ? TaskKind::kRegression
                                                                     : TaskKind::kClassification;
    net.task.class_means = matrix_from(t.at("class_means"));
    net.task.feature_noise = t.at("feature_noise").get<double>();
    net.task.regression_weights = vector_from(t.at("regression_weights"));
    net.task.label_offsets = vector_from(t.at("label_offsets"));
    net.task.target_noise = t.at("target_noise").get<double>();
    net.task.pool = dataset_from(t.at("pool"));
    for (const Json& d : j.at("devices")) {
      DeviceState dev;
      dev.id = d.at("id").get<int>();
      dev.proc_capacity = d.at("proc_capacity").get<double>();
      dev.proc_cost = d.at("proc_cost").get<double>();
      dev.recv_buffer = d.at("recv_buffer").get<double>();
      dev.tx_budget = d.at("tx_budget").get<double>();
      dev.tx_cost = vector_from(d.at("tx_cost"));
      dev.data_count = d.at("data_count").get<double>();
      dev.label_pool = d.at("label_pool").get<std::vector<int>>();
      dev.dataset = dataset_from(d.at("dataset"));
      net.devices.push_back(std::move(dev));
    }
    const auto n = static_cast<Index>(net.devices.size());
    if (adj.rows() != n || net.conn_similarity.rows() != n || net.similarity.rows() != n)
      throw Error("invalid_format", "scenario matrices do not match the device count");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_format", std::string("scenario: ") + e.what());
  }
}

Json plan_to_json(const OffloadPlan& plan) {
  Json steps = Json::array();
  for (std::size_t t = 0; t < plan.phi.size(); ++t) {
    Json entries = Json::array();
    const Matrix& phi = plan.phi[t];
    for (Index k = 0; k < phi.rows(); ++k)
      for (Index i = 0; i < phi.cols(); ++i)
        if (phi(k, i) != 0.0) entries.push_back(Json::array({k, i, phi(k, i)}));
    steps.push_back({{"t", t + 1},
                     {"objective", t < plan.step_objectives.size() ? number(plan.step_objectives[t]) : Json(nullptr)},
                     {"entries", entries}});
  }
  Json slack = Json::object();
  for (const auto& [name, v] : plan.feasibility.min_slack) slack[name] = number(v);
  return {{"format", "d2dfl.offload_plan"},
          {"version", kPlanFormatVersion},
          {"num_devices", plan.num_devices},
          {"objective_value", number(plan.objective_value)},
          {"feasible", plan.feasibility.feasible()},
          {"min_slack", slack},
          {"steps", steps}};
}

OffloadPlan plan_from_json(const Json& j) {
  check_version(j, "d2dfl.offload_plan", kPlanFormatVersion);
  try {
    OffloadPlan plan;
    plan.num_devices = j.at("num_devices").get<int>();
    plan.objective_value = number(j.at("objective_value"));
    for (const Json& step : j.at("steps")) {
      Matrix phi = Matrix::Zero(plan.num_devices, plan.num_devices);
      for (const Json& e : step.at("entries")) {
        const auto k = e.at(0).get<Index>();
        const auto i = e.at(1).get<Index>();
        if (k < 0 || i < 0 || k >= plan.num_devices || i >= plan.num_devices)
          throw Error("invalid_format", "plan entry outside the network");
        phi(k, i) = e.at(2).get<double>();
      }
      plan.phi.push_back(std::move(phi));
      plan.step_objectives.push_back(number(step.at("objective")));
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_format", std::string("offload plan: ") + e.what());
  }
}

Json gcn_to_json(const GcnModel& model) {
  return {{"format", "d2dfl.gcn"},
          {"version", kGcnFormatVersion},
          {"feature_dim", model.q1.rows()},
          {"hidden_dim", model.q1.cols()},
          {"q1", matrix_json(model.q1)},
          {"q2", matrix_json(model.q2)}};
}

GcnModel gcn_from_json(const Json& j) {
  check_version(j, "d2dfl.gcn", kGcnFormatVersion);
  try {
    GcnModel m;
    m.q1 = matrix_from(j.at("q1"));
    m.q2 = matrix_from(j.at("q2")).col(0);
    if (m.q1.rows() != j.at("feature_dim").get<Index>() || m.q1.cols() != j.at("hidden_dim").get<Index>())
      throw Error("dimension_mismatch", "GCN dimensions disagree with the stored weights");
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_format", std::string("gcn: ") + e.what());
  }
}

Json corpus_to_json(const TrainingCorpus& corpus) {
  Json samples = Json::array();
  for (const GcnSample& s : corpus.samples)
    samples.push_back({{"features", matrix_json(s.input.features)},
                       {"augmented", matrix_json(s.input.augmented)},
                       {"target", s.target},
                       {"sample_budget", s.sample_budget},
                       {"seed", s.seed},
                       {"objective", number(s.objective)},
                       {"candidates", s.candidates}});
  return {{"format", "d2dfl.corpus"}, {"version", kCorpusFormatVersion}, {"samples", samples}};
}

TrainingCorpus corpus_from_json(const Json& j) {
  check_version(j, "d2dfl.corpus", kCorpusFormatVersion);
  try {
    TrainingCorpus corpus;
    for (const Json& s : j.at("samples")) {
      GcnSample sample;
      const Matrix features = matrix_from(s.at("features"));
      const Matrix augmented = matrix_from(s.at("augmented"));
      sample.input = make_gcn_input(features, augmented - Matrix::Identity(augmented.rows(), augmented.cols()));
      sample.target = s.at("target").get<std::vector<int>>();
      sample.sample_budget = s.at("sample_budget").get<int>();
      sample.seed = s.at("seed").get<std::uint64_t>();
      sample.objective = number(s.at("objective"));
      sample.candidates = s.at("candidates").get<int>();
      corpus.samples.push_back(std::move(sample));
    }
    return corpus;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_format", std::string("corpus: ") + e.what());
  }
}

Json sampling_to_json(const SamplingDecision& sampling) {
  return {{"num_devices", sampling.size()}, {"members", sampling.members()}};
}

SamplingDecision sampling_from_json(const Json& j) {
  try {
    return SamplingDecision::from_members(j.at("num_devices").get<int>(),
                                          j.at("members").get<std::vector<int>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_format", std::string("sampling: ") + e.what());
  }
}

Json report_to_json(const ExperimentReport& report) {
  Json results = Json::array();
  for (const auto& r : report.results) {
    results.push_back({{"scheme", r.scheme.name()},
                       {"repetitions", r.scheme.repetitions},
                       {"final_accuracy", number(r.final_accuracy())},
                       {"aggregations_to_threshold",
                        r.aggregations_to_threshold ? Json(*r.aggregations_to_threshold) : Json(nullptr)},
                       {"datapoints_to_threshold",
                        r.datapoints_to_threshold ? Json(*r.datapoints_to_threshold) : Json(nullptr)},
                       {"accuracy", doubles_json(r.accuracy)},
                       {"datapoints", doubles_json(r.datapoints)},
                       {"datapoints_per_step", doubles_json(r.datapoints_per_step)},
                       {"sampled_sets", r.sampled_sets},
                       {"seeds", r.seeds}});
  }
  Json fleet = Json::array();
  for (const FleetRun& run : report.fleet) {
    const BoundEvaluation& e = run.evaluation;
    Json rows = Json::array();
    for (const BoundRow& row : e.rows)
      rows.push_back({{"t", row.t},
                      {"k", row.k},
                      {"observed_divergence", number(row.observed_divergence)},
                      {"theorem1_bound", number(row.theorem1)},
                      {"loss_gap", number(row.loss_gap)},
                      {"corollary_vacuous", row.corollary.vacuous},
                      {"corollary_denominator", number(row.corollary.denominator)},
                      {"corollary1_bound", number(row.corollary.value)},
                      {"taylor_surrogate", number(row.corollary.taylor)},
                      {"upsilon_hat", number(row.corollary.upsilon_hat)},
                      {"k_hat", row.corollary.k_hat},
                      {"delta_s_exact", number(row.delta_exact)},
                      {"delta_s_mean", number(row.delta_mean)},
                      {"prop_excess", number(row.prop_excess)}});
    fleet.push_back({{"run", run.index},
                     {"loss", to_string(run.kind)},
                     {"num_devices", run.num_devices},
                     {"sample_budget", run.sample_budget},
                     {"agg_period", run.agg_period},
                     {"theorem_violations", e.theorem_violations},
                     {"proposition_violations", e.proposition_violations},
                     {"corollary_violations", e.corollary_violations},
                     {"corollary_checked", e.corollary_checked},
                     {"taylor_violations", e.taylor_violations},
                     {"taylor_checked", e.taylor_checked},
                     {"rows", rows}});
  }
  return {{"format", "d2dfl.results"},
          {"version", kReportSchemaVersion},
          {"seed", report.seed},
          {"reference_accuracy", number(report.reference_accuracy)},
          {"results", results},
          {"fleet", fleet}};
}

ExperimentReport report_from_json(const Json& j) {
  check_version(j, "d2dfl.results", kReportSchemaVersion);
  try {
    ExperimentReport report;
    report.seed = j.at("seed").get<std::uint64_t>();
    report.reference_accuracy = number(j.at("reference_accuracy"));
    for (const Json& r : j.at("results")) {
      ExperimentResult res;
      res.scheme = SchemeSpec::parse(r.at("scheme").get<std::string>());
      res.scheme.repetitions = r.at("repetitions").get<int>();
      if (!r.at("aggregations_to_threshold").is_null())
        res.aggregations_to_threshold = r.at("aggregations_to_threshold").get<int>();
      if (!r.at("datapoints_to_threshold").is_null())
        res.datapoints_to_threshold = r.at("datapoints_to_threshold").get<double>();
      res.accuracy = doubles_from(r.at("accuracy"));
      res.datapoints = doubles_from(r.at("datapoints"));
      res.datapoints_per_step = doubles_from(r.at("datapoints_per_step"));
      res.sampled_sets = r.at("sampled_sets").get<std::vector<std::vector<int>>>();
      res.seeds = r.at("seeds").get<std::vector<std::uint64_t>>();
      report.results.push_back(std::move(res));
    }
    for (const Json& f : j.at("fleet")) {
      FleetRun run;
      run.index = f.at("run").get<int>();
      run.kind = parse_loss_kind(f.at("loss").get<std::string>());
      run.num_devices = f.at("num_devices").get<int>();
      run.sample_budget = f.at("sample_budget").get<int>();
      run.agg_period = f.at("agg_period").get<int>();
      BoundEvaluation& e = run.evaluation;
      e.theorem_violations = f.at("theorem_violations").get<int>();
      e.proposition_violations = f.at("proposition_violations").get<int>();
      e.corollary_violations = f.at("corollary_violations").get<int>();
      e.corollary_checked = f.at("corollary_checked").get<int>();
      e.taylor_violations = f.at("taylor_violations").get<int>();
      e.taylor_checked = f.at("taylor_checked").get<int>();
      for (const Json& r : f.at("rows")) {
        BoundRow row;
        row.t = r.at("t").get<int>();
        row.k = r.at("k").get<int>();
        row.observed_divergence = number(r.at("observed_divergence"));
        row.theorem1 = number(r.at("theorem1_bound"));
        row.loss_gap = number(r.at("loss_gap"));
        row.corollary.vacuous = r.at("corollary_vacuous").get<bool>();
        row.corollary.denominator = number(r.at("corollary_denominator"));
        row.corollary.value = number(r.at("corollary1_bound"));
        row.corollary.taylor = number(r.at("taylor_surrogate"));
        row.corollary.upsilon_hat = number(r.at("upsilon_hat"));
        row.corollary.k_hat = r.at("k_hat").get<int>();
        row.delta_exact = number(r.at("delta_s_exact"));
        row.delta_mean = number(r.at("delta_s_mean"));
        row.prop_excess = number(r.at("prop_excess"));
        e.rows.push_back(row);
      }
      report.fleet.push_back(std::move(run));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_format", std::string("results: ") + e.what());
  }
}

}  // namespace d2dfl
