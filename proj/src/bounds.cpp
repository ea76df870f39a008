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

#include "d2dfl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "d2dfl/offload.hpp"

namespace d2dfl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix augmented(const LossSpec& spec, const Dataset& data) {
  if (!spec.fit_bias) return data.features;
  Matrix x(data.size(), data.dim() + 1);
  x.leftCols(data.dim()) = data.features;
  x.col(data.dim()).setOnes();
  return x;
}

// Gradients of every device at one parameter vector, with the data weights.
struct DeviceGradients {
  std::vector<Vector> grad;
  std::vector<double> size;
};

DeviceGradients device_gradients(const LossSpec& spec, const Vector& w, const NetworkState& state) {
  DeviceGradients out;
  for (const auto& dev : state.devices) {
    const auto d = static_cast<double>(dev.dataset.size());
    out.size.push_back(d);
    out.grad.push_back(d > 0.0 ? gradient(spec, w, dev.dataset) : Vector::Zero(spec.param_count()));
  }
  return out;
}

struct GradientSplit {
  Vector sampled;    // G_S / D_S
  Vector full;       // sum_N D_i g_i / D_N
  Vector unsampled;  // C = sum_{not S} D_i g_i / D_N
  double d_sampled = 0.0;
  double d_total = 0.0;
};

GradientSplit split(const DeviceGradients& g, const SamplingDecision& sampling) {
  GradientSplit s;
  const Index p = g.grad.front().size();
  s.sampled = Vector::Zero(p);
  s.full = Vector::Zero(p);
  s.unsampled = Vector::Zero(p);
  for (std::size_t i = 0; i < g.grad.size(); ++i) {
    const Vector weighted = g.size[i] * g.grad[i];
    s.full += weighted;
    s.d_total += g.size[i];
    if (sampling.contains(static_cast<int>(i))) {
      s.sampled += weighted;
      s.d_sampled += g.size[i];
    } else {
      s.unsampled += weighted;
    }
  }
  if (s.d_sampled <= 0.0) throw Error("invalid_sampling", "sampled devices hold no data");
  s.sampled /= s.d_sampled;
  s.full /= s.d_total;
  s.unsampled /= s.d_total;
  return s;
}

DeltaTerms delta_from(const GradientSplit& s, const DeviceGradients& g, int device, double gamma) {
  const double d = g.size[static_cast<std::size_t>(device)];
  if (d <= 0.0) throw Error("zero_data", "device " + std::to_string(device) + " holds no data");
  DeltaTerms t;
  t.sampling_term = (s.d_total - s.d_sampled) / s.d_total * s.sampled.norm();
  t.statistical_term = gamma / std::sqrt(d);
  t.unsampled_term = s.unsampled.norm();
  t.value = t.sampling_term + t.statistical_term + t.unsampled_term;
  const Vector zeta = s.sampled - s.full;
  t.lhs = (g.grad[static_cast<std::size_t>(device)] - s.full - zeta).norm();
  return t;
}

double max_norm(double acc, const Vector& v) { return v.size() ? std::max(acc, v.norm()) : acc; }

}  // namespace

void BoundParams::validate() const {
  if (!(lipschitz > 0.0) || !(smoothness > 0.0) || !(step_size > 0.0) || !(loss_floor > 0.0) ||
      !(xi > 0.0) || !(gamma > 0.0))
    throw Error("invalid_argument", "bound parameters must be positive");
  if (step_size * smoothness > 1.0 + 1e-12)
    throw Error("invalid_argument", "step size exceeds 1/beta");
}

double power_iteration(const Matrix& sym, int max_iterations, double tolerance) {
  const Index n = sym.rows();
  if (n == 0) return 0.0;
  Vector v(n);
  for (Index j = 0; j < n; ++j) v(j) = 1.0 + 0.1 * static_cast<double>(j) / static_cast<double>(n);
  v.normalize();
  double lambda = v.dot(sym * v);
  for (int it = 0; it < max_iterations; ++it) {
    Vector next = sym * v;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    next /= norm;
    const double updated = next.dot(sym * next);
    v = std::move(next);
    if (std::abs(updated - lambda) <= tolerance * std::max(1.0, std::abs(updated))) {
      lambda = updated;
      break;
    }
    lambda = updated;
  }
  return lambda;
}

SmoothnessEstimate estimate_smoothness(const LossSpec& spec, const Dataset& data, double radius) {
  if (spec.kind == LossKind::kMlp)
    throw Error("non_convex", "smoothness constants are only defined for convex losses");
  if (data.empty()) throw Error("empty_dataset", "smoothness of an empty dataset");
  const Matrix x = augmented(spec, data);
  const Matrix gram = x.transpose() * x / static_cast<double>(x.rows());
  const double top = power_iteration(gram);
  const Vector row_norms = x.rowwise().norm();
  SmoothnessEstimate est;
  if (spec.kind == LossKind::kQuadratic) {
    est.smoothness = top;
    double l = 0.0;
    for (Index r = 0; r < x.rows(); ++r)
      l = std::max(l, (row_norms(r) * radius + std::abs(data.targets(r))) * row_norms(r));
    est.lipschitz = l;
  } else if (spec.num_classes == 2) {
    est.smoothness = 0.25 * top;
    est.lipschitz = row_norms.maxCoeff();
  } else {
    est.smoothness = 0.5 * top;
    est.lipschitz = std::sqrt(2.0) * row_norms.maxCoeff();
  }
  return est;
}

Vector compute_zeta(const LossSpec& spec, const Vector& w, const NetworkState& state,
                    const SamplingDecision& sampling) {
  if (sampling.count() == 0) throw Error("invalid_sampling", "empty sampled set");
  const GradientSplit s = split(device_gradients(spec, w, state), sampling);
  return s.sampled - s.full;
}

DeltaTerms compute_delta_i(const LossSpec& spec, const Vector& w, const NetworkState& state,
                           const SamplingDecision& sampling, int device, double gamma) {
  if (!sampling.contains(device)) throw Error("invalid_argument", "device is not sampled");
  const DeviceGradients g = device_gradients(spec, w, state);
  return delta_from(split(g, sampling), g, device, gamma);
}

double delta_sampled_exact(std::span<const double> deltas, std::span<const double> data) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    num += data[i] * deltas[i];
    den += data[i];
  }
  if (den <= 0.0) throw Error("zero_data", "sampled devices hold no data");
  return num / den;
}

double delta_sampled_mean(std::span<const double> deltas) {
  if (deltas.empty()) throw Error("invalid_sampling", "empty sampled set");
  double s = 0.0;
  for (double d : deltas) s += d;
  return s / static_cast<double>(deltas.size());
}

double theorem1_bound(const BoundTrace& trace, const BoundParams& params, int t, int k) {
  const int tau = trace.agg_period;
  const int start = (k - 1) * tau;
  if (k < 1 || t <= start || t > k * tau)
    throw Error("invalid_argument", "t lies outside aggregation period k");
  if (t > trace.horizon()) throw Error("invalid_argument", "t beyond the recorded trace");
  double sum = 0.0;
  for (int y = start + 1; y <= t; ++y) {
    const double upsilon =
        trace.delta_sampled[static_cast<std::size_t>(y)] * (std::exp2(y - 1 - start) - 1.0);
    sum += upsilon + trace.zeta_prev_norm[static_cast<std::size_t>(y)];
  }
  return sum / params.smoothness;
}

CorollaryValue corollary1_closed_form(const BoundParams& params, int t, int k_hat,
                                      double upsilon_hat) {
  CorollaryValue c;
  c.k_hat = k_hat;
  c.upsilon_hat = upsilon_hat;
  const double eta = params.step_size;
  const double beta = params.smoothness;
  const double base = t * params.xi * eta * (1.0 - beta * eta / 2.0);
  const double slope = (k_hat + 1) * params.lipschitz / (beta * params.loss_floor * params.loss_floor);
  c.denominator = base - slope * upsilon_hat;
  c.taylor = 1.0 / base + slope / (base * base) * upsilon_hat;
  if (c.denominator > 0.0) {
    c.vacuous = false;
    c.value = 1.0 / c.denominator;
  } else {
    c.vacuous = true;
    c.value = kNaN;
  }
  return c;
}

CorollaryValue corollary1_bound(const BoundTrace& trace, const BoundParams& params, int t) {
  if (t < 1 || t > trace.horizon()) throw Error("invalid_argument", "t outside the trace");
  const int tau = trace.agg_period;
  const int k_hat = t / tau;
  const int window = std::max(k_hat, 1);
  double upsilon_hat = 0.0;
  for (int y = (window - 1) * tau + 1; y <= std::min(window * tau, trace.horizon()); ++y) {
    const double upsilon = trace.delta_sampled[static_cast<std::size_t>(y)] *
                           (std::exp2(y - 1 - (window - 1) * tau) - 1.0);
    upsilon_hat += upsilon + trace.zeta_prev_norm[static_cast<std::size_t>(y)];
  }
  BoundParams p = params;
  if (static_cast<std::size_t>(t) < trace.xi.size() && std::isfinite(trace.xi[static_cast<std::size_t>(t)]))
    p.xi = trace.xi[static_cast<std::size_t>(t)];
  return corollary1_closed_form(p, t, k_hat, upsilon_hat);
}

Vector global_minimizer(const LossSpec& spec, const Dataset& data) {
  if (!spec.convex()) throw Error("non_convex", "global minimizer requires a convex loss");
  if (data.empty()) throw Error("empty_dataset", "minimizer of an empty dataset");
  const Matrix x = augmented(spec, data);
  const auto n = static_cast<double>(x.rows());
  if (spec.kind == LossKind::kQuadratic) {
    Matrix gram = x.transpose() * x / n;
    const Vector rhs = x.transpose() * data.targets / n;
    Eigen::LDLT<Matrix> ldlt(gram);
    Vector w = ldlt.solve(rhs);
    if (!w.allFinite()) {
      gram.diagonal().array() += 1e-12;
      w = gram.ldlt().solve(rhs);
    }
    return w;
  }
  // Newton steps with backtracking; the logistic loss is smooth and convex.
  Vector w = Vector::Zero(spec.param_count());
  for (int it = 0; it < 500; ++it) {
    const Vector g = gradient(spec, w, data);
    if (g.norm() < 1e-10) break;
    Matrix h = Matrix::Zero(w.size(), w.size());
    if (spec.num_classes == 2) {
      const Vector z = x * w;
      Vector s(z.size());
      for (Index r = 0; r < z.size(); ++r) {
        const double p = 1.0 / (1.0 + std::exp(-z(r)));
        s(r) = p * (1.0 - p);
      }
      h = x.transpose() * s.asDiagonal() * x / n;
    } else {
      // Gauss-Newton fallback for the softmax model: finite-difference Hessian.
      const double step = 1e-6;
      for (Index j = 0; j < w.size(); ++j) {
        Vector wp = w;
        wp(j) += step;
        h.col(j) = (gradient(spec, wp, data) - g) / step;
      }
      h = 0.5 * (h + h.transpose());
    }
    h.diagonal().array() += 1e-12;
    const Vector dir = -h.ldlt().solve(g);
    const double f0 = loss(spec, w, data);
    double a = 1.0;
    while (a > 1e-12 && loss(spec, w + a * dir, data) > f0 + 1e-4 * a * g.dot(dir)) a *= 0.5;
    w += a * dir;
  }
  return w;
}

BoundEvaluation evaluate_bounds(const LossSpec& spec, std::span<const NetworkState> trajectory,
                                const Vector& initial, const std::vector<StepRecord>& records,
                                const SamplingDecision& sampling, double smoothness,
                                double step_size, double gamma) {
  const int horizon = static_cast<int>(records.size());
  if (static_cast<int>(trajectory.size()) != horizon + 1)
    throw Error("invalid_argument", "trajectory must hold T+1 states");
  if (horizon == 0) throw Error("invalid_argument", "empty trace");
  int tau = 0;
  for (const auto& r : records)
    if (r.aggregated) {
      tau = r.t;
      break;
    }
  if (tau == 0) tau = horizon;

  BoundEvaluation ev;
  BoundTrace& tr = ev.trace;
  tr.agg_period = tau;
  const auto size = static_cast<std::size_t>(horizon + 1);
  tr.zeta_prev_norm.assign(size, 0.0);
  tr.delta_sampled.assign(size, 0.0);
  tr.delta_mean.assign(size, 0.0);
  tr.observed_divergence.assign(size, 0.0);
  tr.loss_gap.assign(size, kNaN);
  tr.xi.assign(size, kNaN);
  tr.prop_excess.assign(size, -std::numeric_limits<double>::infinity());

  // Parameters entering step t, and the model in force at time t.
  auto entering = [&](int t) -> const Vector& {
    if (t == 1) return initial;
    const StepRecord& prev = records[static_cast<std::size_t>(t - 2)];
    return prev.aggregated ? prev.synced : prev.virtual_global;
  };
  auto current = [&](int t) -> const Vector& {
    const StepRecord& r = records[static_cast<std::size_t>(t - 1)];
    return r.aggregated ? r.synced : r.virtual_global;
  };

  // Lipschitz constant over the ball holding every iterate, and the largest dataset.
  double radius = initial.norm();
  double d_max = 0.0;
  for (const auto& r : records) {
    radius = max_norm(radius, r.virtual_global);
    radius = max_norm(radius, r.reference);
    radius = max_norm(radius, r.synced);
    for (const Vector& l : r.locals) radius = max_norm(radius, l);
  }
  double lipschitz = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    const NetworkState& st = trajectory[static_cast<std::size_t>(t)];
    lipschitz = std::max(lipschitz, estimate_smoothness(spec, network_dataset(st), radius).lipschitz);
    for (int i : sampling.members())
      d_max = std::max(d_max, static_cast<double>(st.devices[static_cast<std::size_t>(i)].dataset.size()));
  }
  if (!(gamma > 0.0)) gamma = 2.0 * lipschitz * std::sqrt(d_max);

  const std::vector<int> members = sampling.members();
  std::vector<Vector> anchors{initial};
  double min_gap = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= horizon; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const NetworkState& st = trajectory[ut];
    const StepRecord& rec = records[ut - 1];

    {
      const DeviceGradients g = device_gradients(spec, entering(t), st);
      const GradientSplit s = split(g, sampling);
      tr.zeta_prev_norm[ut] = (s.sampled - s.full).norm();
    }
    {
      const DeviceGradients g = device_gradients(spec, rec.virtual_global, st);
      const GradientSplit s = split(g, sampling);
      std::vector<double> deltas;
      std::vector<double> data;
      for (int i : members) {
        const DeltaTerms d = delta_from(s, g, i, gamma);
        deltas.push_back(d.value);
        data.push_back(g.size[static_cast<std::size_t>(i)]);
        tr.prop_excess[ut] = std::max(tr.prop_excess[ut], d.lhs - d.value);
      }
      tr.delta_sampled[ut] = delta_sampled_exact(deltas, data);
      tr.delta_mean[ut] = delta_sampled_mean(deltas);
    }
    tr.observed_divergence[ut] =
        rec.reference.size() ? (rec.virtual_global - rec.reference).norm() : kNaN;

    const Dataset all = network_dataset(st);
    const Vector w_star = global_minimizer(spec, all);
    tr.loss_gap[ut] = loss(spec, current(t), all) - loss(spec, w_star, all);
    if (tr.loss_gap[ut] > 0.0) min_gap = std::min(min_gap, tr.loss_gap[ut]);

    // Anchors v_k((k-1) tau) for k = 1 .. Khat + 1.
    double xi = std::numeric_limits<double>::infinity();
    const int k_hat = t / tau;
    for (int k = 1; k <= k_hat + 1 && k <= static_cast<int>(anchors.size()); ++k) {
      const double dist = (anchors[static_cast<std::size_t>(k - 1)] - w_star).squaredNorm();
      if (dist > 0.0) xi = std::min(xi, 1.0 / dist);
    }
    tr.xi[ut] = xi;
    if (rec.aggregated) anchors.push_back(rec.synced);
  }

  BoundParams& p = ev.params;
  p.lipschitz = lipschitz;
  p.smoothness = smoothness;
  p.step_size = step_size;
  p.gamma = gamma;
  p.loss_floor = std::isfinite(min_gap) ? 0.5 * min_gap : 1e-12;
  p.xi = 1.0;
  p.validate();

  for (int t = 1; t <= horizon; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    BoundRow row;
    row.t = t;
    row.k = (t + tau - 1) / tau;
    row.observed_divergence = tr.observed_divergence[ut];
    row.theorem1 = theorem1_bound(tr, p, t, row.k);
    row.loss_gap = tr.loss_gap[ut];
    row.corollary = corollary1_bound(tr, p, t);
    row.delta_exact = tr.delta_sampled[ut];
    row.delta_mean = tr.delta_mean[ut];
    row.prop_excess = tr.prop_excess[ut];
    if (row.observed_divergence > row.theorem1 * (1.0 + 1e-12) + 1e-12) ++ev.theorem_violations;
    if (row.prop_excess > 1e-12) ++ev.proposition_violations;
    if (!row.corollary.vacuous) {
      ++ev.corollary_checked;
      if (row.loss_gap > row.corollary.value * (1.0 + 1e-12) + 1e-15) ++ev.corollary_violations;
      if (row.corollary.upsilon_hat < 0.01) {
        ++ev.taylor_checked;
        if (std::abs(row.corollary.value - row.corollary.taylor) > 0.1 * row.corollary.value)
          ++ev.taylor_violations;
      }
    }
    ev.rows.push_back(row);
  }
  return ev;
}

std::vector<FleetRun> run_convex_fleet(const FleetConfig& config) {
  std::vector<FleetRun> out;
  for (int r = 0; r < config.runs; ++r) {
    Rng rng(derive_seed(config.seed, 0xb0u, static_cast<std::uint64_t>(r)));
    FleetRun run;
    run.index = r;
    run.kind = r % 2 == 0 ? LossKind::kQuadratic : LossKind::kLogistic;
    run.agg_period = 1 + (r / 2) % 3;
    run.num_devices = config.min_devices +
                      static_cast<int>(uniform_index(rng, static_cast<std::size_t>(config.max_devices - config.min_devices + 1)));
    run.sample_budget = r % 4 == 0 || run.num_devices == 1
                            ? run.num_devices
                            : 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(run.num_devices - 1)));

    ScenarioConfig sc;
    sc.num_devices = run.num_devices;
    sc.sample_budget = run.sample_budget;
    sc.agg_period = run.agg_period;
    sc.horizon = config.periods * run.agg_period;
    sc.link_prob = 0.5;
    sc.feature_dim = 3;
    sc.data_mean = 25.0;
    sc.pool_per_class = 80;
    sc.recv_buffer = {10.0, 40.0};
    sc.tx_budget = {10.0, 40.0};
    sc.proc_headroom = {1.0, 2.0};
    if (run.kind == LossKind::kQuadratic) {
      sc.task = TaskKind::kRegression;
      sc.num_classes = 4;
      sc.labels_per_device = 2;
      sc.class_separation = 1.5;
    } else {
      sc.task = TaskKind::kClassification;
      sc.num_classes = 2;
      sc.labels_per_device = 1;
      sc.class_separation = 1.0;
    }

    NetworkState net;
    // The logistic minimizer is finite only when both classes are present.
    for (std::uint64_t attempt = 0;; ++attempt) {
      sc.seed = derive_seed(config.seed, 0xb1u, static_cast<std::uint64_t>(r), attempt);
      net = generate_scenario(sc);
      bool has[2] = {false, false};
      for (const auto& dev : net.devices)
        for (int l : dev.label_pool) has[l % 2] = true;
      if (run.kind == LossKind::kQuadratic || (has[0] && has[1])) break;
    }

    std::vector<int> order = sample_without_replacement(rng, run.num_devices, run.sample_budget);
    const SamplingDecision sampling = SamplingDecision::from_members(run.num_devices, order);

    const ObjectiveModel model = ObjectiveModel::make(net, sampling, 1.0, 1.0);
    HorizonOptions ho;
    ho.agg_period = run.agg_period;
    ho.seed = derive_seed(config.seed, 0xb2u, static_cast<std::uint64_t>(r));
    const HorizonResult horizon = solve_horizon(net, model, sc.horizon, ho);

    LossSpec spec;
    spec.kind = run.kind;
    spec.input_dim = sc.feature_dim;
    spec.num_classes = sc.num_classes == 2 ? 2 : sc.num_classes;
    // Step size from the largest smoothness over every dataset the run touches.
    double beta = 0.0;
    for (const NetworkState& st : horizon.trajectory) {
      beta = std::max(beta, estimate_smoothness(spec, network_dataset(st)).smoothness);
      for (const auto& dev : st.devices)
        beta = std::max(beta, estimate_smoothness(spec, dev.dataset).smoothness);
    }
    const double eta = 1.0 / beta;

    const Vector w0 = initial_params(spec, 0);
    TrainerOptions to;
    to.step_size = eta;
    to.agg_period = run.agg_period;
    to.track_reference = true;
    to.track_loss = false;
    FedlTrainer trainer(spec, sampling, w0, to);
    for (std::size_t t = 1; t < horizon.trajectory.size(); ++t) trainer.advance(horizon.trajectory[t]);

    run.evaluation = evaluate_bounds(spec, horizon.trajectory, w0, trainer.records(), sampling,
                                     beta, eta, 0.0);
    out.push_back(std::move(run));
  }
  return out;
}

void write_bound_csv(std::ostream& out, std::span<const FleetRun> runs) {
  out << "t,k,observed_divergence,theorem1_bound,loss_gap,corollary1_bound,taylor_surrogate,"
         "vacuous_flag,run,delta_s_exact,delta_s_mean\n";
  out << std::setprecision(12);
  for (const FleetRun& run : runs) {
    for (const BoundRow& r : run.evaluation.rows) {
      out << r.t << ',' << r.k << ',' << r.observed_divergence << ',' << r.theorem1 << ','
          << r.loss_gap << ',';
      if (!r.corollary.vacuous) out << r.corollary.value;
      out << ',' << r.corollary.taylor << ',' << (r.corollary.vacuous ? 1 : 0) << ',' << run.index
          << ',' << r.delta_exact << ',' << r.delta_mean << '\n';
    }
  }
}

}  // namespace d2dfl
