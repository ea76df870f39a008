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

#include "d2dfl/offload.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace d2dfl {

namespace {

// The free variables of one step: edges from an unsampled sender to a sampled
// receiver that can still carry useful data.
struct ReducedProblem {
  std::vector<int> sender;
  std::vector<int> receiver;
  Vector coef;                   // D_k (1 - Lambda_{k,i})
  std::vector<int> members;      // sampled devices
  std::vector<int> slot;         // device -> position in members, or -1
  Vector base;                   // D_i(t-1) for members
  std::vector<HalfSpace> halfspaces;
  double unsampled_mass = 0.0;
  double grad = 0.0;
  double gamma = 1.0;

  Index dim() const { return coef.size(); }

  Vector data_at(const Vector& z) const {
    Vector d = base;
    for (Index e = 0; e < dim(); ++e) d(slot[static_cast<std::size_t>(receiver[static_cast<std::size_t>(e)])]) += coef(e) * z(e);
    return d;
  }

  double value(const Vector& z) const {
    const Vector d = data_at(z);
    const double sampled = d.sum();
    const double a = grad * unsampled_mass / (sampled + unsampled_mass);
    const double b = gamma * d.array().rsqrt().sum() / static_cast<double>(members.size());
    return a + b;
  }

  Vector gradient(const Vector& z) const {
    const Vector d = data_at(z);
    const double total = d.sum() + unsampled_mass;
    const double da = -grad * unsampled_mass / (total * total);
    const double s = static_cast<double>(members.size());
    Vector g(dim());
    for (Index e = 0; e < dim(); ++e) {
      const double di = d(slot[static_cast<std::size_t>(receiver[static_cast<std::size_t>(e)])]);
      g(e) = coef(e) * (da - 0.5 * gamma / s * std::pow(di, -1.5));
    }
    return g;
  }
};

ReducedProblem reduce(const NetworkState& state, const ObjectiveModel& model) {
  const int n = state.size();
  if (model.sampling.size() != n) throw Error("dimension_mismatch", "sampling vector length != N");
  ReducedProblem p;
  p.members = model.sampling.members();
  if (p.members.empty()) throw Error("invalid_sampling", "no sampled devices");
  p.slot.assign(static_cast<std::size_t>(n), -1);
  p.base.resize(static_cast<Index>(p.members.size()));
  for (std::size_t j = 0; j < p.members.size(); ++j) {
    p.slot[static_cast<std::size_t>(p.members[j])] = static_cast<int>(j);
    p.base(static_cast<Index>(j)) = state.devices[static_cast<std::size_t>(p.members[j])].data_count;
    if (p.base(static_cast<Index>(j)) <= 0.0)
      throw Error("zero_data", "sampled device " + std::to_string(p.members[j]) + " holds no data");
  }
  p.unsampled_mass = model.unsampled_mass;
  p.grad = model.gradient_estimate;
  p.gamma = model.stat_constant;

  std::vector<double> coef;
  for (int k = 0; k < n; ++k) {
    if (model.sampling.contains(k)) continue;
    const double dk = state.devices[static_cast<std::size_t>(k)].data_count;
    if (dk <= 0.0) continue;
    for (int i : p.members) {
      if (!state.has_edge(k, i)) continue;
      const double c = dk * (1.0 - state.conn_similarity(k, i));
      if (c <= 0.0) continue;
      p.sender.push_back(k);
      p.receiver.push_back(i);
      coef.push_back(c);
    }
  }
  p.coef = Eigen::Map<const Vector>(coef.data(), static_cast<Index>(coef.size()));

  // Sender rows: sum_i phi <= 1 and D_k sum_i phi psi <= Psi_k.
  for (int k = 0; k < n; ++k) {
    HalfSpace row{{}, {}, 1.0};
    HalfSpace budget{{}, {}, 0.0};
    const DeviceState& dev = state.devices[static_cast<std::size_t>(k)];
    for (Index e = 0; e < p.dim(); ++e) {
      if (p.sender[static_cast<std::size_t>(e)] != k) continue;
      row.support.push_back(e);
      row.coef.push_back(1.0);
      budget.support.push_back(e);
      budget.coef.push_back(dev.tx_cost(p.receiver[static_cast<std::size_t>(e)]));
    }
    if (row.support.empty()) continue;
    budget.bound = dev.tx_budget / dev.data_count;
    if (row.support.size() > 1) p.halfspaces.push_back(std::move(row));
    p.halfspaces.push_back(std::move(budget));
  }
  // Receiver columns: R_i <= theta_i and p_i (D_i + R_i) <= P_i.
  for (int i : p.members) {
    const DeviceState& dev = state.devices[static_cast<std::size_t>(i)];
    double cap = dev.recv_buffer;
    if (dev.proc_cost > 0.0) cap = std::min(cap, dev.proc_capacity / dev.proc_cost - dev.data_count);
    if (cap < -1e-9)
      throw Error("infeasible_polytope", "device " + std::to_string(i) +
                                             " already exceeds its processing capacity");
    cap = std::max(cap, 0.0);
    HalfSpace col{{}, {}, cap};
    for (Index e = 0; e < p.dim(); ++e) {
      if (p.receiver[static_cast<std::size_t>(e)] != i) continue;
      col.support.push_back(e);
      col.coef.push_back(p.coef(e));
    }
    if (!col.support.empty()) p.halfspaces.push_back(std::move(col));
  }
  return p;
}

double lhs(const HalfSpace& h, const Vector& z) {
  double s = 0.0;
  for (std::size_t j = 0; j < h.support.size(); ++j) s += h.coef[j] * z(h.support[j]);
  return s;
}

// Shrinks entries so every half-space holds exactly; all coefficients are
// non-negative, so scaling a support down never breaks another constraint.
void polish(Vector& z, const std::vector<HalfSpace>& halfspaces) {
  z = z.cwiseMax(0.0).cwiseMin(1.0);
  for (const HalfSpace& h : halfspaces) {
    const double v = lhs(h, z);
    if (v <= h.bound) continue;
    const double scale = h.bound <= 0.0 ? 0.0 : h.bound / v * (1.0 - 1e-15);
    for (Index e : h.support) z(e) *= scale;
  }
}

// The objective decreases in every variable, so the optimum lies on the
// boundary. Raises each free variable to its largest feasible value; this
// lands exactly on active bounds the interior iterates only approach.
void complete(Vector& z, const std::vector<HalfSpace>& halfspaces, const std::vector<bool>& pinned) {
  std::vector<std::vector<std::pair<std::size_t, double>>> touching(static_cast<std::size_t>(z.size()));
  for (std::size_t j = 0; j < halfspaces.size(); ++j)
    for (std::size_t q = 0; q < halfspaces[j].support.size(); ++q)
      touching[static_cast<std::size_t>(halfspaces[j].support[q])].emplace_back(j, halfspaces[j].coef[q]);
  std::vector<double> used(halfspaces.size());
  for (std::size_t j = 0; j < halfspaces.size(); ++j) used[j] = lhs(halfspaces[j], z);
  for (Index e = 0; e < z.size(); ++e) {
    if (pinned[static_cast<std::size_t>(e)]) continue;
    double room = 1.0 - z(e);
    bool unit_binds = true;
    for (const auto& [j, c] : touching[static_cast<std::size_t>(e)]) {
      if (c <= 0.0) continue;
      const double r = (halfspaces[j].bound - used[j]) / c;
      if (r < room) {
        room = r;
        unit_binds = false;
      }
    }
    if (room <= 0.0) continue;
    const double next = unit_binds ? 1.0 : z(e) + room;
    for (const auto& [j, c] : touching[static_cast<std::size_t>(e)]) used[j] += c * (next - z(e));
    z(e) = next;
  }
}

Matrix expand(const ReducedProblem& p, const Vector& z, int n) {
  Matrix phi = Matrix::Zero(n, n);
  for (Index e = 0; e < p.dim(); ++e)
    phi(p.sender[static_cast<std::size_t>(e)], p.receiver[static_cast<std::size_t>(e)]) = z(e);
  return phi;
}

}  // namespace

ObjectiveModel ObjectiveModel::make(const NetworkState& net, SamplingDecision sampling,
                                    double gamma, double initial_gradient) {
  if (!(gamma > 0.0)) throw Error("invalid_config", "gamma must be positive");
  ObjectiveModel m;
  m.stat_constant = gamma;
  m.gradient_estimate = initial_gradient;
  m.last_observed = initial_gradient;
  m.unsampled_mass = 0.0;
  for (int k : sampling.non_members())
    m.unsampled_mass += net.devices[static_cast<std::size_t>(k)].data_count;
  m.sampling = std::move(sampling);
  return m;
}

double ObjectiveModel::extrapolate(int steps) const {
  return last_observed / std::pow(scaling_factor, static_cast<double>(steps));
}

double objective(const Matrix& phi, const NetworkState& state, const ObjectiveModel& model) {
  const int n = state.size();
  if (phi.rows() != n || phi.cols() != n) throw Error("dimension_mismatch", "phi must be N x N");
  const std::vector<int> members = model.sampling.members();
  if (members.empty()) throw Error("invalid_sampling", "no sampled devices");
  double sampled = 0.0;
  double stat = 0.0;
  for (int i : members) {
    double d = state.devices[static_cast<std::size_t>(i)].data_count;
    for (int k = 0; k < n; ++k)
      d += state.devices[static_cast<std::size_t>(k)].data_count * phi(k, i) *
           (1.0 - state.conn_similarity(k, i));
    if (d <= 0.0)
      throw Error("zero_data", "sampled device " + std::to_string(i) + " would hold no data");
    sampled += d;
    stat += model.stat_constant / std::sqrt(d);
  }
  const double total = sampled + model.unsampled_mass;
  return model.unsampled_mass / total * model.gradient_estimate +
         stat / static_cast<double>(members.size());
}

void FeasibilityReport::merge(const FeasibilityReport& other) {
  for (const auto& [name, slack] : other.min_slack) {
    auto it = min_slack.find(name);
    if (it == min_slack.end()) min_slack.emplace(name, slack);
    else it->second = std::min(it->second, slack);
  }
  violations.insert(violations.end(), other.violations.begin(), other.violations.end());
}

std::string FeasibilityReport::summary() const {
  std::ostringstream out;
  out << (feasible() ? "feasible" : "infeasible");
  for (const auto& v : violations) {
    out << "; " << v.constraint;
    if (v.sender >= 0) out << " k=" << v.sender;
    if (v.receiver >= 0) out << " i=" << v.receiver;
    out << " slack=" << v.slack;
  }
  return out.str();
}

FeasibilityReport check_feasible(const Matrix& phi, const NetworkState& state,
                                 const SamplingDecision& sampling, double tolerance,
                                 std::optional<int> sample_budget) {
  const int n = state.size();
  if (phi.rows() != n || phi.cols() != n) throw Error("dimension_mismatch", "phi must be N x N");
  if (sampling.size() != n) throw Error("dimension_mismatch", "sampling vector length != N");
  FeasibilityReport report;
  auto note = [&](const std::string& name, double slack, int k, int i) {
    auto it = report.min_slack.find(name);
    if (it == report.min_slack.end()) report.min_slack.emplace(name, slack);
    else it->second = std::min(it->second, slack);
    if (slack < -tolerance) report.violations.push_back({name, k, i, slack});
  };

  const Vector d = state.data_counts();
  const Matrix& lam = state.conn_similarity;
  Vector received = Vector::Zero(n);
  for (int k = 0; k < n; ++k) {
    const DeviceState& dev = state.devices[static_cast<std::size_t>(k)];
    double row = 0.0;
    double spend = 0.0;
    const double xk = sampling.contains(k) ? 1.0 : 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = phi(k, i);
      const double xi = sampling.contains(i) ? 1.0 : 0.0;
      note("bounds", std::min(v, 1.0 - v), k, i);
      note("support_unsampled_pair", -std::abs((1.0 - xi) * (1.0 - xk) * v), k, i);
      note("support_sampled_sender", -std::abs(xk * v), k, i);
      note("support_adjacency", -std::abs((state.has_edge(k, i) ? 0.0 : 1.0) * v), k, i);
      row += v;
      spend += xi * v * dev.tx_cost(i);
      received(i) += d(k) * v * (1.0 - lam(k, i));
      const double next_lam = lam(k, i) + (1.0 - lam(k, i)) * v;
      note("similarity_bounds", std::min(next_lam, 1.0 - next_lam), k, i);
    }
    note("row_sum", 1.0 - row, k, -1);
    note("transmit_budget", dev.tx_budget - d(k) * spend, k, -1);
  }
  for (int i = 0; i < n; ++i) {
    const DeviceState& dev = state.devices[static_cast<std::size_t>(i)];
    note("receive_buffer", dev.recv_buffer - received(i), -1, i);
    note("processing_capacity", dev.proc_capacity - dev.proc_cost * (d(i) + received(i)), -1, i);
  }
  if (sample_budget) note("sampling_budget", -std::abs(sampling.count() - *sample_budget), -1, -1);
  return report;
}

Vector project_polytope(const Vector& point, const std::vector<HalfSpace>& halfspaces,
                        int max_sweeps, double tolerance) {
  const Index m = point.size();
  const std::size_t sets = halfspaces.size() + 1;
  std::vector<Vector> increments(sets, Vector::Zero(m));
  Vector x = point;
  std::vector<double> norms;
  norms.reserve(halfspaces.size());
  for (const HalfSpace& h : halfspaces) {
    double s = 0.0;
    for (double c : h.coef) s += c * c;
    norms.push_back(s);
  }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    // Box.
    {
      const Vector y = x + increments[0];
      const Vector p = y.cwiseMax(0.0).cwiseMin(1.0);
      increments[0] = y - p;
      change += (p - x).squaredNorm();
      x = p;
    }
    for (std::size_t j = 0; j < halfspaces.size(); ++j) {
      const HalfSpace& h = halfspaces[j];
      Vector& inc = increments[j + 1];
      double v = 0.0;
      for (std::size_t q = 0; q < h.support.size(); ++q) {
        const Index e = h.support[q];
        v += h.coef[q] * (x(e) + inc(e));
      }
      const double shift = v > h.bound && norms[j] > 0.0 ? (v - h.bound) / norms[j] : 0.0;
      for (std::size_t q = 0; q < h.support.size(); ++q) {
        const Index e = h.support[q];
        const double y = x(e) + inc(e);
        const double p = y - shift * h.coef[q];
        inc(e) = y - p;
        change += (p - x(e)) * (p - x(e));
        x(e) = p;
      }
    }
    if (change <= tolerance * tolerance) break;
  }
  return x;
}

TimestepSolution solve_timestep(const NetworkState& state, const ObjectiveModel& model,
                                const SolverOptions& options) {
  const ReducedProblem p = reduce(state, model);
  const int n = state.size();
  TimestepSolution sol;
  Vector z = Vector::Zero(p.dim());

  // Half-spaces with no room pin their support to zero.
  std::vector<bool> pinned(static_cast<std::size_t>(p.dim()), false);
  for (const HalfSpace& h : p.halfspaces)
    if (h.bound <= 1e-12)
      for (Index e : h.support) pinned[static_cast<std::size_t>(e)] = true;
  std::vector<Index> free;
  std::vector<Index> local(static_cast<std::size_t>(p.dim()), -1);
  for (Index e = 0; e < p.dim(); ++e)
    if (!pinned[static_cast<std::size_t>(e)]) {
      local[static_cast<std::size_t>(e)] = static_cast<Index>(free.size());
      free.push_back(e);
    }
  const auto m = static_cast<Index>(free.size());
  if (m == 0) {
    sol.phi = expand(p, z, n);
    sol.objective = objective(sol.phi, state, model);
    sol.converged = true;
    return sol;
  }

  // Rows of G z <= h over the free variables.
  std::vector<const HalfSpace*> rows;
  for (const HalfSpace& h : p.halfspaces)
    if (h.bound > 1e-12) rows.push_back(&h);
  const auto hc = static_cast<Index>(rows.size());
  Matrix g_mat = Matrix::Zero(hc, m);
  Vector h_vec(hc);
  for (Index r = 0; r < hc; ++r) {
    const HalfSpace& h = *rows[static_cast<std::size_t>(r)];
    for (std::size_t q = 0; q < h.support.size(); ++q) {
      const Index j = local[static_cast<std::size_t>(h.support[q])];
      if (j >= 0) g_mat(r, j) += h.coef[q];
    }
    h_vec(r) = h.bound;
  }

  // Strictly interior start on the diagonal.
  double rho = 0.5;
  for (Index r = 0; r < hc; ++r) {
    const double row = g_mat.row(r).sum();
    if (row > 0.0) rho = std::min(rho, 0.5 * h_vec(r) / row);
  }
  Vector x = Vector::Constant(m, rho);

  auto embed = [&](const Vector& v) {
    Vector full = Vector::Zero(p.dim());
    for (Index j = 0; j < m; ++j) full(free[static_cast<std::size_t>(j)]) = v(j);
    return full;
  };
  auto restrict_vec = [&](const Vector& full) {
    Vector v(m);
    for (Index j = 0; j < m; ++j) v(j) = full(free[static_cast<std::size_t>(j)]);
    return v;
  };
  // Hessian of the objective in the free variables.
  auto hessian = [&](const Vector& v) {
    const Vector full = embed(v);
    const Vector d = p.data_at(full);
    const double total = d.sum() + p.unsampled_mass;
    const double a2 = 2.0 * p.grad * p.unsampled_mass / (total * total * total);
    const double s = static_cast<double>(p.members.size());
    Vector c(m);
    for (Index j = 0; j < m; ++j) c(j) = p.coef(free[static_cast<std::size_t>(j)]);
    Matrix hess = a2 * c * c.transpose();
    for (Index j = 0; j < m; ++j) {
      const auto ej = static_cast<std::size_t>(free[static_cast<std::size_t>(j)]);
      for (Index l = 0; l < m; ++l) {
        const auto el = static_cast<std::size_t>(free[static_cast<std::size_t>(l)]);
        if (p.receiver[ej] != p.receiver[el]) continue;
        const double di = d(p.slot[static_cast<std::size_t>(p.receiver[ej])]);
        hess(j, l) += 0.75 * p.gamma / s * std::pow(di, -2.5) * c(j) * c(l);
      }
    }
    return hess;
  };
  auto barrier = [&](const Vector& v, double t) {
    const Vector slack = h_vec - g_mat * v;
    if ((v.array() <= 0.0).any() || (v.array() >= 1.0).any() || (slack.array() <= 0.0).any())
      return std::numeric_limits<double>::infinity();
    return t * p.value(embed(v)) - v.array().log().sum() - (1.0 - v.array()).log().sum() -
           slack.array().log().sum();
  };

  const double constraints = static_cast<double>(2 * m + hc);
  double t = 1.0;
  int it = 0;
  double gap = constraints / t;
  while (it < options.max_iterations) {
    // Newton centering at the current barrier weight.
    for (int inner = 0; inner < 100 && it < options.max_iterations; ++inner, ++it) {
      const Vector slack = h_vec - g_mat * x;
      const Vector inv_s = slack.cwiseInverse();
      const Vector inv_z = x.cwiseInverse();
      const Vector inv_u = (Vector::Ones(m) - x).cwiseInverse();
      const Vector grad = t * restrict_vec(p.gradient(embed(x))) - inv_z + inv_u +
                          g_mat.transpose() * inv_s;
      Matrix hess = t * hessian(x);
      hess.diagonal() += inv_z.cwiseAbs2() + inv_u.cwiseAbs2();
      hess += g_mat.transpose() * inv_s.cwiseAbs2().asDiagonal() * g_mat;
      const Vector dir = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(dir);
      if (!(decrement > 1e-10)) break;
      double step = 1.0;
      const double f0 = barrier(x, t);
      while (step > 1e-16 && !(barrier(x + step * dir, t) <= f0 - 0.25 * step * decrement))
        step *= 0.5;
      if (step <= 1e-16) break;
      x += step * dir;
    }
    gap = constraints / t;
    if (gap < options.tolerance) break;
    t *= 10.0;
  }

  z = embed(x);
  polish(z, p.halfspaces);
  complete(z, p.halfspaces, pinned);
  sol.phi = expand(p, z, n);
  sol.objective = objective(sol.phi, state, model);
  sol.iterations = it;
  sol.residual = gap;
  sol.converged = gap < options.tolerance;
  return sol;
}

ObjectiveModel update_gradient_estimate(ObjectiveModel model, double observed, double previous,
                                        int agg_period) {
  if (!(observed > 0.0) || !(previous > 0.0))
    throw Error("invalid_argument", "gradient magnitudes must be positive");
  if (agg_period < 1) throw Error("invalid_config", "aggregation period must be >= 1");
  const double alpha = std::pow(previous / observed, 1.0 / static_cast<double>(agg_period));
  model.scaling_factor = std::clamp(alpha, kAlphaFloor, model.alpha_max);
  model.last_observed = observed;
  model.gradient_estimate = observed;
  return model;
}

HorizonResult solve_horizon(const NetworkState& net, ObjectiveModel model, int horizon,
                            const HorizonOptions& options, const AggregationObserver& observer) {
  if (horizon < 0) throw Error("invalid_argument", "horizon must be non-negative");
  HorizonResult out;
  out.plan.num_devices = net.size();
  out.trajectory.push_back(net);
  int last_aggregation = 0;
  for (int t = 1; t <= horizon; ++t) {
    const NetworkState& state = out.trajectory.back();
    model.gradient_estimate = model.extrapolate(t - last_aggregation);
    out.gradient_estimates.push_back(model.gradient_estimate);
    TimestepSolution sol = solve_timestep(state, model, options.solver);
    out.plan.feasibility.merge(check_feasible(sol.phi, state, model.sampling));
    out.plan.step_objectives.push_back(sol.objective);
    OffloadStep step = apply_offload_step(state, sol.phi, derive_seed(options.seed, 0x0ff1u, static_cast<std::uint64_t>(t)));
    if (options.regenerate) options.regenerate(step.next, t);
    out.plan.phi.push_back(std::move(sol.phi));
    out.trajectory.push_back(std::move(step.next));
    if (observer) {
      if (auto seen = observer(out.trajectory.back(), t)) {
        model = update_gradient_estimate(model, *seen, model.last_observed, options.agg_period);
        last_aggregation = t;
      }
    }
  }
  if (horizon > 0) {
    double s = 0.0;
    for (double v : out.plan.step_objectives) s += v;
    out.plan.objective_value = s / horizon;
  }
  return out;
}

std::vector<NetworkState> replay_plan(const NetworkState& net, const OffloadPlan& plan,
                                      std::uint64_t seed) {
  std::vector<NetworkState> traj{net};
  for (int t = 1; t <= plan.horizon(); ++t) {
    OffloadStep step = apply_offload_step(traj.back(), plan.phi[static_cast<std::size_t>(t - 1)],
                                          derive_seed(seed, 0x0ff1u, static_cast<std::uint64_t>(t)));
    traj.push_back(std::move(step.next));
  }
  return traj;
}

}  // namespace d2dfl
