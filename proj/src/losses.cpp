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

#include "d2dfl/losses.hpp"

#include <cmath>
#include <limits>

namespace d2dfl {

namespace {

Matrix design(const LossSpec& spec, const Dataset& data) {
  if (data.dim() != spec.input_dim)
    throw Error("dimension_mismatch", "dataset width does not match the model input");
  if (!spec.fit_bias) return data.features;
  Matrix x(data.size(), data.dim() + 1);
  x.leftCols(data.dim()) = data.features;
  x.col(data.dim()).setOnes();
  return x;
}

Index width(const LossSpec& spec) { return spec.input_dim + (spec.fit_bias ? 1 : 0); }

bool binary(const LossSpec& spec) { return spec.kind == LossKind::kLogistic && spec.num_classes == 2; }

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Row-wise softmax in place; returns the row log-sum-exp values.
Vector softmax_rows(Matrix& z) {
  Vector lse(z.rows());
  for (Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - mx).exp().matrix();
    const double s = z.row(r).sum();
    z.row(r) /= s;
    lse(r) = mx + std::log(s);
  }
  return lse;
}

int label_of(const Dataset& data, Index r) { return static_cast<int>(std::lround(data.targets(r))); }

struct MlpView {
  Eigen::Map<const Matrix> w1;
  Eigen::Map<const Matrix> w2;
};

MlpView mlp_view(const LossSpec& spec, const Vector& w) {
  const Index in = width(spec);
  return {Eigen::Map<const Matrix>(w.data(), in, spec.hidden),
          Eigen::Map<const Matrix>(w.data() + in * spec.hidden, spec.hidden + 1, spec.num_classes)};
}

// Per-sample gradients stacked as rows (used for norms); the mean is the batch gradient.
Matrix sample_gradients(const LossSpec& spec, const Vector& w, const Dataset& data) {
  const Matrix x = design(spec, data);
  const Index n = x.rows();
  Matrix g(n, spec.param_count());
  switch (spec.kind) {
    case LossKind::kQuadratic: {
      const Vector resid = x * w - data.targets;
      for (Index r = 0; r < n; ++r) g.row(r) = resid(r) * x.row(r);
      break;
    }
    case LossKind::kLogistic: {
      if (binary(spec)) {
        const Vector z = x * w;
        for (Index r = 0; r < n; ++r) g.row(r) = (sigmoid(z(r)) - data.targets(r)) * x.row(r);
      } else {
        const Eigen::Map<const Matrix> wm(w.data(), x.cols(), spec.num_classes);
        Matrix p = x * wm;
        softmax_rows(p);
        for (Index r = 0; r < n; ++r) {
          p(r, label_of(data, r)) -= 1.0;
          // Column-major (width x C) gradient x_r^T p_r flattened into the row.
          Matrix outer = x.row(r).transpose() * p.row(r);
          g.row(r) = Eigen::Map<const Eigen::RowVectorXd>(outer.data(), outer.size());
        }
      }
      break;
    }
    case LossKind::kMlp: {
      const MlpView v = mlp_view(spec, w);
      const Matrix a1 = (x * v.w1).array().tanh().matrix();
      Matrix h(n, spec.hidden + 1);
      h.leftCols(spec.hidden) = a1;
      h.col(spec.hidden).setOnes();
      Matrix p = h * v.w2;
      softmax_rows(p);
      for (Index r = 0; r < n; ++r) p(r, label_of(data, r)) -= 1.0;
      const Matrix dh = (p * v.w2.topRows(spec.hidden).transpose()).array() *
                        (1.0 - a1.array().square());
      const Index n1 = x.cols() * spec.hidden;
      for (Index r = 0; r < n; ++r) {
        Matrix g1 = x.row(r).transpose() * dh.row(r);
        Matrix g2 = h.row(r).transpose() * p.row(r);
        g.row(r).head(n1) = Eigen::Map<const Eigen::RowVectorXd>(g1.data(), g1.size());
        g.row(r).tail(g2.size()) = Eigen::Map<const Eigen::RowVectorXd>(g2.data(), g2.size());
      }
      break;
    }
  }
  return g;
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kQuadratic: return "quadratic";
    case LossKind::kLogistic: return "logistic";
    case LossKind::kMlp: return "mlp";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "quadratic") return LossKind::kQuadratic;
  if (name == "logistic") return LossKind::kLogistic;
  if (name == "mlp") return LossKind::kMlp;
  throw Error("invalid_config", "unknown loss kind '" + name + "'");
}

Index LossSpec::param_count() const {
  const Index in = input_dim + (fit_bias ? 1 : 0);
  switch (kind) {
    case LossKind::kQuadratic: return in;
    case LossKind::kLogistic: return num_classes == 2 ? in : in * num_classes;
    case LossKind::kMlp: return in * hidden + (hidden + 1) * num_classes;
  }
  return 0;
}

double loss(const LossSpec& spec, const Vector& w, const Dataset& data) {
  if (data.empty()) throw Error("empty_dataset", "loss over an empty dataset");
  const Matrix x = design(spec, data);
  const auto n = static_cast<double>(x.rows());
  switch (spec.kind) {
    case LossKind::kQuadratic:
      return 0.5 * (x * w - data.targets).squaredNorm() / n;
    case LossKind::kLogistic: {
      if (binary(spec)) {
        const Vector z = x * w;
        double s = 0.0;
        for (Index r = 0; r < z.size(); ++r) s += softplus(z(r)) - data.targets(r) * z(r);
        return s / n;
      }
      const Eigen::Map<const Matrix> wm(w.data(), x.cols(), spec.num_classes);
      Matrix z = x * wm;
      const Matrix logits = z;
      const Vector lse = softmax_rows(z);
      double s = 0.0;
      for (Index r = 0; r < z.rows(); ++r) s += lse(r) - logits(r, label_of(data, r));
      return s / n;
    }
    case LossKind::kMlp: {
      const MlpView v = mlp_view(spec, w);
      Matrix h(x.rows(), spec.hidden + 1);
      h.leftCols(spec.hidden) = (x * v.w1).array().tanh().matrix();
      h.col(spec.hidden).setOnes();
      Matrix z = h * v.w2;
      const Matrix logits = z;
      const Vector lse = softmax_rows(z);
      double s = 0.0;
      for (Index r = 0; r < z.rows(); ++r) s += lse(r) - logits(r, label_of(data, r));
      return s / n;
    }
  }
  return 0.0;
}

Vector gradient(const LossSpec& spec, const Vector& w, const Dataset& data) {
  if (data.empty()) throw Error("empty_dataset", "gradient over an empty dataset");
  const Matrix x = design(spec, data);
  const auto n = static_cast<double>(x.rows());
  switch (spec.kind) {
    case LossKind::kQuadratic:
      return x.transpose() * (x * w - data.targets) / n;
    case LossKind::kLogistic: {
      if (binary(spec)) {
        Vector z = x * w;
        for (Index r = 0; r < z.size(); ++r) z(r) = sigmoid(z(r)) - data.targets(r);
        return x.transpose() * z / n;
      }
      const Eigen::Map<const Matrix> wm(w.data(), x.cols(), spec.num_classes);
      Matrix p = x * wm;
      softmax_rows(p);
      for (Index r = 0; r < p.rows(); ++r) p(r, label_of(data, r)) -= 1.0;
      const Matrix g = x.transpose() * p / n;
      return Eigen::Map<const Vector>(g.data(), g.size());
    }
    case LossKind::kMlp: {
      const MlpView v = mlp_view(spec, w);
      const Matrix a1 = (x * v.w1).array().tanh().matrix();
      Matrix h(x.rows(), spec.hidden + 1);
      h.leftCols(spec.hidden) = a1;
      h.col(spec.hidden).setOnes();
      Matrix p = h * v.w2;
      softmax_rows(p);
      for (Index r = 0; r < p.rows(); ++r) p(r, label_of(data, r)) -= 1.0;
      const Matrix g2 = h.transpose() * p / n;
      const Matrix dh = (p * v.w2.topRows(spec.hidden).transpose()).array() *
                        (1.0 - a1.array().square());
      const Matrix g1 = x.transpose() * dh / n;
      Vector out(spec.param_count());
      out.head(g1.size()) = Eigen::Map<const Vector>(g1.data(), g1.size());
      out.tail(g2.size()) = Eigen::Map<const Vector>(g2.data(), g2.size());
      return out;
    }
  }
  return {};
}

Vector sample_gradient_norms(const LossSpec& spec, const Vector& w, const Dataset& data) {
  return sample_gradients(spec, w, data).rowwise().norm();
}

double accuracy(const LossSpec& spec, const Vector& w, const Dataset& data) {
  if (spec.kind == LossKind::kQuadratic) return std::numeric_limits<double>::quiet_NaN();
  if (data.empty()) throw Error("empty_dataset", "accuracy over an empty dataset");
  const Matrix x = design(spec, data);
  Matrix scores;
  if (binary(spec)) {
    const Vector z = x * w;
    Index correct = 0;
    for (Index r = 0; r < z.size(); ++r) correct += ((z(r) > 0.0 ? 1 : 0) == label_of(data, r));
    return static_cast<double>(correct) / static_cast<double>(z.size());
  }
  if (spec.kind == LossKind::kLogistic) {
    scores = x * Eigen::Map<const Matrix>(w.data(), x.cols(), spec.num_classes);
  } else {
    const MlpView v = mlp_view(spec, w);
    Matrix h(x.rows(), spec.hidden + 1);
    h.leftCols(spec.hidden) = (x * v.w1).array().tanh().matrix();
    h.col(spec.hidden).setOnes();
    scores = h * v.w2;
  }
  Index correct = 0;
  for (Index r = 0; r < scores.rows(); ++r) {
    Index best = 0;
    scores.row(r).maxCoeff(&best);
    correct += (best == label_of(data, r));
  }
  return static_cast<double>(correct) / static_cast<double>(scores.rows());
}

Vector initial_params(const LossSpec& spec, std::uint64_t seed) {
  Vector w = Vector::Zero(spec.param_count());
  if (spec.kind != LossKind::kMlp) return w;
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(width(spec)));
  for (Index j = 0; j < w.size(); ++j) w(j) = scale * standard_normal(rng);
  return w;
}

}  // namespace d2dfl
