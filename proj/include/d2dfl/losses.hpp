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

#ifndef D2DFL_LOSSES_HPP_
#define D2DFL_LOSSES_HPP_

#include <string>

#include "d2dfl/common.hpp"
#include "d2dfl/dataset.hpp"

namespace d2dfl {

enum class LossKind { kQuadratic, kLogistic, kMlp };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

// Model family and shape. Parameters are a flat vector:
//  quadratic           : [w; b]                 (dim + bias)
//  logistic, 2 classes : [w; b]                 sigmoid on the positive class
//  logistic, C classes : (dim + bias) x C       column-major softmax weights
//  mlp                 : (dim + bias) x H, then (H + 1) x C, tanh hidden layer
struct LossSpec {
  LossKind kind = LossKind::kLogistic;
  int input_dim = 1;
  int num_classes = 2;
  int hidden = 16;
  bool fit_bias = true;

  Index param_count() const;
  bool convex() const { return kind != LossKind::kMlp; }
};

// Average datapoint loss F(w | D).
double loss(const LossSpec& spec, const Vector& w, const Dataset& data);
// Average datapoint gradient.
Vector gradient(const LossSpec& spec, const Vector& w, const Dataset& data);
// Euclidean norm of each datapoint's own gradient.
Vector sample_gradient_norms(const LossSpec& spec, const Vector& w, const Dataset& data);
// Fraction classified correctly; regression has no accuracy and returns NaN.
double accuracy(const LossSpec& spec, const Vector& w, const Dataset& data);

// Zero for convex models; small seeded values for the MLP so hidden units differ.
Vector initial_params(const LossSpec& spec, std::uint64_t seed);

}  // namespace d2dfl

#endif  // D2DFL_LOSSES_HPP_
