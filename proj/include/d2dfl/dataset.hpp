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

#ifndef D2DFL_DATASET_HPP_
#define D2DFL_DATASET_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "d2dfl/common.hpp"

namespace d2dfl {

// Row-major collection of datapoints. `labels` is the class (or group) used by
// the similarity test; `targets` is what the loss regresses or classifies on.
// `ids` identify the originating datapoint so duplicates can be recognised.
struct Dataset {
  Matrix features;  // size() x feature_dim
  std::vector<int> labels;
  Vector targets;
  std::vector<std::uint64_t> ids;

  Dataset() = default;
  explicit Dataset(Index feature_dim) : features(0, feature_dim), targets(0) {}

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  bool empty() const { return size() == 0; }

  void append(const Dataset& other, std::span<const Index> rows);
  void append(const Dataset& other);
  Dataset subset(std::span<const Index> rows) const;
  bool contains_id(std::uint64_t id) const;
};

// Concatenation of several datasets (the multiset union).
Dataset concatenate(std::span<const Dataset* const> parts);

}  // namespace d2dfl

#endif  // D2DFL_DATASET_HPP_
