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

#include "d2dfl/dataset.hpp"

#include <algorithm>
#include <numeric>

namespace d2dfl {

void Dataset::append(const Dataset& other, std::span<const Index> rows) {
  if (rows.empty()) return;
  if (features.cols() == 0 && features.rows() == 0) features.resize(0, other.dim());
  if (other.dim() != dim()) throw Error("dimension_mismatch", "appending dataset of other width");
  const Index old = size();
  const auto add = static_cast<Index>(rows.size());
  features.conservativeResize(old + add, Eigen::NoChange);
  targets.conservativeResize(old + add);
  for (Index r = 0; r < add; ++r) {
    const Index src = rows[static_cast<std::size_t>(r)];
    features.row(old + r) = other.features.row(src);
    targets(old + r) = other.targets(src);
    labels.push_back(other.labels[static_cast<std::size_t>(src)]);
    ids.push_back(other.ids[static_cast<std::size_t>(src)]);
  }
}

void Dataset::append(const Dataset& other) {
  std::vector<Index> rows(static_cast<std::size_t>(other.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  append(other, rows);
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out(dim());
  out.append(*this, rows);
  return out;
}

bool Dataset::contains_id(std::uint64_t id) const {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

Dataset concatenate(std::span<const Dataset* const> parts) {
  Index rows = 0;
  Index dim = 0;
  for (const Dataset* p : parts) {
    rows += p->size();
    dim = std::max(dim, p->dim());
  }
  Dataset out(dim);
  out.features.resize(rows, dim);
  out.targets.resize(rows);
  out.labels.reserve(static_cast<std::size_t>(rows));
  out.ids.reserve(static_cast<std::size_t>(rows));
  Index at = 0;
  for (const Dataset* p : parts) {
    if (p->empty()) continue;
    out.features.middleRows(at, p->size()) = p->features;
    out.targets.segment(at, p->size()) = p->targets;
    out.labels.insert(out.labels.end(), p->labels.begin(), p->labels.end());
    out.ids.insert(out.ids.end(), p->ids.begin(), p->ids.end());
    at += p->size();
  }
  return out;
}

}  // namespace d2dfl
