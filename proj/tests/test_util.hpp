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

// Small builders shared by the unit tests.

#ifndef D2DFL_TESTS_TEST_UTIL_HPP_
#define D2DFL_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

#include "d2dfl/network.hpp"

namespace d2dfl::testing {

inline Dataset make_dataset(std::initializer_list<std::vector<double>> rows,
                            std::initializer_list<int> labels, std::uint64_t first_id = 0) {
  const Index dim = rows.size() == 0 ? 1 : static_cast<Index>(rows.begin()->size());
  Dataset d(dim);
  d.features.resize(static_cast<Index>(rows.size()), dim);
  d.targets.resize(static_cast<Index>(rows.size()));
  Index r = 0;
  for (const auto& row : rows) {
    for (Index c = 0; c < dim; ++c) d.features(r, c) = row[static_cast<std::size_t>(c)];
    d.ids.push_back(first_id + static_cast<std::uint64_t>(r));
    ++r;
  }
  for (int l : labels) d.labels.push_back(l);
  for (Index i = 0; i < d.size(); ++i) d.targets(i) = d.labels[static_cast<std::size_t>(i)];
  return d;
}

// Devices with the given continuous data counts, ample resources, unit
// transmit costs and no edges. Datasets are left empty.
inline NetworkState bare_network(const std::vector<double>& counts) {
  const int n = static_cast<int>(counts.size());
  NetworkState net;
  net.devices.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    DeviceState& d = net.devices[static_cast<std::size_t>(i)];
    d.id = i;
    d.data_count = counts[static_cast<std::size_t>(i)];
    d.proc_cost = 1.0;
    d.proc_capacity = 1e9;
    d.recv_buffer = 1e9;
    d.tx_budget = 1e9;
    d.tx_cost = Vector::Ones(n);
  }
  net.adjacency = Adjacency::Zero(n, n);
  net.similarity = Matrix::Zero(n, n);
  net.conn_similarity = Matrix::Zero(n, n);
  return net;
}

inline void add_edge(NetworkState& net, int k, int i, double lambda = 0.0) {
  net.adjacency(k, i) = 1;
  net.similarity(k, i) = lambda;
  net.conn_similarity(k, i) = lambda;
}

}  // namespace d2dfl::testing

#endif  // D2DFL_TESTS_TEST_UTIL_HPP_
