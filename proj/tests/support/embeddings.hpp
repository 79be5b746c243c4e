// Copyright 2026 The memaudit Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "memaudit/backends.hpp"
#include "memaudit/random.hpp"

namespace memaudit::test_support {

inline EmbeddingVector basis(std::size_t k, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  v[k] = 1.0;
  return make_embedding(std::move(v), EmbeddingKind::copy_detection);
}

// Unit vector near `center`: center + noise of the given scale, renormalized.
inline EmbeddingVector jitter(const EmbeddingVector& center, double scale, Rng& rng) {
  std::vector<double> v = center.values;
  for (double& x : v) x += scale * rng.normal();
  return make_embedding(std::move(v), EmbeddingKind::copy_detection);
}

inline double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  double dot = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return 1.0 - dot;
}

// True when both labelings induce the same partition (noise compared as-is).
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b, int noise) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, back;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == noise) != (b[i] == noise)) return false;
    if (a[i] == noise) continue;
    auto [f, fnew] = fwd.emplace(a[i], b[i]);
    auto [r, rnew] = back.emplace(b[i], a[i]);
    if (f->second != b[i] || r->second != a[i]) return false;
  }
  return true;
}

inline std::vector<std::size_t> size_multiset(const std::map<int, std::size_t>& sizes) {
  std::vector<std::size_t> out;
  for (const auto& [label, n] : sizes) out.push_back(n);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace memaudit::test_support
