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

#include "memaudit/random.hpp"

#include <cmath>
#include <numbers>

#include "memaudit/error.hpp"

namespace memaudit {

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::index requires n > 0");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::uint64_t Rng::between(std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw ContractError("Rng::between requires lo <= hi");
  const std::uint64_t span = hi - lo;
  if (span == UINT64_MAX) return engine_();
  return lo + index(static_cast<std::size_t>(span + 1));
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace memaudit
