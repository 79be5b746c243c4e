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

#include <cstddef>
#include <cstdint>
#include <random>

namespace memaudit {

// Seeded generator with platform-independent uniform draws. The standard
// distributions are implementation-defined, so runs would not reproduce
// across standard libraries if we used them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  // Uniform integer in [lo, hi], inclusive.
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi);

  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace memaudit
