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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memaudit/backends.hpp"

namespace memaudit {

enum class SeedPolicy {
  // One seed tuple for every prompt: the energy is a fixed function of the
  // prompt, so a chain targets a static distribution.
  fixed_shared,
  // A fresh seed tuple per evaluation.
  per_call,
};

std::string_view to_string(SeedPolicy policy);
SeedPolicy parse_seed_policy(std::string_view text);

struct EnergyConfig {
  std::size_t samples = 4;    // M, noise draws averaged per evaluation
  double temperature = 1.0;   // K
  SeedPolicy seed_policy = SeedPolicy::fixed_shared;
  std::uint64_t base_seed = 0;
};

// Throws ConfigError on M == 0 or K <= 0.
void validate(const EnergyConfig& cfg);

struct EnergyScore {
  double value = 0.0;                     // mean of per_sample
  std::vector<double> per_sample;         // one L2 norm per noise seed
  std::vector<std::uint64_t> noise_seeds;
  std::string prompt;

  std::size_t sample_count() const noexcept { return noise_seeds.size(); }
};

// Seeds used by the call_index-th evaluation under cfg.
std::vector<std::uint64_t> noise_seeds(const EnergyConfig& cfg, std::uint64_t call_index = 0);

// D_theta(p) = mean_k || eps(x_T^k, f(p), T) - eps(x_T^k, f(empty), T) ||_2 over
// the flattened noise tensor. The empty prompt reuses the cached f(empty), so
// D_theta("") is exactly 0. Backend failures are rethrown as BackendError
// carrying the failing sample index.
EnergyScore d_theta(std::string_view prompt, const EnergyConfig& cfg, const DenoiserBackend& backend,
                    std::uint64_t call_index = 0);

// Elementwise equal to d_theta on each prompt (same call index for all).
std::vector<EnergyScore> batch_d_theta(std::span<const std::string> prompts, const EnergyConfig& cfg,
                                       const DenoiserBackend& backend, std::uint64_t call_index = 0);

// log of the unnormalized Boltzmann weight exp(D/K).
double boltzmann_logweight(double energy, double temperature);
inline double boltzmann_logweight(const EnergyScore& score, double temperature) {
  return boltzmann_logweight(score.value, temperature);
}

// Binds a backend and config, counts oracle evaluations, and advances the
// call index under SeedPolicy::per_call. Safe for concurrent use.
class EnergyFunction {
 public:
  EnergyFunction(std::shared_ptr<const DenoiserBackend> backend, EnergyConfig cfg);

  EnergyScore operator()(std::string_view prompt) const;
  std::vector<EnergyScore> batch(std::span<const std::string> prompts) const;

  const EnergyConfig& config() const noexcept { return cfg_; }
  const DenoiserBackend& backend() const noexcept { return *backend_; }
  // Number of prompts scored so far.
  std::uint64_t evaluations() const noexcept { return evaluations_.load(); }

 private:
  std::uint64_t next_call_index(std::size_t count) const;

  std::shared_ptr<const DenoiserBackend> backend_;
  EnergyConfig cfg_;
  mutable std::atomic<std::uint64_t> evaluations_{0};
  mutable std::atomic<std::uint64_t> calls_{0};
};

}  // namespace memaudit
