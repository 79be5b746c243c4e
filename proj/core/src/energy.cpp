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

#include "memaudit/energy.hpp"

#include <cmath>

#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"

namespace memaudit {

std::string_view to_string(SeedPolicy policy) {
  return policy == SeedPolicy::fixed_shared ? "fixed_shared" : "per_call";
}

SeedPolicy parse_seed_policy(std::string_view text) {
  if (text == "fixed_shared") return SeedPolicy::fixed_shared;
  if (text == "per_call") return SeedPolicy::per_call;
  throw ConfigError("unknown seed policy '" + std::string(text) + "'");
}

void validate(const EnergyConfig& cfg) {
  if (cfg.samples == 0) throw ConfigError("energy sample count M must be at least 1");
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature))
    throw ConfigError("temperature K must be positive and finite");
}

std::vector<std::uint64_t> noise_seeds(const EnergyConfig& cfg, std::uint64_t call_index) {
  const std::uint64_t stream = cfg.seed_policy == SeedPolicy::fixed_shared ? 0 : call_index;
  std::vector<std::uint64_t> seeds(cfg.samples);
  for (std::size_t k = 0; k < cfg.samples; ++k) seeds[k] = derive_seed(cfg.base_seed, {stream, k});
  return seeds;
}

namespace {

double l2_gap(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw BackendError("noise predictions differ in size");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

template <class Fn>
auto with_sample_index(std::size_t k, Fn&& fn) {
  try {
    return fn();
  } catch (const BackendError& e) {
    throw BackendError(std::string(e.what()) + " (noise sample " + std::to_string(k) + ")", e.retriable(), k);
  }
}

EnergyScore finish(std::string prompt, std::vector<double> per_sample, std::vector<std::uint64_t> seeds) {
  double sum = 0.0;
  for (double v : per_sample) sum += v;
  EnergyScore score;
  score.value = sum / static_cast<double>(per_sample.size());
  score.per_sample = std::move(per_sample);
  score.noise_seeds = std::move(seeds);
  score.prompt = std::move(prompt);
  return score;
}

}  // namespace

EnergyScore d_theta(std::string_view prompt, const EnergyConfig& cfg, const DenoiserBackend& backend,
                    std::uint64_t call_index) {
  validate(cfg);
  const TextEmbedding& uncond = backend.empty_embedding();
  const TextEmbedding cond = prompt.empty() ? uncond : backend.encode_text(prompt);
  auto seeds = noise_seeds(cfg, call_index);
  const int T = backend.terminal_step();
  std::vector<double> per_sample(seeds.size());
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    per_sample[k] = with_sample_index(k, [&] {
      const auto eps_cond = backend.predict_noise({seeds[k], &cond, T});
      const auto eps_uncond = backend.predict_noise({seeds[k], &uncond, T});
      return l2_gap(eps_cond, eps_uncond);
    });
  }
  return finish(std::string(prompt), std::move(per_sample), std::move(seeds));
}

std::vector<EnergyScore> batch_d_theta(std::span<const std::string> prompts, const EnergyConfig& cfg,
                                       const DenoiserBackend& backend, std::uint64_t call_index) {
  validate(cfg);
  if (prompts.empty()) return {};
  const TextEmbedding& uncond = backend.empty_embedding();
  std::vector<TextEmbedding> cond;
  cond.reserve(prompts.size());
  for (const auto& p : prompts) cond.push_back(p.empty() ? uncond : backend.encode_text(p));

  const auto seeds = noise_seeds(cfg, call_index);
  const int T = backend.terminal_step();
  std::vector<std::vector<double>> per_sample(prompts.size(), std::vector<double>(seeds.size()));
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    with_sample_index(k, [&] {
      // Query layout: [uncond, cond_0, ..., cond_{P-1}] for seed k.
      std::vector<NoiseQuery> queries;
      queries.reserve(prompts.size() + 1);
      queries.push_back({seeds[k], &uncond, T});
      for (const auto& c : cond) queries.push_back({seeds[k], &c, T});
      for (const auto& q : queries) {
        if (q.prompt_embedding->vector.size() != backend.embedding_dim())
          throw ContractError("embedding dimension does not match backend dimension");
        if (q.timestep != T) throw ContractError("noise query timestep is not the terminal step");
      }
      const auto eps = backend.predict_noise_batch(queries);
      if (eps.size() != queries.size()) throw BackendError("batched prediction returned the wrong count");
      for (std::size_t j = 0; j < prompts.size(); ++j) per_sample[j][k] = l2_gap(eps[j + 1], eps[0]);
      return 0;
    });
  }
  std::vector<EnergyScore> out;
  out.reserve(prompts.size());
  for (std::size_t j = 0; j < prompts.size(); ++j)
    out.push_back(finish(prompts[j], std::move(per_sample[j]), seeds));
  return out;
}

double boltzmann_logweight(double energy, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("temperature K must be positive and finite");
  return energy / temperature;
}

EnergyFunction::EnergyFunction(std::shared_ptr<const DenoiserBackend> backend, EnergyConfig cfg)
    : backend_(std::move(backend)), cfg_(cfg) {
  if (!backend_) throw ContractError("energy function needs a denoiser backend");
  validate(cfg_);
}

std::uint64_t EnergyFunction::next_call_index(std::size_t count) const {
  evaluations_.fetch_add(count);
  return cfg_.seed_policy == SeedPolicy::per_call ? calls_.fetch_add(1) : 0;
}

EnergyScore EnergyFunction::operator()(std::string_view prompt) const {
  return d_theta(prompt, cfg_, *backend_, next_call_index(1));
}

std::vector<EnergyScore> EnergyFunction::batch(std::span<const std::string> prompts) const {
  if (prompts.empty()) return {};
  return batch_d_theta(prompts, cfg_, *backend_, next_call_index(prompts.size()));
}

}  // namespace memaudit
