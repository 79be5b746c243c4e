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

#include <gtest/gtest.h>

#include <cmath>
#include <optional>

#include "memaudit/energy.hpp"
#include "memaudit/error.hpp"
#include "memaudit/mock_backends.hpp"

using namespace memaudit;

namespace {

std::shared_ptr<LinearMockDenoiser> table_mock() {
  return LinearMockDenoiser::table({{"p", {3.0, 4.0}}, {"q", {1.0, 0.0}}, {"r", {0.0, -2.0}}}, 2);
}

// Counts every noise prediction it serves.
class CountingDenoiser final : public DenoiserBackend {
 public:
  std::string name() const override { return "counting"; }
  std::size_t embedding_dim() const override { return 1; }
  std::size_t latent_size() const override { return 1; }
  int terminal_step() const override { return 999; }
  TextEmbedding encode_text(std::string_view text) const override {
    return {{static_cast<double>(text.size())}, std::string(text)};
  }
  mutable int calls = 0;
  std::optional<std::uint64_t> bad_seed;

 protected:
  std::vector<double> do_predict_noise(const NoiseQuery& q) const override {
    ++calls;
    if (bad_seed && q.latent_seed == *bad_seed && q.prompt_embedding->vector[0] > 0)
      throw BackendError("device lost", true);
    return {q.prompt_embedding->vector[0] + static_cast<double>(q.latent_seed % 7)};
  }
};

}  // namespace

TEST(Energy, EmptyPromptIsExactlyZero) {
  auto m = table_mock();
  for (std::size_t samples : {1u, 4u, 16u}) {
    EnergyConfig cfg;
    cfg.samples = samples;
    EXPECT_EQ(d_theta("", cfg, *m).value, 0.0);
  }
  auto noisy = LinearMockDenoiser::bag_of_words({"a"}, 77, 0.7);
  EXPECT_EQ(d_theta("", EnergyConfig{}, *noisy).value, 0.0);
}

TEST(Energy, LinearMockEqualsHandNorm) {
  auto m = table_mock();
  for (std::size_t samples : {1u, 4u}) {
    EnergyConfig cfg;
    cfg.samples = samples;
    EXPECT_NEAR(d_theta("p", cfg, *m).value, 5.0, 1e-9);
    EXPECT_NEAR(d_theta("r", cfg, *m).value, 2.0, 1e-9);
  }
}

TEST(Energy, LatentIndependentMockSameForAnySampleCount) {
  auto m = LinearMockDenoiser::bag_of_words({"a", "b", "c"});
  EnergyConfig one, four;
  one.samples = 1;
  four.samples = 4;
  for (const char* p : {"a", "a b", "c c c", "b a c"})
    EXPECT_DOUBLE_EQ(d_theta(p, one, *m).value, d_theta(p, four, *m).value) << p;
}

TEST(Energy, ScoreCarriesSeedsAndSamples) {
  auto m = table_mock();
  EnergyConfig cfg;
  cfg.samples = 3;
  cfg.base_seed = 9;
  const auto s = d_theta("q", cfg, *m);
  EXPECT_EQ(s.sample_count(), 3u);
  EXPECT_EQ(s.per_sample.size(), 3u);
  EXPECT_EQ(s.noise_seeds, noise_seeds(cfg));
  EXPECT_EQ(s.prompt, "q");
}

TEST(Energy, SeedPolicies) {
  EnergyConfig shared;
  shared.samples = 2;
  EXPECT_EQ(noise_seeds(shared, 0), noise_seeds(shared, 5));
  EnergyConfig fresh = shared;
  fresh.seed_policy = SeedPolicy::per_call;
  EXPECT_NE(noise_seeds(fresh, 0), noise_seeds(fresh, 1));
  EXPECT_EQ(parse_seed_policy("per_call"), SeedPolicy::per_call);
  EXPECT_EQ(to_string(SeedPolicy::fixed_shared), "fixed_shared");
  EXPECT_THROW(parse_seed_policy("sometimes"), ConfigError);
}

TEST(Energy, ConfigValidation) {
  EnergyConfig cfg;
  cfg.samples = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.samples = 1;
  cfg.temperature = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Energy, BoltzmannLogweight) {
  EXPECT_EQ(boltzmann_logweight(0.0, 0.3), 0.0);
  EXPECT_EQ(boltzmann_logweight(2.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(boltzmann_logweight(3.0, 4.0), boltzmann_logweight(3.0, 2.0) / 2.0);
  EXPECT_THROW(boltzmann_logweight(1.0, 0.0), ConfigError);
}

TEST(Energy, BatchMatchesLoop) {
  auto m = LinearMockDenoiser::bag_of_words({"a", "b", "c"}, 77, 0.25);
  EnergyConfig cfg;
  cfg.samples = 3;
  const std::vector<std::string> prompts{"a", "b b", "", "c a", "a b c"};
  const auto batch = batch_d_theta(prompts, cfg, *m);
  ASSERT_EQ(batch.size(), prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto single = d_theta(prompts[i], cfg, *m);
    EXPECT_EQ(batch[i].value, single.value) << prompts[i];
    EXPECT_EQ(batch[i].per_sample, single.per_sample);
  }
  EXPECT_EQ(batch_d_theta(std::span<const std::string>(prompts.data(), 1), cfg, *m)[0].value,
            d_theta("a", cfg, *m).value);
  EXPECT_TRUE(batch_d_theta({}, cfg, *m).empty());
}

TEST(Energy, BackendFailureNamesSample) {
  CountingDenoiser d;
  EnergyConfig cfg;
  cfg.samples = 3;
  d.bad_seed = noise_seeds(cfg)[1];
  try {
    d_theta("abc", cfg, d);
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    ASSERT_TRUE(e.seed_index().has_value());
    EXPECT_EQ(*e.seed_index(), 1u);
    EXPECT_TRUE(e.retriable());
  }
}

TEST(EnergyFunction, CountsEvaluationsAndAdvancesPerCallSeeds) {
  auto m = LinearMockDenoiser::bag_of_words({"a", "b"}, 77, 0.5);
  EnergyConfig cfg;
  cfg.samples = 2;
  cfg.seed_policy = SeedPolicy::per_call;
  EnergyFunction f(m, cfg);
  const auto s1 = f("a");
  const auto s2 = f("a");
  EXPECT_NE(s1.noise_seeds, s2.noise_seeds);
  const std::vector<std::string> two{"a", "b"};
  f.batch(two);
  EXPECT_EQ(f.evaluations(), 4u);

  cfg.seed_policy = SeedPolicy::fixed_shared;
  EnergyFunction g(m, cfg);
  EXPECT_EQ(g("a").value, g("a").value);
}
