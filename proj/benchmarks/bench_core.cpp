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

#include <benchmark/benchmark.h>

#include <memory>
#include <string>
#include <vector>

#include "memaudit/bench.hpp"
#include "memaudit/energy.hpp"
#include "memaudit/mock_backends.hpp"
#include "memaudit/sampler.hpp"
#include "memaudit/verify.hpp"

namespace {

using namespace memaudit;

std::vector<std::string> words(std::size_t m) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < m; ++i) w.push_back("w" + std::to_string(i));
  return w;
}

void BM_DTheta(benchmark::State& state) {
  const auto samples = static_cast<std::size_t>(state.range(0));
  auto bow = LinearMockDenoiser::bag_of_words(words(512), 77, 0.5);
  EnergyConfig cfg;
  cfg.samples = samples;
  const std::string prompt = "w1 w7 w42 w300 w511 w8 w9 w10";
  for (auto _ : state) benchmark::DoNotOptimize(d_theta(prompt, cfg, *bow).value);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples));
}
BENCHMARK(BM_DTheta)->Arg(1)->Arg(4)->Arg(16);

// One random-scan step with Q proposals; the memo is disabled so every
// candidate costs an oracle call.
void BM_GibbsStep(benchmark::State& state) {
  const auto q = static_cast<std::size_t>(state.range(0));
  auto vocab = std::make_shared<const Vocabulary>(words(256));
  EnergyConfig ecfg;
  ecfg.samples = 1;
  const SearchBackends backends{TableProposalModel::uniform(vocab),
                                std::make_shared<const EnergyFunction>(
                                    LinearMockDenoiser::bag_of_words(words(256)), ecfg)};
  SamplerConfig cfg;
  cfg.proposals = q;
  cfg.cache_capacity = 0;
  GibbsChain chain(backends, cfg, 0);
  PromptState p(std::vector<TokenId>{1, 2, 3, 4, 5, 6, 7, 8});
  for (auto _ : state) benchmark::DoNotOptimize(chain.step(p).energy);
}
BENCHMARK(BM_GibbsStep)->Arg(10)->Arg(50);

void BM_Cluster(benchmark::State& state) {
  const auto g = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<EmbeddingVector> e;
  for (std::size_t k = 0; k < g; ++k) {
    std::vector<double> v(256);
    for (auto& x : v) x = rng.normal();
    if (k % 2 == 0) v[0] += 40.0;  // half the batch near one direction
    e.push_back(make_embedding(std::move(v), EmbeddingKind::copy_detection));
  }
  for (auto _ : state) benchmark::DoNotOptimize(cluster_embeddings(e, ClusterConfig{}).qualifying);
}
BENCHMARK(BM_Cluster)->Arg(100)->Arg(400);

void BM_PromptMetrics(benchmark::State& state) {
  Rng rng(2);
  std::vector<ImageScore> imgs;
  for (int k = 0; k < 10; ++k) imgs.push_back({ImageRef{std::to_string(k)}, rng.uniform(), 0.3, 5.0});
  for (auto _ : state) benchmark::DoNotOptimize(prompt_metrics("p", imgs).top3_sscd_mean);
}
BENCHMARK(BM_PromptMetrics);

}  // namespace

BENCHMARK_MAIN();
