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
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "../support/oracles.hpp"
#include "memaudit/error.hpp"
#include "memaudit/mock_backends.hpp"
#include "memaudit/sampler.hpp"

using namespace memaudit;
using memaudit::test_support::EnergyTable;

namespace {

SearchBackends backends_for(const EnergyTable& t, EnergyConfig ecfg = {}) {
  ecfg.samples = 1;
  return {TableProposalModel::uniform(t.vocab), std::make_shared<const EnergyFunction>(t.denoiser(), ecfg)};
}

SearchBackends planted_backends(const PlantedSpace& space) {
  auto vocab = std::make_shared<const Vocabulary>(space.words);
  EnergyConfig ecfg;
  ecfg.samples = 1;
  return {TableProposalModel::uniform(vocab),
          std::make_shared<const EnergyFunction>(LinearMockDenoiser::from_energy("planted", planted_energy(space)),
                                                 ecfg)};
}

PlantedSpace six_cubed(std::uint64_t seed = 0) {
  return {{"w0", "w1", "w2", "w3", "w4", "w5"}, {"w4", "w1", "w3"}, 10.0, seed};
}

}  // namespace

TEST(Softmax, ConstantEnergiesAreUniform) {
  const std::vector<TokenId> c{0, 1, 2};
  for (double e : {-4.0, 0.0, 12.5}) {
    const std::vector<double> en{e, e, e};
    const auto d = conditional_distribution(c, en, 0.7);
    for (double p : d.probabilities) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  }
}

TEST(Softmax, HandComputedTwoPoint) {
  const std::vector<TokenId> c{0, 1};
  const std::vector<double> en{0.0, std::numbers::ln2};
  const auto d = conditional_distribution(c, en, 1.0);
  // weights exp(0)=1 and exp(ln 2)=2
  EXPECT_NEAR(d.probabilities[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(d.probabilities[1], 2.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvariantAndOnSimplex) {
  const std::vector<TokenId> c{0, 1, 2, 3};
  const std::vector<double> en{0.3, 1.7, -2.0, 0.9};
  std::vector<double> shifted = en;
  for (double& e : shifted) e += 7.3;
  const auto a = conditional_distribution(c, en, 0.8);
  const auto b = conditional_distribution(c, shifted, 0.8);
  double sum = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(a.probabilities[i], b.probabilities[i], 1e-12);
    sum += a.probabilities[i];
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Softmax, ExtremeEnergiesDoNotOverflow) {
  const std::vector<TokenId> c{0, 1};
  const std::vector<double> en{5000.0, 4990.0};
  const auto d = conditional_distribution(c, en, 1.0);
  EXPECT_TRUE(std::isfinite(d.probabilities[0]));
  EXPECT_NEAR(d.probabilities[0] + d.probabilities[1], 1.0, 1e-12);
}

TEST(Softmax, RejectsBadInput) {
  const std::vector<TokenId> c{0, 1};
  const std::vector<double> one{1.0};
  const std::vector<double> nan{1.0, NAN};
  const std::vector<double> ok{1.0, 2.0};
  EXPECT_THROW(conditional_distribution({}, {}, 1.0), ContractError);
  EXPECT_THROW(conditional_distribution(c, one, 1.0), ContractError);
  EXPECT_THROW(conditional_distribution(c, nan, 1.0), ContractError);
  EXPECT_THROW(conditional_distribution(c, ok, 0.0), ConfigError);
}

TEST(SampleIndex, InverseCdf) {
  const std::vector<double> p{0.25, 0.5, 0.25};
  EXPECT_EQ(sample_index(p, 0.0), 0u);
  EXPECT_EQ(sample_index(p, 0.2499), 0u);
  EXPECT_EQ(sample_index(p, 0.25), 1u);
  EXPECT_EQ(sample_index(p, 0.7499), 1u);
  EXPECT_EQ(sample_index(p, 0.75), 2u);
  EXPECT_EQ(sample_index(p, 0.999999), 2u);
}

TEST(SamplerConfig, Validation) {
  SamplerConfig c;
  EXPECT_NO_THROW(validate(c));
  for (auto mutate : std::vector<std::function<void(SamplerConfig&)>>{
           [](SamplerConfig& s) { s.iterations = 0; }, [](SamplerConfig& s) { s.proposals = 0; },
           [](SamplerConfig& s) { s.kappa = 0; }, [](SamplerConfig& s) { s.temperature = -1; },
           [](SamplerConfig& s) { s.length = 0; }, [](SamplerConfig& s) { s.max_outer = 0; }}) {
    SamplerConfig bad;
    mutate(bad);
    EXPECT_THROW(validate(bad), ConfigError);
  }
}

TEST(GibbsStep, MatchesBruteForceConditionalOnSmallSpace) {
  const auto table = memaudit::test_support::random_energy_table(4, 2, 3.0, 17);
  SamplerConfig cfg;
  cfg.proposals = 4;
  cfg.temperature = 0.8;
  GibbsChain chain(backends_for(table), cfg, 0);
  for (const auto& s : memaudit::test_support::enumerate_states(4, 2)) {
    for (std::size_t i = 0; i < 2; ++i) {
      PromptState state(s);
      const auto rec = chain.step(state, i);
      const auto oracle = memaudit::test_support::brute_conditional(table, s, i, cfg.temperature);
      ASSERT_EQ(rec.candidates.size(), 4u);
      for (std::size_t j = 0; j < rec.candidates.size(); ++j)
        EXPECT_NEAR(rec.probabilities[j], oracle[static_cast<std::size_t>(rec.candidates[j])], 1e-12);
    }
  }
}

TEST(GibbsStep, FrameConditionAndLengthPreserved) {
  const auto table = memaudit::test_support::random_energy_table(4, 3, 3.0, 5);
  SamplerConfig cfg;
  cfg.proposals = 2;
  GibbsChain chain(backends_for(table), cfg, 3);
  PromptState state(std::vector<TokenId>{0, 1, 2});
  for (int k = 0; k < 200; ++k) {
    const PromptState before = state;
    const auto rec = chain.step(state);
    ASSERT_EQ(state.length(), 3u);
    ASSERT_FALSE(state.has_special(*table.vocab));
    int changed = 0;
    for (std::size_t i = 0; i < 3; ++i) changed += before[i] != state[i];
    ASSERT_LE(changed, 1);
    ASSERT_EQ(state[rec.index], rec.chosen);
  }
}

TEST(GibbsStep, SingleCandidateIsDeterministic) {
  const auto table = memaudit::test_support::random_energy_table(4, 2, 3.0, 1);
  SamplerConfig cfg;
  cfg.proposals = 1;
  GibbsChain chain(backends_for(table), cfg, 0);
  PromptState state(std::vector<TokenId>{3, 3});
  const auto rec = chain.step(state, 1);
  EXPECT_EQ(state[1], 0);  // uniform scores: lowest id wins the top-1 slot
  EXPECT_EQ(rec.probabilities, (std::vector<double>{1.0}));
  EXPECT_FALSE(rec.incumbent_in_candidates);
}

TEST(GibbsStep, EmpiricalFrequenciesMatchConditional) {
  const auto table = memaudit::test_support::random_energy_table(4, 2, 3.0, 23);
  SamplerConfig cfg;
  cfg.proposals = 4;
  GibbsChain chain(backends_for(table), cfg, 9);
  const std::vector<TokenId> start{1, 2};
  const auto oracle = memaudit::test_support::brute_conditional(table, start, 0, 1.0);
  const int draws = 10000;
  std::vector<int> counts(4, 0);
  for (int k = 0; k < draws; ++k) {
    PromptState s(start);
    chain.step(s, 0);
    ++counts[static_cast<std::size_t>(s[0])];
  }
  for (std::size_t t = 0; t < 4; ++t) {
    const double se = std::sqrt(oracle[t] * (1 - oracle[t]) / draws);
    EXPECT_NEAR(counts[t] / double(draws), oracle[t], 3 * se + 1e-12) << "token " << t;
  }
}

TEST(GibbsStep, StateUntouchedWhenBackendThrows) {
  auto vocab = std::make_shared<const Vocabulary>(std::vector<std::string>{"a", "b"});
  EnergyConfig ecfg;
  ecfg.samples = 1;
  SearchBackends b{TableProposalModel::uniform(vocab),
                   std::make_shared<const EnergyFunction>(std::make_shared<UnavailableDenoiser>("x"), ecfg)};
  GibbsChain chain(b, SamplerConfig{}, 0);
  PromptState s(std::vector<TokenId>{0, 1});
  EXPECT_THROW(chain.step(s), BackendError);
  EXPECT_EQ(s, PromptState(std::vector<TokenId>{0, 1}));
}

TEST(GibbsChain, SameSeedSameTrajectory) {
  const auto table = memaudit::test_support::random_energy_table(5, 3, 3.0, 2);
  SamplerConfig cfg;
  cfg.proposals = 3;
  cfg.kappa = 1e9;
  cfg.iterations = 40;
  cfg.max_outer = 1;
  cfg.rng_seed = 77;
  const PromptState p0(std::vector<TokenId>{0, 0, 0});
  const auto a = run_chain(p0, cfg, backends_for(table), 4);
  const auto b = run_chain(p0, cfg, backends_for(table), 4);
  ASSERT_EQ(a.trace.steps.size(), b.trace.steps.size());
  for (std::size_t k = 0; k < a.trace.steps.size(); ++k) {
    EXPECT_EQ(a.trace.steps[k].chosen, b.trace.steps[k].chosen);
    EXPECT_EQ(a.trace.steps[k].index, b.trace.steps[k].index);
  }
  const auto c = run_chain(p0, cfg, backends_for(table), 5);
  bool differs = false;
  for (std::size_t k = 0; k < c.trace.steps.size(); ++k) differs |= c.trace.steps[k].index != a.trace.steps[k].index;
  EXPECT_TRUE(differs);
}

TEST(RunChain, ReturnsImmediatelyWhenStartReachesKappa) {
  const auto table = memaudit::test_support::random_energy_table(4, 2, 3.0, 8);
  SamplerConfig cfg;
  cfg.kappa = 1e-9;
  const PromptState p0(std::vector<TokenId>{2, 1});
  const auto r = run_chain(p0, cfg, backends_for(table));
  EXPECT_EQ(r.best, p0);
  EXPECT_TRUE(r.trace.steps.empty());
  EXPECT_TRUE(r.trace.converged);
  EXPECT_EQ(r.trace.energy_evaluations, 1u);
}

TEST(RunChain, BestIsArgmaxOfEvaluatedStatesAndNondecreasing) {
  const auto table = memaudit::test_support::random_energy_table(4, 3, 3.0, 31);
  SamplerConfig cfg;
  cfg.proposals = 2;
  cfg.kappa = 1e9;
  cfg.iterations = 30;
  cfg.max_outer = 2;
  const PromptState p0(std::vector<TokenId>{3, 3, 3});
  const auto r = run_chain(p0, cfg, backends_for(table));
  EXPECT_FALSE(r.trace.converged);
  EXPECT_EQ(r.trace.outer_iterations, 2u);
  EXPECT_EQ(r.trace.steps.size(), 60u);

  // Every state the chain scored: p0 plus each step's candidates.
  double best = table.of({3, 3, 3});
  std::vector<TokenId> cur{3, 3, 3};
  double running = best;
  for (const auto& step : r.trace.steps) {
    for (TokenId t : step.candidates) {
      auto s = cur;
      s[step.index] = t;
      best = std::max(best, table.of(s));
    }
    cur[step.index] = step.chosen;
    EXPECT_GE(best, running);
    running = best;
  }
  EXPECT_DOUBLE_EQ(r.trace.best_value(), best);
  EXPECT_DOUBLE_EQ(table.of(std::vector<TokenId>(r.best.tokens().begin(), r.best.tokens().end())), best);
}

TEST(RunChain, RejectsSpecialTokensInStart) {
  const auto table = memaudit::test_support::random_energy_table(4, 2, 3.0, 8);
  EXPECT_THROW(run_chain(make_masked_prior(2, *table.vocab), SamplerConfig{}, backends_for(table)), ContractError);
}

TEST(RunChain, MemoCountsDistinctOracleCalls) {
  const auto table = memaudit::test_support::random_energy_table(3, 2, 3.0, 4);
  SamplerConfig cfg;
  cfg.proposals = 3;
  cfg.kappa = 1e9;
  cfg.iterations = 200;
  cfg.max_outer = 1;
  const auto r = run_chain(PromptState(std::vector<TokenId>{0, 0}), cfg, backends_for(table));
  EXPECT_LE(r.trace.energy_evaluations, 9u);  // only 9 states exist
}

TEST(MaskedPriorSearch, FillsMasksBeforeScanningAndFindsPlanted) {
  const auto space = six_cubed(1);
  SamplerConfig cfg;
  cfg.length = 3;
  cfg.proposals = 6;
  cfg.kappa = 9.0;
  cfg.iterations = 500;
  cfg.max_outer = 1;
  const auto b = planted_backends(space);
  const auto r = run_masked_prior_search(cfg, b, 0);
  ASSERT_GE(r.trace.steps.size(), 3u);
  std::set<std::size_t> first_sweep;
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_TRUE(r.trace.steps[k].bootstrap);
    first_sweep.insert(r.trace.steps[k].index);
  }
  EXPECT_EQ(first_sweep.size(), 3u);
  for (std::size_t k = 3; k < r.trace.steps.size(); ++k) EXPECT_FALSE(r.trace.steps[k].bootstrap);
  EXPECT_FALSE(r.best.has_special(b.vocabulary()));
  EXPECT_EQ(r.best.render(b.vocabulary()), "w4 w1 w3");
  EXPECT_TRUE(r.trace.converged);
}

TEST(Augmentation, LaunchesOneChainPerPositionAndRanksPool) {
  const auto table = memaudit::test_support::random_energy_table(5, 3, 3.0, 12);
  SamplerConfig cfg;
  cfg.proposals = 5;
  cfg.iterations = 60;
  cfg.temperature = 2.0;
  AugmentationConfig aug;
  aug.pool_size = 30;
  aug.per_seed = 6;
  const PromptState seed(std::vector<TokenId>{0, 1, 2});
  const auto r = run_augmentation(seed, cfg, aug, backends_for(table));
  ASSERT_EQ(r.traces.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(r.traces[k].chain_id, k);
    EXPECT_EQ(r.traces[k].steps.front().index, k);
    EXPECT_EQ(r.traces[k].steps.size(), cfg.iterations);
  }
  EXPECT_LE(r.pool.size(), 30u);
  EXPECT_EQ(r.selected.size(), 6u);
  std::set<std::string> texts;
  for (std::size_t k = 0; k < r.pool.size(); ++k) {
    EXPECT_NE(r.pool[k].prompt, seed);
    EXPECT_TRUE(texts.insert(r.pool[k].text).second);
    if (k) EXPECT_GE(r.pool[k - 1].score->value, r.pool[k].score->value);
  }
  for (std::size_t k = 1; k < r.selected.size(); ++k)
    EXPECT_GE(r.selected[k - 1].score->value, r.selected[k].score->value);
  EXPECT_EQ(r.selected.front().text, r.pool.front().text);
}

TEST(Augmentation, DegenerateFixedPointYieldsFewDistinctPrompts) {
  const auto table = memaudit::test_support::random_energy_table(3, 2, 3.0, 6);
  SamplerConfig cfg;
  cfg.proposals = 1;
  cfg.iterations = 20;
  const auto r = run_augmentation(PromptState(std::vector<TokenId>{0, 0}), cfg, AugmentationConfig{},
                                  backends_for(table));
  EXPECT_LE(r.selected.size(), 20u);
  std::set<std::string> texts;
  for (const auto& p : r.selected) EXPECT_TRUE(texts.insert(p.text).second);
}

TEST(Diversity, EditDistanceAndFarthestPoint) {
  const std::vector<TokenId> a{0, 1, 2}, b{0, 1, 3}, c{4, 5, 6};
  EXPECT_DOUBLE_EQ(normalized_edit_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(normalized_edit_distance(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(normalized_edit_distance(a, c), 1.0);
  EXPECT_DOUBLE_EQ(normalized_edit_distance(std::vector<TokenId>{0}, std::vector<TokenId>{0, 1}), 0.5);
  const std::vector<PromptState> ranked{PromptState(a), PromptState(b), PromptState(c)};
  EXPECT_EQ(farthest_point_selection(ranked, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(farthest_point_selection(ranked, 10).size(), 3u);
  EXPECT_TRUE(farthest_point_selection({}, 3).empty());
}

TEST(Greedy, TopKWithCorpusOrderTies) {
  auto d = LinearMockDenoiser::table(
      {{"a", {1.0}}, {"b", {5.0}}, {"c", {3.0}}, {"d", {5.0}}, {"e", {2.0}}}, 1);
  EnergyConfig ecfg;
  ecfg.samples = 1;
  EnergyFunction f(d, ecfg);
  const std::vector<std::string> corpus{"a", "b", "c", "d", "e"};
  const auto top2 = greedy_corpus_search(corpus, 2, f, 2);
  ASSERT_EQ(top2.size(), 2u);
  EXPECT_EQ(top2[0].corpus_index, 1u);
  EXPECT_EQ(top2[1].corpus_index, 3u);
  const auto all = greedy_corpus_search(corpus, 200, f);
  ASSERT_EQ(all.size(), 5u);
  EXPECT_EQ(all.back().corpus_index, 0u);
  EXPECT_EQ(kGreedyBaselineTopK, 200u);
}

TEST(Trace, JsonlHasOneLinePerStepAndSummary) {
  const auto space = six_cubed(2);
  SamplerConfig cfg;
  cfg.length = 3;
  cfg.proposals = 6;
  cfg.kappa = 9.0;
  cfg.iterations = 500;
  cfg.max_outer = 1;
  const auto b = planted_backends(space);
  const auto r = run_masked_prior_search(cfg, b, 1);
  std::ostringstream out;
  write_trace_jsonl(r.trace, b.vocabulary(), out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  nlohmann::json last;
  while (std::getline(in, line)) {
    last = nlohmann::json::parse(line);
    ++lines;
  }
  EXPECT_EQ(lines, r.trace.steps.size() + 1);
  EXPECT_EQ(last["summary"]["best"], "w4 w1 w3");
  EXPECT_EQ(last["summary"]["converged"], true);
}
