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
#include <list>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "memaudit/backends.hpp"
#include "memaudit/energy.hpp"
#include "memaudit/prompt_space.hpp"
#include "memaudit/random.hpp"

namespace memaudit {

struct SamplerConfig {
  std::size_t iterations = 150;  // N, Gibbs steps per outer iteration
  std::size_t proposals = 10;    // Q, candidate tokens per step
  double temperature = 1.0;      // K
  double kappa = 1.0;            // stop once the best energy reaches this
  std::size_t max_outer = 10;
  std::size_t length = 8;        // n
  std::uint64_t rng_seed = 0;
  // Test the kappa guard after every step rather than only after each block
  // of N steps. The returned prompt is the same either way; this only stops
  // the chain sooner.
  bool check_every_step = true;
  // Entries in the per-chain energy memo (keyed by rendered text).
  std::size_t cache_capacity = 1 << 16;
};

// Throws ConfigError when N, Q, max_outer or n is zero or kappa/K is not positive.
void validate(const SamplerConfig& cfg);

struct ProposalDistribution {
  std::vector<TokenId> candidates;
  std::vector<double> energies;
  std::vector<double> probabilities;
};

// prob_j = exp(e_j / K) / sum_w exp(e_w / K), evaluated with the maximum
// logit subtracted. Throws ContractError on empty or misaligned input or a
// NaN energy, ConfigError on K <= 0.
ProposalDistribution conditional_distribution(std::span<const TokenId> candidates,
                                              std::span<const double> energies, double temperature);

// Inverse-CDF draw in candidate order.
std::size_t sample_index(std::span<const double> probabilities, double u);

struct StepRecord {
  std::size_t step = 0;
  std::size_t index = 0;  // position updated
  TokenId previous = 0;
  std::vector<TokenId> candidates;
  std::vector<double> energies;
  std::vector<double> probabilities;
  TokenId chosen = 0;
  double energy = 0.0;  // energy of the state after the step
  bool incumbent_in_candidates = false;
  bool bootstrap = false;  // the state still held mask tokens
};

struct ChainTrace {
  std::uint64_t chain_id = 0;
  std::vector<StepRecord> steps;
  PromptState best;
  std::shared_ptr<const EnergyScore> best_score;
  // Index of the step that last raised the best energy; 0 when the initial
  // state was never beaten.
  std::size_t accepted_at = 0;
  std::size_t energy_evaluations = 0;  // distinct energy-oracle calls
  std::size_t outer_iterations = 0;
  bool converged = false;

  double best_value() const { return best_score ? best_score->value : 0.0; }
};

struct ChainResult {
  PromptState best;
  ChainTrace trace;
};

// Search-side backends: proposals come from the masked language model, scores
// from the diffusion model through an EnergyFunction.
struct SearchBackends {
  std::shared_ptr<const ProposalModel> proposals;
  std::shared_ptr<const EnergyFunction> energy;

  const Vocabulary& vocabulary() const { return proposals->vocabulary(); }
};

// LRU memo of energy scores keyed by rendered prompt text.
class EnergyCache {
 public:
  explicit EnergyCache(std::size_t capacity) : capacity_(capacity) {}

  std::shared_ptr<const EnergyScore> find(const std::string& text);
  void insert(const std::string& text, std::shared_ptr<const EnergyScore> score);
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  using Entry = std::pair<std::string, std::shared_ptr<const EnergyScore>>;
  std::size_t capacity_;
  std::list<Entry> order_;
  std::unordered_map<std::string, std::list<Entry>::iterator> entries_;
};

// One random-scan Gibbs chain with a private RNG stream derived from
// (rng_seed, chain_id).
class GibbsChain {
 public:
  GibbsChain(SearchBackends backends, SamplerConfig cfg, std::uint64_t chain_id);

  // Energy of a state through the chain's memo. Special tokens are dropped
  // from the rendered text.
  std::shared_ptr<const EnergyScore> score(const PromptState& state);
  // Scores in one batched oracle call for the memo misses.
  std::vector<std::shared_ptr<const EnergyScore>> score_all(std::span<const PromptState> states);

  // Updates one position of `state` (uniform unless forced). The state is
  // left untouched if a backend call throws.
  StepRecord step(PromptState& state, std::optional<std::size_t> forced_index = std::nullopt);

  // Offers a state to the running argmax. States holding special tokens are
  // ignored.
  void observe(const PromptState& state, std::shared_ptr<const EnergyScore> score);

  const ChainTrace& trace() const noexcept { return trace_; }
  ChainTrace take_trace() { return std::move(trace_); }
  Rng& rng() noexcept { return rng_; }
  const SamplerConfig& config() const noexcept { return cfg_; }

 private:
  std::string text_of(const PromptState& state) const;

  SearchBackends backends_;
  SamplerConfig cfg_;
  Rng rng_;
  EnergyCache cache_;
  bool use_cache_;
  ChainTrace trace_;
};

// Random-scan Gibbs from p0 (which must hold no special tokens): blocks of N
// steps until the best energy seen reaches kappa or max_outer blocks ran.
// The returned prompt is the argmax over every state whose energy was
// evaluated. If max_outer is exhausted, trace.converged is false.
ChainResult run_chain(const PromptState& p0, const SamplerConfig& cfg, const SearchBackends& backends,
                      std::uint64_t chain_id = 0);

// Starts from n mask tokens. A first sweep fills every position once, in a
// random order, proposing with the remaining masks in context and scoring
// candidates with the masks dropped; the kappa guard and random scan begin
// once no masks remain.
ChainResult run_masked_prior_search(const SamplerConfig& cfg, const SearchBackends& backends,
                                    std::uint64_t chain_id = 0);

struct AugmentationConfig {
  std::size_t pool_size = 100;  // top prompts kept by energy
  std::size_t per_seed = 20;    // diverse prompts selected from the pool
  std::size_t jobs = 1;
};

struct AugmentedPrompt {
  PromptState prompt;
  std::string text;
  std::shared_ptr<const EnergyScore> score;
};

struct AugmentationResult {
  std::vector<AugmentedPrompt> pool;      // top pool_size, descending energy
  std::vector<AugmentedPrompt> selected;  // per_seed diverse picks, descending energy
  std::vector<ChainTrace> traces;         // one per chain, chain k first updates index k
};

// Runs one N-step chain per position of the seed prompt, pools the distinct
// visited states (the seed itself excluded), keeps the top pool_size by
// energy and picks per_seed of them by farthest-point selection on
// normalized token edit distance, starting from the highest-energy prompt.
AugmentationResult run_augmentation(const PromptState& seed, const SamplerConfig& cfg,
                                    const AugmentationConfig& aug, const SearchBackends& backends);

// Levenshtein distance over token ids divided by the longer length.
double normalized_edit_distance(std::span<const TokenId> a, std::span<const TokenId> b);

// Greedy farthest-point selection of up to k indices from a list ordered by
// preference. Ties go to the earlier entry.
std::vector<std::size_t> farthest_point_selection(std::span<const PromptState> ranked, std::size_t k);

struct RankedPrompt {
  std::size_t corpus_index = 0;
  EnergyScore score;
};

// Exact top-k of a corpus by D_theta; ties keep corpus order.
std::vector<RankedPrompt> greedy_corpus_search(std::span<const std::string> corpus, std::size_t k,
                                               const EnergyFunction& energy, std::size_t batch_size = 256);

inline constexpr std::size_t kGreedyBaselineTopK = 200;

// One JSON object per step, then a final {"summary": ...} line.
void write_trace_jsonl(const ChainTrace& trace, const Vocabulary& vocab, std::ostream& out);

}  // namespace memaudit
