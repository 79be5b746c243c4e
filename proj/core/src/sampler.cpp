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

#include "memaudit/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"
#include "memaudit/parallel.hpp"

namespace memaudit {

void validate(const SamplerConfig& cfg) {
  if (cfg.iterations == 0) throw ConfigError("sampler iterations N must be at least 1");
  if (cfg.proposals == 0) throw ConfigError("sampler proposal count Q must be at least 1");
  if (cfg.max_outer == 0) throw ConfigError("sampler max_outer must be at least 1");
  if (cfg.length == 0) throw ConfigError("prompt length n must be at least 1");
  if (!(cfg.kappa > 0.0)) throw ConfigError("termination threshold kappa must be positive");
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature))
    throw ConfigError("temperature K must be positive and finite");
}

ProposalDistribution conditional_distribution(std::span<const TokenId> candidates,
                                              std::span<const double> energies, double temperature) {
  if (candidates.empty()) throw ContractError("conditional distribution needs at least one candidate");
  if (candidates.size() != energies.size()) throw ContractError("energies are not aligned with candidates");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("temperature K must be positive and finite");
  double max_logit = -INFINITY;
  for (double e : energies) {
    if (std::isnan(e)) throw ContractError("NaN energy in conditional distribution");
    max_logit = std::max(max_logit, e / temperature);
  }
  if (!std::isfinite(max_logit)) throw ContractError("non-finite energy in conditional distribution");

  ProposalDistribution dist;
  dist.candidates.assign(candidates.begin(), candidates.end());
  dist.energies.assign(energies.begin(), energies.end());
  dist.probabilities.resize(energies.size());
  double total = 0.0;
  for (std::size_t j = 0; j < energies.size(); ++j) {
    dist.probabilities[j] = std::exp(energies[j] / temperature - max_logit);
    total += dist.probabilities[j];
  }
  for (double& p : dist.probabilities) p /= total;
  return dist;
}

std::size_t sample_index(std::span<const double> probabilities, double u) {
  if (probabilities.empty()) throw ContractError("cannot sample from an empty distribution");
  double cumulative = 0.0;
  for (std::size_t j = 0; j + 1 < probabilities.size(); ++j) {
    cumulative += probabilities[j];
    if (u < cumulative) return j;
  }
  return probabilities.size() - 1;
}

std::shared_ptr<const EnergyScore> EnergyCache::find(const std::string& text) {
  auto it = entries_.find(text);
  if (it == entries_.end()) return nullptr;
  order_.splice(order_.begin(), order_, it->second);
  return it->second->second;
}

void EnergyCache::insert(const std::string& text, std::shared_ptr<const EnergyScore> score) {
  if (capacity_ == 0) return;
  if (auto it = entries_.find(text); it != entries_.end()) {
    it->second->second = std::move(score);
    order_.splice(order_.begin(), order_, it->second);
    return;
  }
  order_.emplace_front(text, std::move(score));
  entries_.emplace(text, order_.begin());
  if (entries_.size() > capacity_) {
    entries_.erase(order_.back().first);
    order_.pop_back();
  }
}

GibbsChain::GibbsChain(SearchBackends backends, SamplerConfig cfg, std::uint64_t chain_id)
    : backends_(std::move(backends)),
      cfg_(cfg),
      rng_(derive_seed(cfg.rng_seed, {chain_id})),
      cache_(cfg.cache_capacity) {
  if (!backends_.proposals || !backends_.energy) throw ContractError("search backends are incomplete");
  validate(cfg_);
  // Per-call seeds make the energy random; a memo would freeze one draw.
  use_cache_ = backends_.energy->config().seed_policy == SeedPolicy::fixed_shared;
  trace_.chain_id = chain_id;
}

std::string GibbsChain::text_of(const PromptState& state) const {
  return render_without_specials(state, backends_.vocabulary());
}

std::shared_ptr<const EnergyScore> GibbsChain::score(const PromptState& state) {
  return score_all(std::span(&state, 1)).front();
}

std::vector<std::shared_ptr<const EnergyScore>> GibbsChain::score_all(std::span<const PromptState> states) {
  std::vector<std::shared_ptr<const EnergyScore>> out(states.size());
  std::vector<std::string> texts(states.size());
  std::vector<std::string> missing;
  std::unordered_map<std::string, std::size_t> missing_slot;
  for (std::size_t j = 0; j < states.size(); ++j) {
    texts[j] = text_of(states[j]);
    if (use_cache_) out[j] = cache_.find(texts[j]);
    if (!out[j] && !missing_slot.contains(texts[j])) {
      missing_slot.emplace(texts[j], missing.size());
      missing.push_back(texts[j]);
    }
  }
  if (!missing.empty()) {
    auto scores = backends_.energy->batch(missing);
    trace_.energy_evaluations += missing.size();
    std::vector<std::shared_ptr<const EnergyScore>> fresh;
    fresh.reserve(scores.size());
    for (auto& s : scores) fresh.push_back(std::make_shared<const EnergyScore>(std::move(s)));
    for (std::size_t j = 0; j < states.size(); ++j)
      if (!out[j]) out[j] = fresh[missing_slot.at(texts[j])];
    if (use_cache_)
      for (std::size_t m = 0; m < missing.size(); ++m) cache_.insert(missing[m], fresh[m]);
  }
  return out;
}

void GibbsChain::observe(const PromptState& state, std::shared_ptr<const EnergyScore> score) {
  if (state.has_special(backends_.vocabulary())) return;
  if (!trace_.best_score || score->value > trace_.best_score->value) {
    trace_.best = state;
    trace_.best_score = std::move(score);
    trace_.accepted_at = trace_.steps.size();
  }
}

StepRecord GibbsChain::step(PromptState& state, std::optional<std::size_t> forced_index) {
  const Vocabulary& vocab = backends_.vocabulary();
  const std::size_t n = state.length();
  if (n == 0) throw ContractError("cannot step an empty prompt");
  const std::size_t i = forced_index ? *forced_index : rng_.index(n);
  if (i >= n) throw ContractError("forced index out of range");

  const auto proposals = backends_.proposals->propose_tokens(state, i, cfg_.proposals);
  if (proposals.empty()) throw BackendError("proposal model returned no candidates");

  std::vector<TokenId> candidates;
  std::vector<PromptState> next_states;
  candidates.reserve(proposals.size());
  next_states.reserve(proposals.size());
  for (const auto& p : proposals) {
    candidates.push_back(p.token);
    next_states.push_back(substitute(state, i, p.token, vocab));
  }
  const auto scores = score_all(next_states);
  std::vector<double> energies(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) energies[j] = scores[j]->value;

  auto dist = conditional_distribution(candidates, energies, cfg_.temperature);
  const std::size_t pick = sample_index(dist.probabilities, rng_.uniform());

  StepRecord record;
  record.step = trace_.steps.size() + 1;
  record.index = i;
  record.previous = state[i];
  record.incumbent_in_candidates = std::ranges::find(candidates, state[i]) != candidates.end();
  record.bootstrap = state.has_special(vocab);
  record.chosen = candidates[pick];
  record.energy = energies[pick];
  record.candidates = std::move(dist.candidates);
  record.energies = std::move(dist.energies);
  record.probabilities = std::move(dist.probabilities);

  trace_.steps.push_back(record);
  for (std::size_t j = 0; j < next_states.size(); ++j) observe(next_states[j], scores[j]);
  state = std::move(next_states[pick]);
  return record;
}

namespace {

bool reached(const ChainTrace& trace, double kappa) {
  return trace.best_score && trace.best_score->value >= kappa;
}

ChainResult finish(GibbsChain& chain) {
  ChainResult result;
  result.trace = chain.take_trace();
  result.best = result.trace.best;
  return result;
}

// Outer/inner loop shared by run_chain and the masked-prior search.
ChainResult run_blocks(GibbsChain& chain, PromptState state) {
  const auto& cfg = chain.config();
  auto converged = [&] {
    return reached(chain.trace(), cfg.kappa);
  };
  auto done = [&](bool ok) {
    ChainResult r = finish(chain);
    r.trace.converged = ok;
    return r;
  };
  if (converged()) return done(true);
  std::size_t outer = 0;
  while (outer < cfg.max_outer) {
    for (std::size_t j = 0; j < cfg.iterations; ++j) {
      chain.step(state);
      if (cfg.check_every_step && converged()) {
        ChainResult r = done(true);
        r.trace.outer_iterations = outer + 1;
        return r;
      }
    }
    ++outer;
    if (converged()) {
      ChainResult r = done(true);
      r.trace.outer_iterations = outer;
      return r;
    }
  }
  ChainResult r = done(false);
  r.trace.outer_iterations = outer;
  return r;
}

}  // namespace

ChainResult run_chain(const PromptState& p0, const SamplerConfig& cfg, const SearchBackends& backends,
                      std::uint64_t chain_id) {
  validate(cfg);
  if (p0.length() == 0) throw ContractError("initial prompt is empty");
  if (p0.has_special(backends.vocabulary()))
    throw ContractError("initial prompt holds special tokens; use run_masked_prior_search");
  GibbsChain chain(backends, cfg, chain_id);
  chain.observe(p0, chain.score(p0));
  return run_blocks(chain, p0);
}

ChainResult run_masked_prior_search(const SamplerConfig& cfg, const SearchBackends& backends,
                                    std::uint64_t chain_id) {
  validate(cfg);
  GibbsChain chain(backends, cfg, chain_id);
  PromptState state = make_masked_prior(cfg.length, backends.vocabulary());

  std::vector<std::size_t> order(cfg.length);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[chain.rng().index(k)]);
  for (std::size_t i : order) chain.step(state, i);

  return run_blocks(chain, std::move(state));
}

double normalized_edit_distance(std::span<const TokenId> a, std::span<const TokenId> b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[b.size()]) / static_cast<double>(longest);
}

std::vector<std::size_t> farthest_point_selection(std::span<const PromptState> ranked, std::size_t k) {
  std::vector<std::size_t> chosen;
  if (ranked.empty() || k == 0) return chosen;
  std::vector<double> nearest(ranked.size(), INFINITY);
  std::vector<bool> taken(ranked.size(), false);
  std::size_t next = 0;
  while (chosen.size() < std::min(k, ranked.size())) {
    chosen.push_back(next);
    taken[next] = true;
    for (std::size_t j = 0; j < ranked.size(); ++j)
      if (!taken[j])
        nearest[j] = std::min(nearest[j], normalized_edit_distance(ranked[next].tokens(), ranked[j].tokens()));
    double best = -1.0;
    for (std::size_t j = 0; j < ranked.size(); ++j) {
      if (!taken[j] && nearest[j] > best) {
        best = nearest[j];
        next = j;
      }
    }
  }
  return chosen;
}

AugmentationResult run_augmentation(const PromptState& seed, const SamplerConfig& cfg,
                                    const AugmentationConfig& aug, const SearchBackends& backends) {
  validate(cfg);
  const Vocabulary& vocab = backends.vocabulary();
  if (seed.length() == 0) throw ContractError("seed prompt is empty");
  if (seed.has_special(vocab)) throw ContractError("seed prompt holds special tokens");

  const std::size_t n = seed.length();
  struct ChainOutput {
    std::vector<std::pair<PromptState, std::shared_ptr<const EnergyScore>>> visited;
    ChainTrace trace;
  };
  std::vector<ChainOutput> outputs(n);
  parallel_for(n, aug.jobs, [&](std::size_t k) {
    GibbsChain chain(backends, cfg, k);
    PromptState state = seed;
    chain.observe(seed, chain.score(seed));
    for (std::size_t j = 0; j < cfg.iterations; ++j) {
      chain.step(state, j == 0 ? std::optional<std::size_t>(k) : std::nullopt);
      outputs[k].visited.emplace_back(state, chain.score(state));
    }
    outputs[k].trace = chain.take_trace();
  });

  AugmentationResult result;
  std::unordered_set<std::string> seen{seed.render(vocab)};
  std::vector<AugmentedPrompt> pooled;
  for (auto& out : outputs) {
    for (auto& [state, score] : out.visited) {
      std::string text = state.render(vocab);
      if (!seen.insert(text).second) continue;
      pooled.push_back({state, std::move(text), score});
    }
    result.traces.push_back(std::move(out.trace));
  }
  std::ranges::stable_sort(pooled, [](const AugmentedPrompt& a, const AugmentedPrompt& b) {
    if (a.score->value != b.score->value) return a.score->value > b.score->value;
    return a.text < b.text;
  });
  if (pooled.size() > aug.pool_size) pooled.resize(aug.pool_size);

  std::vector<PromptState> ranked;
  ranked.reserve(pooled.size());
  for (const auto& p : pooled) ranked.push_back(p.prompt);
  auto picks = farthest_point_selection(ranked, aug.per_seed);
  std::ranges::sort(picks);  // pool order is descending energy
  for (std::size_t idx : picks) result.selected.push_back(pooled[idx]);
  result.pool = std::move(pooled);
  return result;
}

std::vector<RankedPrompt> greedy_corpus_search(std::span<const std::string> corpus, std::size_t k,
                                               const EnergyFunction& energy, std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<RankedPrompt> ranked;
  ranked.reserve(corpus.size());
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, corpus.size() - start);
    auto scores = energy.batch(corpus.subspan(start, len));
    for (std::size_t j = 0; j < len; ++j) ranked.push_back({start + j, std::move(scores[j])});
  }
  std::ranges::stable_sort(ranked, [](const RankedPrompt& a, const RankedPrompt& b) {
    return a.score.value > b.score.value;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

void write_trace_jsonl(const ChainTrace& trace, const Vocabulary& vocab, std::ostream& out) {
  using nlohmann::ordered_json;
  auto tokens_of = [&](std::span<const TokenId> ids) {
    ordered_json arr = ordered_json::array();
    for (TokenId id : ids) arr.push_back(vocab.token(id));
    return arr;
  };
  for (const auto& s : trace.steps) {
    ordered_json line;
    line["step"] = s.step;
    line["index"] = s.index;
    line["previous"] = vocab.token(s.previous);
    line["candidates"] = tokens_of(s.candidates);
    line["energies"] = s.energies;
    line["probabilities"] = s.probabilities;
    line["chosen"] = vocab.token(s.chosen);
    line["energy"] = s.energy;
    line["incumbent_in_candidates"] = s.incumbent_in_candidates;
    line["bootstrap"] = s.bootstrap;
    out << line.dump() << '\n';
  }
  ordered_json summary;
  summary["chain_id"] = trace.chain_id;
  summary["best"] = trace.best_score ? ordered_json(trace.best.render(vocab)) : ordered_json(nullptr);
  summary["best_value"] = trace.best_value();
  summary["accepted_at"] = trace.accepted_at;
  summary["energy_evaluations"] = trace.energy_evaluations;
  summary["outer_iterations"] = trace.outer_iterations;
  summary["converged"] = trace.converged;
  summary["steps"] = trace.steps.size();
  out << ordered_json{{"summary", summary}}.dump() << '\n';
}

}  // namespace memaudit
