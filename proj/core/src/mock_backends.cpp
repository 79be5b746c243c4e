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

#include "memaudit/mock_backends.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"
#include "memaudit/random.hpp"

namespace memaudit {

LinearMockDenoiser::LinearMockDenoiser(std::string name, std::size_t dim, Encoder encoder, double latent_gain)
    : name_(std::move(name)), dim_(dim), encoder_(std::move(encoder)), latent_gain_(latent_gain) {
  if (dim_ == 0) throw ContractError("mock denoiser dimension must be positive");
}

std::shared_ptr<LinearMockDenoiser> LinearMockDenoiser::bag_of_words(std::vector<std::string> words,
                                                                     std::size_t max_tokens, double latent_gain) {
  std::unordered_map<std::string, std::size_t> index;
  for (auto& w : words) index.try_emplace(w, index.size());
  const std::size_t dim = index.size();
  auto encoder = [index = std::move(index), dim, max_tokens](std::string_view text) {
    auto tokens = split_words(text);
    if (tokens.size() > max_tokens) {
      spdlog::warn("text has {} words; truncating to the {}-word limit", tokens.size(), max_tokens);
      tokens.resize(max_tokens);
    }
    std::vector<double> v(dim, 0.0);
    for (const auto& t : tokens)
      if (auto it = index.find(t); it != index.end()) v[it->second] += 1.0;
    return v;
  };
  return std::make_shared<LinearMockDenoiser>("mock-bag-of-words", dim, std::move(encoder), latent_gain);
}

std::shared_ptr<LinearMockDenoiser> LinearMockDenoiser::table(std::map<std::string, std::vector<double>> entries,
                                                              std::size_t dim) {
  for (const auto& [text, v] : entries)
    if (v.size() != dim) throw ContractError("table entry for '" + text + "' has the wrong dimension");
  auto encoder = [entries = std::move(entries), dim](std::string_view text) {
    auto it = entries.find(std::string(text));
    return it == entries.end() ? std::vector<double>(dim, 0.0) : it->second;
  };
  return std::make_shared<LinearMockDenoiser>("mock-table", dim, std::move(encoder));
}

std::shared_ptr<LinearMockDenoiser> LinearMockDenoiser::from_energy(
    std::string name, std::function<double(std::string_view)> energy) {
  auto encoder = [energy = std::move(energy)](std::string_view text) {
    return std::vector<double>{energy(text)};
  };
  return std::make_shared<LinearMockDenoiser>(std::move(name), 1, std::move(encoder));
}

TextEmbedding LinearMockDenoiser::encode_text(std::string_view text) const {
  auto v = encoder_(text);
  if (v.size() != dim_) throw BackendError("mock encoder produced the wrong dimension");
  for (double x : v)
    if (!std::isfinite(x)) throw BackendError("mock encoder produced a non-finite value");
  return TextEmbedding{std::move(v), std::string(text)};
}

std::vector<double> LinearMockDenoiser::do_predict_noise(const NoiseQuery& query) const {
  std::vector<double> out = query.prompt_embedding->vector;
  if (latent_gain_ == 0.0) return out;
  Rng rng(query.latent_seed);
  const double scale = 1.0 + latent_gain_ * (rng.uniform() - 0.5);
  for (double& x : out) x = scale * x + rng.normal();
  return out;
}

void UnavailableDenoiser::fail() const {
  throw BackendError("model runtime '" + runtime_ + "' is not available in this build", false);
}
std::size_t UnavailableDenoiser::embedding_dim() const { fail(); }
std::size_t UnavailableDenoiser::latent_size() const { fail(); }
int UnavailableDenoiser::terminal_step() const { fail(); }
TextEmbedding UnavailableDenoiser::encode_text(std::string_view) const { fail(); }
std::vector<double> UnavailableDenoiser::do_predict_noise(const NoiseQuery&) const { fail(); }

std::function<double(std::string_view)> planted_energy(const PlantedSpace& space) {
  if (space.planted.empty()) throw ConfigError("planted prompt must have at least one word");
  if (space.peak < 1.0) throw ConfigError("planted peak must be at least 1");
  return [planted = space.planted, peak = space.peak, seed = space.seed](std::string_view text) -> double {
    const auto words = split_words(text);
    if (words.empty()) return 0.0;
    if (words == planted) return peak;
    std::size_t matches = 0;
    for (std::size_t i = 0; i < std::min(words.size(), planted.size()); ++i)
      if (words[i] == planted[i]) ++matches;
    matches = std::min(matches, planted.size() - 1);
    const double jitter = static_cast<double>(splitmix64(fnv1a64(text, seed)) >> 11) * 0x1.0p-53;
    // Strictly below 1 for every non-planted text.
    return 0.6 * static_cast<double>(matches) / static_cast<double>(planted.size()) + 0.4 * jitter;
  };
}

TableProposalModel::TableProposalModel(std::shared_ptr<const Vocabulary> vocab, std::map<std::string, double> scores)
    : vocab_(std::move(vocab)), tables_{std::move(scores)} {}

TableProposalModel::TableProposalModel(std::shared_ptr<const Vocabulary> vocab,
                                       std::vector<std::map<std::string, double>> per_position)
    : vocab_(std::move(vocab)), tables_(std::move(per_position)) {
  if (tables_.empty()) throw ContractError("per-position proposal table is empty");
}

std::shared_ptr<TableProposalModel> TableProposalModel::uniform(std::shared_ptr<const Vocabulary> vocab) {
  std::map<std::string, double> scores;
  for (TokenId id : vocab->regular_ids()) scores.emplace(vocab->token(id), 1.0);
  return std::make_shared<TableProposalModel>(std::move(vocab), std::move(scores));
}

std::vector<TokenProposal> TableProposalModel::score_tokens(const PromptState&, std::size_t masked_index) const {
  // Position-independent tables have one entry; per-position tables reuse
  // their last entry past the end.
  const auto& table = tables_[std::min(masked_index, tables_.size() - 1)];
  std::vector<TokenProposal> out;
  out.reserve(vocab_->size());
  for (TokenId id : vocab_->regular_ids()) {
    auto it = table.find(vocab_->token(id));
    out.push_back({id, it == table.end() ? 0.0 : it->second});
  }
  return out;
}

MockImageGenerator::MockImageGenerator(std::shared_ptr<ImageStore> store, MockGeneratorConfig config)
    : store_(std::move(store)), config_(std::move(config)) {
  if (!store_) throw ContractError("mock generator needs an image store");
  if (config_.image_bytes < 8) throw ContractError("mock images must be at least 8 bytes");
}

namespace {

bool is_ordered_subsequence(const std::vector<std::string>& needle, const std::vector<std::string>& hay) {
  std::size_t j = 0;
  for (const auto& w : hay)
    if (j < needle.size() && w == needle[j]) ++j;
  return j == needle.size();
}

}  // namespace

GenerationResult MockImageGenerator::generate_images(const GenerationRequest& request) const {
  if (request.image_count < 1) throw ContractError("image_count must be at least 1");
  const auto words = split_words(request.prompt);
  const ImageBytes* memorized = nullptr;
  double probability = 0.0;
  for (const auto& [trigger, bytes] : config_.memorized) {
    const auto trigger_words = split_words(trigger);
    if (trigger_words.empty() || !is_ordered_subsequence(trigger_words, words)) continue;
    const double extra = static_cast<double>(words.size() - trigger_words.size());
    const double p = config_.memorization_rate * std::pow(config_.extra_word_decay, extra);
    if (p > probability) {
      probability = p;
      memorized = &bytes;
    }
  }

  const std::uint64_t prompt_hash = fnv1a64(request.prompt);
  const std::uint64_t config_hash =
      derive_seed(static_cast<std::uint64_t>(request.steps),
                  {static_cast<std::uint64_t>(std::llround(request.guidance_scale * 1000.0))});
  GenerationResult result;
  for (int k = 0; k < request.image_count; ++k) {
    if (config_.fail_every > 0 && (k + 1) % config_.fail_every == 0) {
      ++result.failed;
      continue;
    }
    const std::uint64_t image_seed = derive_seed(request.seed, {static_cast<std::uint64_t>(k)});
    Rng rng(derive_seed(image_seed, {prompt_hash, config_hash}));
    if (memorized != nullptr && rng.uniform() < probability) {
      result.images.push_back(store_->put(*memorized));
      continue;
    }
    ImageBytes bytes(config_.image_bytes);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.next() >> 56);
    result.images.push_back(store_->put(bytes));
  }
  return result;
}

ImageBytes synthetic_image(std::string_view label, std::size_t size) {
  Rng rng(fnv1a64(label, 0x5eed));
  ImageBytes bytes(size);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.next() >> 56);
  return bytes;
}

HashEmbedder::HashEmbedder(std::shared_ptr<const ImageStore> store, std::size_t dim)
    : store_(std::move(store)), dim_(dim) {
  if (!store_) throw ContractError("hash embedder needs an image store");
  if (dim_ < 2) throw ContractError("embedding dimension must be at least 2");
}

EmbeddingVector HashEmbedder::embed_image(const ImageRef& image, EmbeddingKind kind) const {
  auto bytes = store_->get(image);
  if (!bytes) throw BackendError("image " + image.id + " not found in store");
  Rng rng(derive_seed(fnv1a64(*bytes), {static_cast<std::uint64_t>(kind)}));
  std::vector<double> v(dim_);
  for (double& x : v) x = rng.normal();
  return make_embedding(std::move(v), kind);
}

std::vector<WebMatch> TableWebMatchProvider::find_matches(std::span<const std::uint8_t> image_bytes) const {
  if (!available_) throw BackendError("web-match provider unavailable", true);
  auto it = matches_.find(content_id(image_bytes));
  if (it == matches_.end()) return {};
  return it->second;
}

}  // namespace memaudit
