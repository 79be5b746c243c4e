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
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memaudit/image_store.hpp"
#include "memaudit/prompt_space.hpp"

namespace memaudit {

class MitigationPlugin;

struct TextEmbedding {
  std::vector<double> vector;
  std::string source_text;
};

// Arguments of one noise prediction eps(x_T, f(p), T). The latent x_T is
// identified by its seed; the backend owns how the seed becomes a tensor.
struct NoiseQuery {
  std::uint64_t latent_seed = 0;
  const TextEmbedding* prompt_embedding = nullptr;
  int timestep = 0;
};

inline constexpr double kDefaultGuidanceScale = 7.5;
inline constexpr int kDefaultInferenceSteps = 50;

struct GenerationRequest {
  std::string prompt;
  int image_count = 1;
  double guidance_scale = kDefaultGuidanceScale;
  int steps = kDefaultInferenceSteps;
  std::uint64_t seed = 0;
  // Set for mitigations that act inside the generator (embedding or
  // attention stage). Prompt rewrites are applied before the request exists.
  std::shared_ptr<const MitigationPlugin> mitigation_hook;

  friend bool operator==(const GenerationRequest&, const GenerationRequest&) = default;
};

struct GenerationResult {
  std::vector<ImageRef> images;
  int failed = 0;
};

enum class EmbeddingKind { copy_detection, alignment_image, alignment_text };

std::string_view to_string(EmbeddingKind kind);

// Unit-norm embedding. Construct through make_embedding().
struct EmbeddingVector {
  std::vector<double> values;
  EmbeddingKind kind = EmbeddingKind::copy_detection;
};

// Normalizes to unit L2 norm. Throws ContractError on a zero or non-finite
// vector.
EmbeddingVector make_embedding(std::vector<double> values, EmbeddingKind kind);

// Diffusion side: text encoder f and the noise predictor eps_theta at the
// terminal step. Implementations must be safe for concurrent const calls.
class DenoiserBackend {
 public:
  virtual ~DenoiserBackend() = default;

  virtual std::string name() const = 0;
  virtual std::size_t embedding_dim() const = 0;
  virtual std::size_t latent_size() const = 0;
  virtual int terminal_step() const = 0;

  virtual TextEmbedding encode_text(std::string_view text) const = 0;

  // Validates the query and forwards to do_predict_noise.
  std::vector<double> predict_noise(const NoiseQuery& query) const;

  // Must equal predict_noise applied elementwise.
  virtual std::vector<std::vector<double>> predict_noise_batch(std::span<const NoiseQuery> queries) const;

  // f(empty string), computed once.
  const TextEmbedding& empty_embedding() const;

 protected:
  virtual std::vector<double> do_predict_noise(const NoiseQuery& query) const = 0;

 private:
  mutable std::once_flag empty_once_;
  mutable TextEmbedding empty_;
};

struct TokenProposal {
  TokenId token = 0;
  double score = 0.0;
};

// Masked-language-model proposals for one position of a prompt.
class ProposalModel {
 public:
  virtual ~ProposalModel() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  // Top-q regular tokens for position masked_index, sorted by descending
  // score then ascending token id. q larger than the vocabulary returns the
  // whole vocabulary. The incumbent token is not forced into the list.
  std::vector<TokenProposal> propose_tokens(const PromptState& context, std::size_t masked_index,
                                            std::size_t q) const;

 protected:
  // Scores for every regular token given the context with masked_index masked.
  virtual std::vector<TokenProposal> score_tokens(const PromptState& masked_context,
                                                  std::size_t masked_index) const = 0;
};

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual std::string name() const = 0;
  // Throws ContractError for image_count < 1. Individual image failures are
  // reported through GenerationResult::failed.
  virtual GenerationResult generate_images(const GenerationRequest& request) const = 0;
};

class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;
  virtual std::string name() const = 0;
  virtual EmbeddingVector embed_image(const ImageRef& image, EmbeddingKind kind) const = 0;
};

class AlignmentScorer {
 public:
  virtual ~AlignmentScorer() = default;
  virtual std::string name() const = 0;
  virtual double score_alignment(std::string_view text, const ImageRef& image) const = 0;
};

class AestheticScorer {
 public:
  virtual ~AestheticScorer() = default;
  virtual std::string name() const = 0;
  virtual double score_aesthetic(const ImageRef& image) const = 0;
};

struct WebMatch {
  std::string url;
  std::string thumbnail;
  double score = 0.0;
};

// Reverse image search. Throws BackendError when the provider is unreachable.
class WebMatchProvider {
 public:
  virtual ~WebMatchProvider() = default;
  virtual std::string name() const = 0;
  virtual std::vector<WebMatch> find_matches(std::span<const std::uint8_t> image_bytes) const = 0;
};

}  // namespace memaudit
