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

// Deterministic stand-ins for every model-dependent capability. Each mock has
// closed-form behavior so pipeline results can be checked by hand.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "memaudit/backends.hpp"

namespace memaudit {

// eps(x_T, f(p), T) := f(p), optionally scaled and shifted by a latent-derived
// term when latent_gain != 0. With latent_gain == 0 the prediction ignores
// the latent, so D_theta(p) = ||f(p) - f(empty)||_2 for any sample count.
class LinearMockDenoiser final : public DenoiserBackend {
 public:
  using Encoder = std::function<std::vector<double>(std::string_view)>;

  LinearMockDenoiser(std::string name, std::size_t dim, Encoder encoder, double latent_gain = 0.0);

  // One-hot bag of words over `words`; unknown words are ignored. Texts
  // longer than max_tokens words are truncated with a warning.
  static std::shared_ptr<LinearMockDenoiser> bag_of_words(std::vector<std::string> words,
                                                          std::size_t max_tokens = 77,
                                                          double latent_gain = 0.0);

  // Exact lookup; texts missing from the table encode to the zero vector.
  static std::shared_ptr<LinearMockDenoiser> table(std::map<std::string, std::vector<double>> entries,
                                                   std::size_t dim);

  // 1-d encoding [energy(text)]; energy("") must be 0 for D_theta(empty)=0.
  static std::shared_ptr<LinearMockDenoiser> from_energy(std::string name,
                                                         std::function<double(std::string_view)> energy);

  std::string name() const override { return name_; }
  std::size_t embedding_dim() const override { return dim_; }
  std::size_t latent_size() const override { return dim_; }
  int terminal_step() const override { return kTerminalStep; }
  TextEmbedding encode_text(std::string_view text) const override;

  static constexpr int kTerminalStep = 999;

 protected:
  std::vector<double> do_predict_noise(const NoiseQuery& query) const override;

 private:
  std::string name_;
  std::size_t dim_;
  Encoder encoder_;
  double latent_gain_;
};

// Placeholder for an out-of-process model runtime that was not compiled in.
// Every call throws a non-retriable BackendError.
class UnavailableDenoiser final : public DenoiserBackend {
 public:
  explicit UnavailableDenoiser(std::string runtime) : runtime_(std::move(runtime)) {}
  std::string name() const override { return runtime_; }
  std::size_t embedding_dim() const override;
  std::size_t latent_size() const override;
  int terminal_step() const override;
  TextEmbedding encode_text(std::string_view text) const override;

 protected:
  std::vector<double> do_predict_noise(const NoiseQuery& query) const override;

 private:
  [[noreturn]] void fail() const;
  std::string runtime_;
};

// Planted-maximizer landscape over words^n: the planted prompt scores `peak`;
// every other text scores below 1, rising with positional agreement with the
// planted prompt plus a hashed jitter.
struct PlantedSpace {
  std::vector<std::string> words;
  std::vector<std::string> planted;
  double peak = 10.0;
  std::uint64_t seed = 0;
};

std::function<double(std::string_view)> planted_energy(const PlantedSpace& space);

// Proposal scores looked up from a table, optionally per position. Tokens
// absent from the table score 0.
class TableProposalModel final : public ProposalModel {
 public:
  TableProposalModel(std::shared_ptr<const Vocabulary> vocab, std::map<std::string, double> scores);
  TableProposalModel(std::shared_ptr<const Vocabulary> vocab,
                     std::vector<std::map<std::string, double>> per_position);

  // Every regular token scores the same.
  static std::shared_ptr<TableProposalModel> uniform(std::shared_ptr<const Vocabulary> vocab);

  const Vocabulary& vocabulary() const override { return *vocab_; }

 protected:
  std::vector<TokenProposal> score_tokens(const PromptState& masked_context,
                                          std::size_t masked_index) const override;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<std::map<std::string, double>> tables_;
};

struct MockGeneratorConfig {
  // Trigger text -> the image it reproduces.
  std::map<std::string, ImageBytes> memorized;
  // Probability that an exact trigger reproduces its image.
  double memorization_rate = 1.0;
  // Each word beyond the trigger's words multiplies the probability by this.
  double extra_word_decay = 0.5;
  std::size_t image_bytes = 64;
  // When > 0, every fail_every-th image of a request fails.
  int fail_every = 0;
};

// A trigger matches a prompt when its words appear, in order, as a
// subsequence of the prompt's words. Memorized draws return the stored bytes
// verbatim; all other draws return bytes hashed from (prompt, seed, config).
class MockImageGenerator final : public ImageGenerator {
 public:
  MockImageGenerator(std::shared_ptr<ImageStore> store, MockGeneratorConfig config);
  std::string name() const override { return "mock-generator"; }
  GenerationResult generate_images(const GenerationRequest& request) const override;

 private:
  std::shared_ptr<ImageStore> store_;
  MockGeneratorConfig config_;
};

// Deterministic bytes for a synthetic "memorized" training image.
ImageBytes synthetic_image(std::string_view label, std::size_t size = 64);

// Bytes -> seeded Gaussian vector -> unit vector. Identical bytes give
// identical embeddings; distinct bytes give nearly orthogonal ones.
class HashEmbedder final : public ImageEmbedder {
 public:
  HashEmbedder(std::shared_ptr<const ImageStore> store, std::size_t dim = 128);
  std::string name() const override { return "hash-embedder"; }
  EmbeddingVector embed_image(const ImageRef& image, EmbeddingKind kind) const override;

 private:
  std::shared_ptr<const ImageStore> store_;
  std::size_t dim_;
};

class ConstantAlignmentScorer final : public AlignmentScorer {
 public:
  explicit ConstantAlignmentScorer(double value) : value_(value) {}
  std::string name() const override { return "constant-alignment"; }
  double score_alignment(std::string_view, const ImageRef&) const override { return value_; }

 private:
  double value_;
};

class ConstantAestheticScorer final : public AestheticScorer {
 public:
  explicit ConstantAestheticScorer(double value) : value_(value) {}
  std::string name() const override { return "constant-aesthetic"; }
  double score_aesthetic(const ImageRef&) const override { return value_; }

 private:
  double value_;
};

// Matches keyed by image id. With available=false every lookup throws a
// retriable BackendError.
class TableWebMatchProvider final : public WebMatchProvider {
 public:
  explicit TableWebMatchProvider(std::map<std::string, std::vector<WebMatch>> matches, bool available = true)
      : matches_(std::move(matches)), available_(available) {}
  std::string name() const override { return "table-web-match"; }
  std::vector<WebMatch> find_matches(std::span<const std::uint8_t> image_bytes) const override;

 private:
  std::map<std::string, std::vector<WebMatch>> matches_;
  bool available_;
};

}  // namespace memaudit
