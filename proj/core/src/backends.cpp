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

#include "memaudit/backends.hpp"

#include <algorithm>
#include <cmath>

#include "memaudit/error.hpp"

namespace memaudit {

std::string_view to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::copy_detection: return "copy_detection";
    case EmbeddingKind::alignment_image: return "alignment_image";
    case EmbeddingKind::alignment_text: return "alignment_text";
  }
  return "unknown";
}

EmbeddingVector make_embedding(std::vector<double> values, EmbeddingKind kind) {
  double sq = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw ContractError("embedding has a non-finite entry");
    sq += v * v;
  }
  if (sq <= 0.0) throw ContractError("cannot normalize a zero embedding");
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : values) v *= inv;
  return EmbeddingVector{std::move(values), kind};
}

std::vector<double> DenoiserBackend::predict_noise(const NoiseQuery& query) const {
  if (query.prompt_embedding == nullptr) throw ContractError("noise query without a prompt embedding");
  if (query.prompt_embedding->vector.size() != embedding_dim())
    throw ContractError("embedding dimension " + std::to_string(query.prompt_embedding->vector.size()) +
                        " does not match backend dimension " + std::to_string(embedding_dim()));
  if (query.timestep != terminal_step())
    throw ContractError("noise query timestep " + std::to_string(query.timestep) +
                        " is not the terminal step " + std::to_string(terminal_step()));
  auto out = do_predict_noise(query);
  if (out.size() != latent_size()) throw BackendError("backend returned a tensor of the wrong size");
  return out;
}

std::vector<std::vector<double>> DenoiserBackend::predict_noise_batch(std::span<const NoiseQuery> queries) const {
  std::vector<std::vector<double>> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(predict_noise(q));
  return out;
}

const TextEmbedding& DenoiserBackend::empty_embedding() const {
  std::call_once(empty_once_, [this] { empty_ = encode_text(""); });
  return empty_;
}

std::vector<TokenProposal> ProposalModel::propose_tokens(const PromptState& context, std::size_t masked_index,
                                                         std::size_t q) const {
  if (masked_index >= context.length()) throw ContractError("masked index out of range");
  if (q == 0) throw ContractError("proposal count must be at least 1");
  const Vocabulary& vocab = vocabulary();
  auto scored = score_tokens(mask_at(context, masked_index, vocab), masked_index);
  std::erase_if(scored, [&](const TokenProposal& t) { return !vocab.is_regular(t.token); });
  std::ranges::sort(scored, [](const TokenProposal& a, const TokenProposal& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  std::vector<bool> seen(vocab.tokens().size(), false);
  std::erase_if(scored, [&](const TokenProposal& t) {
    const auto slot = static_cast<std::size_t>(t.token);
    if (seen[slot]) return true;
    seen[slot] = true;
    return false;
  });
  if (scored.size() > q) scored.resize(q);
  return scored;
}

}  // namespace memaudit
