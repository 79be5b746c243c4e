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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace memaudit {

using TokenId = std::int32_t;

inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kContinuationMarker = "##";

// The finite word set searched over. Regular tokens take ids [0, size());
// the mask and padding specials are appended after them and are never
// eligible for substitution.
class Vocabulary {
 public:
  // Requires at least two distinct regular tokens. "[MASK]"/"[PAD]" in the
  // input are treated as the specials, not as regular words.
  explicit Vocabulary(std::vector<std::string> tokens);

  // Number of regular (substitutable) tokens, m.
  std::size_t size() const noexcept { return regular_count_; }
  TokenId mask_id() const noexcept { return mask_id_; }
  TokenId pad_id() const noexcept { return pad_id_; }
  bool is_special(TokenId id) const noexcept { return id == mask_id_ || id == pad_id_; }
  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }
  bool is_regular(TokenId id) const noexcept { return contains(id) && !is_special(id); }

  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;

  // Ids of the regular tokens in ascending order.
  std::span<const TokenId> regular_ids() const noexcept { return regular_ids_; }
  std::span<const std::string> tokens() const noexcept { return tokens_; }

  // Greedy longest-match-first word-piece tokenization. Throws ContractError
  // if some word cannot be covered by the vocabulary.
  std::vector<TokenId> tokenize(std::string_view text) const;

  // Joins tokens with single spaces; a token starting with "##" is glued to
  // its predecessor with the marker stripped.
  std::string detokenize(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<TokenId> regular_ids_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t regular_count_ = 0;
  TokenId mask_id_ = -1;
  TokenId pad_id_ = -1;
};

// A point of the search space W^n. Immutable value type.
class PromptState {
 public:
  PromptState() = default;
  explicit PromptState(std::vector<TokenId> tokens) : tokens_(std::move(tokens)) {}

  std::size_t length() const noexcept { return tokens_.size(); }
  TokenId operator[](std::size_t i) const { return tokens_.at(i); }
  std::span<const TokenId> tokens() const noexcept { return tokens_; }

  std::vector<std::size_t> mask_positions(const Vocabulary& vocab) const;
  bool has_special(const Vocabulary& vocab) const;
  std::string render(const Vocabulary& vocab) const { return vocab.detokenize(tokens_); }

  friend bool operator==(const PromptState&, const PromptState&) = default;
  friend auto operator<=>(const PromptState&, const PromptState&) = default;

 private:
  std::vector<TokenId> tokens_;
};

struct PromptStateHash {
  std::size_t operator()(const PromptState& p) const noexcept;
};

// n copies of the mask token.
PromptState make_masked_prior(std::size_t n, const Vocabulary& vocab);

// Returns p with position i replaced by a regular token. Throws ContractError
// on an out-of-range index or a special/unknown token.
PromptState substitute(const PromptState& p, std::size_t i, TokenId token, const Vocabulary& vocab);

// Returns p with position i replaced by the mask token (proposal context).
PromptState mask_at(const PromptState& p, std::size_t i, const Vocabulary& vocab);

// Renders p with every special token dropped. Used to score partially
// masked states while a masked prior is being filled in.
std::string render_without_specials(const PromptState& p, const Vocabulary& vocab);

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_words(std::string_view text);

}  // namespace memaudit
