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

#include "memaudit/prompt_space.hpp"

#include <algorithm>

#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"

namespace memaudit {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_continuation(std::string_view token) { return token.starts_with(kContinuationMarker); }

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  for (auto& t : tokens) {
    if (t == kMaskToken || t == kPadToken) continue;
    if (t.empty()) throw ContractError("vocabulary tokens must be non-empty");
    if (t.find_first_of(" \t\r\n") != std::string::npos)
      throw ContractError("vocabulary token contains whitespace: '" + t + "'");
    if (index_.contains(t)) continue;
    const auto id = static_cast<TokenId>(tokens_.size());
    index_.emplace(t, id);
    tokens_.push_back(std::move(t));
    regular_ids_.push_back(id);
  }
  regular_count_ = tokens_.size();
  if (regular_count_ < 2) throw ContractError("vocabulary needs at least two regular tokens");
  mask_id_ = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(kMaskToken);
  index_.emplace(std::string(kMaskToken), mask_id_);
  pad_id_ = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(kPadToken);
  index_.emplace(std::string(kPadToken), pad_id_);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) throw ContractError("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& word : split_words(text)) {
    if (auto whole = find(word)) {
      ids.push_back(*whole);
      continue;
    }
    std::size_t start = 0;
    while (start < word.size()) {
      std::optional<TokenId> match;
      std::size_t end = word.size();
      for (; end > start; --end) {
        std::string piece = word.substr(start, end - start);
        if (start > 0) piece.insert(0, kContinuationMarker);
        if (auto id = find(piece); id && !is_special(*id)) {
          match = id;
          break;
        }
      }
      if (!match) throw ContractError("cannot tokenize '" + word + "' with this vocabulary");
      ids.push_back(*match);
      start = end;
    }
  }
  return ids;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    const std::string& t = token(id);
    if (is_continuation(t) && !out.empty()) {
      out.append(t, kContinuationMarker.size());
    } else {
      if (!out.empty()) out.push_back(' ');
      out.append(t);
    }
  }
  return out;
}

std::vector<std::size_t> PromptState::mask_positions(const Vocabulary& vocab) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i] == vocab.mask_id()) out.push_back(i);
  return out;
}

bool PromptState::has_special(const Vocabulary& vocab) const {
  return std::ranges::any_of(tokens_, [&](TokenId t) { return vocab.is_special(t); });
}

std::size_t PromptStateHash::operator()(const PromptState& p) const noexcept {
  std::uint64_t h = kFnvOffset;
  for (TokenId t : p.tokens()) h = splitmix64(h ^ static_cast<std::uint32_t>(t));
  return static_cast<std::size_t>(h);
}

PromptState make_masked_prior(std::size_t n, const Vocabulary& vocab) {
  if (n == 0) throw ContractError("prompt length must be at least 1");
  return PromptState(std::vector<TokenId>(n, vocab.mask_id()));
}

PromptState substitute(const PromptState& p, std::size_t i, TokenId token, const Vocabulary& vocab) {
  if (i >= p.length())
    throw ContractError("substitute index " + std::to_string(i) + " out of range for length " +
                        std::to_string(p.length()));
  if (!vocab.is_regular(token))
    throw ContractError("substitute requires a regular token, got id " + std::to_string(token));
  std::vector<TokenId> tokens(p.tokens().begin(), p.tokens().end());
  tokens[i] = token;
  return PromptState(std::move(tokens));
}

PromptState mask_at(const PromptState& p, std::size_t i, const Vocabulary& vocab) {
  if (i >= p.length()) throw ContractError("mask index out of range");
  std::vector<TokenId> tokens(p.tokens().begin(), p.tokens().end());
  tokens[i] = vocab.mask_id();
  return PromptState(std::move(tokens));
}

std::string render_without_specials(const PromptState& p, const Vocabulary& vocab) {
  std::vector<TokenId> kept;
  kept.reserve(p.length());
  for (TokenId t : p.tokens())
    if (!vocab.is_special(t)) kept.push_back(t);
  return vocab.detokenize(kept);
}

}  // namespace memaudit
