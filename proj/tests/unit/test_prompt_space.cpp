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

#include "memaudit/error.hpp"
#include "memaudit/prompt_space.hpp"

using namespace memaudit;

namespace {

Vocabulary abc() { return Vocabulary({"a", "b", "c", "x"}); }

PromptState state_of(const Vocabulary& v, std::initializer_list<const char*> words) {
  std::vector<TokenId> ids;
  for (const char* w : words) ids.push_back(*v.find(w));
  return PromptState(ids);
}

}  // namespace

TEST(Vocabulary, SpecialsFollowRegularTokens) {
  const auto v = abc();
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.mask_id(), 4);
  EXPECT_EQ(v.pad_id(), 5);
  EXPECT_TRUE(v.is_special(v.mask_id()));
  EXPECT_FALSE(v.is_regular(v.pad_id()));
  EXPECT_TRUE(v.is_regular(0));
  EXPECT_FALSE(v.contains(6));
  EXPECT_EQ(v.token(v.mask_id()), "[MASK]");
  EXPECT_EQ(v.regular_ids().size(), 4u);
}

TEST(Vocabulary, RejectsDegenerateInput) {
  EXPECT_THROW(Vocabulary({"only"}), ContractError);
  EXPECT_THROW(Vocabulary({"a", "two words"}), ContractError);
  EXPECT_THROW(Vocabulary({"a", ""}), ContractError);
  // Duplicates collapse.
  EXPECT_EQ(Vocabulary({"a", "b", "a"}).size(), 2u);
}

TEST(Vocabulary, WordPieceTokenizeAndDetokenize) {
  Vocabulary v({"un", "##believ", "##able", "cat", "un##"});
  const auto ids = v.tokenize("unbelievable cat");
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(v.token(ids[0]), "un");
  EXPECT_EQ(v.token(ids[1]), "##believ");
  EXPECT_EQ(v.detokenize(ids), "unbelievable cat");
  EXPECT_THROW(v.tokenize("dog"), ContractError);
}

TEST(MaskedPrior, AllMasks) {
  const auto v = abc();
  const auto p3 = make_masked_prior(3, v);
  ASSERT_EQ(p3.length(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(p3[i], v.mask_id());
  EXPECT_EQ(make_masked_prior(1, v).length(), 1u);
  EXPECT_THROW(make_masked_prior(0, v), ContractError);
}

TEST(MaskedPrior, RenderedPriorRetokenizesToMasks) {
  const auto v = abc();
  const auto p2 = make_masked_prior(2, v);
  const auto ids = v.tokenize(p2.render(v));
  EXPECT_EQ(ids, (std::vector<TokenId>{v.mask_id(), v.mask_id()}));
  EXPECT_EQ(p2.mask_positions(v), (std::vector<std::size_t>{0, 1}));
}

TEST(Substitute, ReplacesOnePosition) {
  const auto v = abc();
  const auto p = state_of(v, {"a", "b", "c"});
  const auto q = substitute(p, 1, *v.find("x"), v);
  EXPECT_EQ(q, state_of(v, {"a", "x", "c"}));
  EXPECT_EQ(substitute(p, 1, p[1], v), p);
  for (std::size_t i : {0u, 2u}) EXPECT_EQ(p[i], q[i]);
}

TEST(Substitute, GuardsPositionAndSpecials) {
  const auto v = abc();
  const auto p = state_of(v, {"a", "b"});
  EXPECT_THROW(substitute(p, 2, 0, v), ContractError);
  EXPECT_THROW(substitute(p, 0, v.mask_id(), v), ContractError);
  EXPECT_THROW(substitute(p, 0, 99, v), ContractError);
}

TEST(Render, DropsSpecialsOnRequest) {
  const auto v = abc();
  const auto p = mask_at(state_of(v, {"a", "b", "c"}), 1, v);
  EXPECT_EQ(p.render(v), "a [MASK] c");
  EXPECT_EQ(render_without_specials(p, v), "a c");
  EXPECT_TRUE(p.has_special(v));
}

TEST(SplitWords, CollapsesWhitespace) {
  EXPECT_EQ(split_words("  a\tb \n c  "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(split_words("   ").empty());
}

TEST(PromptState, HashAgreesWithEquality) {
  const auto v = abc();
  PromptStateHash h;
  EXPECT_EQ(h(state_of(v, {"a", "b"})), h(state_of(v, {"a", "b"})));
  EXPECT_NE(h(state_of(v, {"a", "b"})), h(state_of(v, {"b", "a"})));
}
