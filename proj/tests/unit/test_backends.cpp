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

#include "memaudit/error.hpp"
#include "memaudit/mock_backends.hpp"
#include "memaudit/verify.hpp"

using namespace memaudit;

namespace {

std::shared_ptr<const Vocabulary> vocab_abc() {
  return std::make_shared<const Vocabulary>(std::vector<std::string>{"tok_a", "tok_b", "tok_c"});
}

}  // namespace

TEST(LinearMock, QueryReturnsEmbeddingIgnoringLatent) {
  auto m = LinearMockDenoiser::bag_of_words({"a", "b"});
  const auto f = m->encode_text("a");
  const auto e0 = m->predict_noise({0, &f, m->terminal_step()});
  const auto e1 = m->predict_noise({12345, &f, m->terminal_step()});
  EXPECT_EQ(e0, f.vector);
  EXPECT_EQ(e0, e1);
}

TEST(LinearMock, BagOfWordsCounts) {
  auto m = LinearMockDenoiser::bag_of_words({"a", "b"});
  EXPECT_EQ(m->encode_text("a a").vector, (std::vector<double>{2.0, 0.0}));
  EXPECT_EQ(m->encode_text("").vector, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(m->empty_embedding().vector, m->encode_text("").vector);
  const auto v = m->encode_text("zzz b");
  EXPECT_EQ(v.vector.size(), m->embedding_dim());
  for (double x : v.vector) EXPECT_TRUE(std::isfinite(x));
}

TEST(LinearMock, TruncatesLongTexts) {
  auto m = LinearMockDenoiser::bag_of_words({"a"}, 3);
  EXPECT_EQ(m->encode_text("a a a a a").vector, (std::vector<double>{3.0}));
}

TEST(LinearMock, LatentGainMakesSeedsMatter) {
  auto m = LinearMockDenoiser::bag_of_words({"a", "b"}, 77, 0.5);
  const auto f = m->encode_text("a");
  EXPECT_NE(m->predict_noise({1, &f, 999}), m->predict_noise({2, &f, 999}));
  EXPECT_EQ(m->predict_noise({1, &f, 999}), m->predict_noise({1, &f, 999}));
}

TEST(DenoiserBackend, ValidatesQueries) {
  auto m = LinearMockDenoiser::bag_of_words({"a", "b"});
  const auto f = m->encode_text("a");
  EXPECT_THROW(m->predict_noise({0, nullptr, 999}), ContractError);
  EXPECT_THROW(m->predict_noise({0, &f, 10}), ContractError);
  TextEmbedding wrong{{1.0, 2.0, 3.0}, "x"};
  EXPECT_THROW(m->predict_noise({0, &wrong, 999}), ContractError);
}

TEST(UnavailableDenoiser, EveryCallFails) {
  UnavailableDenoiser d("onnx");
  EXPECT_THROW(d.encode_text("a"), BackendError);
  EXPECT_THROW(d.embedding_dim(), BackendError);
}

TEST(ProposalModel, TopQFromTable) {
  TableProposalModel m(vocab_abc(), std::map<std::string, double>{{"tok_a", 0.5}, {"tok_b", 0.3}, {"tok_c", 0.2}});
  const PromptState ctx({0, 1});
  auto top2 = m.propose_tokens(ctx, 0, 2);
  ASSERT_EQ(top2.size(), 2u);
  EXPECT_EQ(top2[0].token, 0);
  EXPECT_EQ(top2[1].token, 1);
  EXPECT_EQ(m.propose_tokens(ctx, 0, 1).size(), 1u);
  EXPECT_EQ(m.propose_tokens(ctx, 0, 1)[0].token, 0);
  EXPECT_EQ(m.propose_tokens(ctx, 0, 3).size(), 3u);
  EXPECT_EQ(m.propose_tokens(ctx, 0, 50).size(), 3u);
}

TEST(ProposalModel, TiesBreakByTokenIdAndSpecialsNeverProposed) {
  auto m = TableProposalModel::uniform(vocab_abc());
  const auto all = m->propose_tokens(PromptState({2, 2}), 1, 10);
  ASSERT_EQ(all.size(), 3u);
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i].token, static_cast<TokenId>(i));
  EXPECT_THROW(m->propose_tokens(PromptState({2, 2}), 2, 1), ContractError);
  EXPECT_THROW(m->propose_tokens(PromptState({2, 2}), 0, 0), ContractError);
}

TEST(ProposalModel, PerPositionTables) {
  TableProposalModel m(vocab_abc(), std::vector<std::map<std::string, double>>{{{"tok_c", 1.0}}, {{"tok_b", 1.0}}});
  EXPECT_EQ(m.propose_tokens(PromptState({0, 0}), 0, 1)[0].token, 2);
  EXPECT_EQ(m.propose_tokens(PromptState({0, 0}), 1, 1)[0].token, 1);
}

TEST(PlantedEnergy, PeakIsUniqueAndOthersStayBelowOne) {
  PlantedSpace s{{"a", "b", "c", "d"}, {"c", "a"}, 10.0, 3};
  auto e = planted_energy(s);
  EXPECT_EQ(e(""), 0.0);
  EXPECT_EQ(e("c a"), 10.0);
  for (const char* x : {"a", "b", "c", "d"})
    for (const char* y : {"a", "b", "c", "d"}) {
      const std::string t = std::string(x) + " " + y;
      if (t == "c a") continue;
      EXPECT_LT(e(t), 1.0) << t;
      EXPECT_GE(e(t), 0.0) << t;
    }
}

TEST(MockGenerator, TriggerReproducesStoredBytes) {
  auto store = std::make_shared<InMemoryImageStore>();
  MockGeneratorConfig cfg;
  cfg.memorized["red barn"] = synthetic_image("barn");
  MockImageGenerator gen(store, cfg);
  GenerationRequest req;
  req.prompt = "red barn";
  req.image_count = 4;
  req.seed = 5;
  const auto r = gen.generate_images(req);
  ASSERT_EQ(r.images.size(), 4u);
  for (const auto& img : r.images) EXPECT_EQ(*store->get(img), synthetic_image("barn"));

  req.prompt = "blue house";
  const auto other = gen.generate_images(req);
  for (const auto& img : other.images) EXPECT_NE(*store->get(img), synthetic_image("barn"));
  EXPECT_EQ(gen.generate_images(req).images, other.images);
}

TEST(MockGenerator, ExtraWordsDecayMemorization) {
  auto store = std::make_shared<InMemoryImageStore>();
  MockGeneratorConfig cfg;
  cfg.memorized["red barn"] = synthetic_image("barn");
  cfg.extra_word_decay = 0.0;
  MockImageGenerator gen(store, cfg);
  GenerationRequest req;
  req.prompt = "red 17 barn";
  req.image_count = 8;
  for (const auto& img : gen.generate_images(req).images) EXPECT_NE(*store->get(img), synthetic_image("barn"));
}

TEST(MockGenerator, FailuresAreCounted) {
  auto store = std::make_shared<InMemoryImageStore>();
  MockGeneratorConfig cfg;
  cfg.fail_every = 2;
  MockImageGenerator gen(store, cfg);
  GenerationRequest req;
  req.prompt = "x";
  req.image_count = 4;
  const auto r = gen.generate_images(req);
  EXPECT_EQ(r.failed, 2);
  EXPECT_EQ(r.images.size(), 2u);
}

TEST(HashEmbedder, IdenticalImagesIdenticalVectors) {
  auto store = std::make_shared<InMemoryImageStore>();
  const auto a = store->put(synthetic_image("a"));
  const auto b = store->put(synthetic_image("b"));
  HashEmbedder emb(store, 256);
  const auto ea = emb.embed_image(a, EmbeddingKind::copy_detection);
  EXPECT_EQ(ea.values, emb.embed_image(a, EmbeddingKind::copy_detection).values);
  EXPECT_NEAR(similarity(ea, ea), 1.0, 1e-12);
  EXPECT_LT(std::abs(similarity(ea, emb.embed_image(b, EmbeddingKind::copy_detection))), 0.35);
  EXPECT_THROW(emb.embed_image(ImageRef{"ffff"}, EmbeddingKind::copy_detection), Error);
}

TEST(ConstantScorers, ReturnTheirValue) {
  ConstantAestheticScorer aes(5.0);
  ConstantAlignmentScorer clip(0.3);
  EXPECT_EQ(aes.score_aesthetic(ImageRef{"00"}), 5.0);
  EXPECT_EQ(clip.score_alignment("x", ImageRef{"00"}), 0.3);
}

TEST(Embedding, NormalizesAndRejectsZero) {
  const auto e = make_embedding({3.0, 4.0}, EmbeddingKind::copy_detection);
  EXPECT_DOUBLE_EQ(e.values[0], 0.6);
  EXPECT_DOUBLE_EQ(e.values[1], 0.8);
  EXPECT_THROW(make_embedding({0.0, 0.0}, EmbeddingKind::copy_detection), ContractError);
  EXPECT_THROW(make_embedding({NAN, 1.0}, EmbeddingKind::copy_detection), ContractError);
}

TEST(WebMatchProvider, TableLookupAndOutage) {
  const auto bytes = synthetic_image("a");
  const auto id = make_image_ref(bytes).id;
  TableWebMatchProvider up({{id, {WebMatch{"https://x/a", "https://x/a.jpg", 0.9}}}});
  ASSERT_EQ(up.find_matches(bytes).size(), 1u);
  EXPECT_TRUE(up.find_matches(synthetic_image("b")).empty());
  TableWebMatchProvider down({}, false);
  try {
    down.find_matches(bytes);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_TRUE(e.retriable());
  }
}
