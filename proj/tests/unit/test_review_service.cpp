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

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "../support/temp_dir.hpp"
#include "memaudit/mock_backends.hpp"
#include "memaudit/review_service.hpp"

using namespace memaudit;
using namespace memaudit::test_support;
using nlohmann::json;

namespace {

struct QueueFixture : ::testing::Test {
  TempDir dir;
  StoreLayout layout{dir.path()};
  std::string image_id;

  CandidateMeta add(std::string prompt, double d_theta) {
    CandidateMeta m;
    m.id = candidate_id_for("m", prompt);
    m.prompt = std::move(prompt);
    m.model_id = "m";
    m.d_theta = d_theta;
    m.cluster_size = 30;
    m.representatives = {image_id};
    ReviewQueue(layout).write(m);
    return m;
  }

  void SetUp() override {
    const auto bytes = synthetic_image("castle");
    FileImageStore store(layout.image_store_dir());
    image_id = store.put(bytes).id;
  }

  static ApiRequest get(std::string path, std::map<std::string, std::string> query = {}) {
    return {"GET", std::move(path), std::move(query), {}, ""};
  }
  static ApiRequest post(std::string path, const json& body) {
    return {"POST", std::move(path), {}, {{"content-type", "application/json"}}, body.dump()};
  }
};

}  // namespace

TEST_F(QueueFixture, AcceptMovesCandidateToVerified) {
  const auto c = add("old castle", 3.0);
  ReviewApi api(layout);
  auto r = api.handle(post("/api/candidates/" + c.id + "/decision",
                           {{"decision", "accept"}, {"reviewer", "ann"}, {"matched_source_url", "https://src/1"}}));
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["status"], "verified");
  EXPECT_EQ(j["seq"], 1);

  const auto pending = json::parse(api.handle(get("/api/candidates")).body);
  EXPECT_EQ(pending["total"], 0);
  const auto verified = json::parse(api.handle(get("/api/candidates", {{"status", "verified"}})).body);
  ASSERT_EQ(verified["total"], 1);
  EXPECT_EQ(verified["items"][0]["id"], c.id);
}

TEST_F(QueueFixture, AcceptWithoutUrlIs422) {
  const auto c = add("old castle", 3.0);
  ReviewApi api(layout);
  const auto r = api.handle(post("/api/candidates/" + c.id + "/decision", {{"decision", "accept"}, {"reviewer", "a"}}));
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(json::parse(r.body).contains("error"));
  EXPECT_EQ(api.handle(post("/api/candidates/" + c.id + "/decision", {{"decision", "maybe"}, {"reviewer", "a"}})).status,
            422);
  ApiRequest bad = post("/api/candidates/" + c.id + "/decision", {});
  bad.body = "{oops";
  EXPECT_EQ(api.handle(bad).status, 422);
  EXPECT_TRUE(ReviewQueue(layout).log().read().empty());
}

TEST_F(QueueFixture, LatestDecisionWinsAndStaleWritesConflict) {
  const auto c = add("old castle", 3.0);
  ReviewApi api(layout);
  const std::string path = "/api/candidates/" + c.id + "/decision";
  ASSERT_EQ(api.handle(post(path, {{"decision", "accept"}, {"reviewer", "a"}, {"matched_source_url", "u"}})).status,
            200);
  const auto stale = api.handle(post(path, {{"decision", "reject"}, {"reviewer", "b"}}));
  EXPECT_EQ(stale.status, 409);
  EXPECT_EQ(json::parse(stale.body)["latest_seq"], 1);

  ASSERT_EQ(api.handle(post(path, {{"decision", "reject"}, {"reviewer", "b"}, {"base_seq", 1}})).status, 200);
  EXPECT_EQ(api.handle(post(path, {{"decision", "accept"}, {"reviewer", "c"}, {"matched_source_url", "u"},
                                   {"base_seq", 1}}))
                .status,
            409);
  const auto forced =
      api.handle(post(path, {{"decision", "reject"}, {"reviewer", "c"}, {"force", true}}));
  EXPECT_EQ(forced.status, 200);

  const auto detail = json::parse(api.handle(get("/api/candidates/" + c.id)).body);
  EXPECT_EQ(detail["status"], "rejected");
  EXPECT_EQ(detail["latest_seq"], 3);
  EXPECT_EQ(detail["history"].size(), 3u);
  EXPECT_EQ(detail["candidate"]["prompt"], "old castle");
}

TEST_F(QueueFixture, UnknownCandidateAndPaths) {
  add("old castle", 3.0);
  ReviewApi api(layout);
  EXPECT_EQ(api.handle(get("/api/candidates/cdeadbeef")).status, 404);
  EXPECT_EQ(api.handle(post("/api/candidates/cdeadbeef/decision", {{"decision", "reject"}, {"reviewer", "a"}})).status,
            404);
  EXPECT_EQ(api.handle(get("/api/other")).status, 404);
  EXPECT_EQ(api.handle(post("/api/candidates", json::object())).status, 405);
  EXPECT_EQ(api.handle(get("/api/candidates", {{"status", "weird"}})).status, 422);
  EXPECT_EQ(api.handle(get("/api/candidates", {{"page", "0"}})).status, 422);
  EXPECT_EQ(api.handle(get("/api/candidates", {{"page_size", "100000"}})).status, 422);
}

TEST_F(QueueFixture, ListingIsSortedAndPaginated) {
  for (int k = 0; k < 7; ++k) add("prompt " + std::to_string(k), static_cast<double>(k));
  ReviewApi api(layout);
  const auto p1 = json::parse(api.handle(get("/api/candidates", {{"page_size", "3"}})).body);
  EXPECT_EQ(p1["total"], 7);
  ASSERT_EQ(p1["items"].size(), 3u);
  EXPECT_EQ(p1["items"][0]["prompt"], "prompt 6");
  EXPECT_EQ(p1["items"][0]["thumbnails"][0], "/api/images/" + image_id);
  const auto p3 = json::parse(api.handle(get("/api/candidates", {{"page_size", "3"}, {"page", "3"}})).body);
  ASSERT_EQ(p3["items"].size(), 1u);
  EXPECT_EQ(p3["items"][0]["prompt"], "prompt 0");
  const auto p4 = json::parse(api.handle(get("/api/candidates", {{"page_size", "3"}, {"page", "4"}})).body);
  EXPECT_TRUE(p4["items"].empty());
}

TEST_F(QueueFixture, ImagesAreCacheable) {
  add("old castle", 3.0);
  ReviewApi api(layout);
  const auto r = api.handle(get("/api/images/" + image_id));
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.size(), synthetic_image("castle").size());
  EXPECT_EQ(r.headers.at("ETag"), "\"" + image_id + "\"");
  EXPECT_NE(r.headers.at("Cache-Control").find("immutable"), std::string::npos);
  auto cond = get("/api/images/" + image_id);
  cond.headers["if-none-match"] = "\"" + image_id + "\"";
  const auto not_modified = api.handle(cond);
  EXPECT_EQ(not_modified.status, 304);
  EXPECT_TRUE(not_modified.body.empty());
  EXPECT_EQ(api.handle(get("/api/images/zz")).status, 404);
  EXPECT_EQ(api.handle(get("/api/images/" + std::string(64, 'a'))).status, 404);
}

TEST_F(QueueFixture, QueueDirImageFallback) {
  const auto c = add("old castle", 3.0);
  const auto other = synthetic_image("river");
  const auto id = make_image_ref(other).id;
  write_file_bytes(layout.candidate_dir(c.id) / (id + ".img"), other);
  auto meta = c;
  meta.representatives.push_back(id);
  ReviewQueue(layout).write(meta);
  ReviewApi api(layout);
  EXPECT_EQ(api.handle(get("/api/images/" + id)).status, 200);
}

TEST_F(QueueFixture, CorsAndToken) {
  add("old castle", 3.0);
  ReviewApi api(layout, ReviewServiceConfig{"http://localhost:5173", "s3cret", 50, 500});
  const auto pre = api.handle({"OPTIONS", "/api/candidates", {}, {}, ""});
  EXPECT_EQ(pre.status, 204);
  EXPECT_EQ(pre.headers.at("Access-Control-Allow-Origin"), "http://localhost:5173");
  const auto denied = api.handle(get("/api/candidates"));
  EXPECT_EQ(denied.status, 401);
  EXPECT_TRUE(denied.headers.contains("Access-Control-Allow-Origin"));
  auto ok = get("/api/candidates");
  ok.headers["x-review-token"] = "s3cret";
  EXPECT_EQ(api.handle(ok).status, 200);
}

TEST_F(QueueFixture, ServesOverHttp) {
  const auto c = add("old castle", 3.0);
  ReviewServer server(layout);
  const int port = server.bind_any("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto list = client.Get("/api/candidates?status=all");
  ASSERT_TRUE(list);
  EXPECT_EQ(list->status, 200);
  EXPECT_EQ(json::parse(list->body)["total"], 1);
  const json body{{"decision", "reject"}, {"reviewer", "r"}};
  auto posted = client.Post("/api/candidates/" + c.id + "/decision", body.dump(), "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 200);
  EXPECT_EQ(posted->get_header_value("Access-Control-Allow-Origin"), "*");
  server.stop();
  t.join();
}
