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

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "memaudit/image_store.hpp"
#include "memaudit/store.hpp"

namespace memaudit {

struct ReviewServiceConfig {
  std::string allowed_origin = "*";
  std::optional<std::string> token;  // when set, X-Review-Token must match
  std::size_t default_page_size = 50;
  std::size_t max_page_size = 500;
};

struct ApiRequest {
  std::string method;
  std::string path;  // without the query string
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // keys lower-case
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

// Transport-free request handler. Every response is a pure function of the
// files under the layout and the decision log; the only write is a decision
// append.
class ReviewApi {
 public:
  ReviewApi(StoreLayout layout, ReviewServiceConfig cfg = {});

  ApiResponse handle(const ApiRequest& request);

  ReviewQueue& queue() noexcept { return queue_; }

 private:
  ApiResponse list_candidates(const ApiRequest& request) const;
  ApiResponse get_candidate(std::string_view id) const;
  ApiResponse post_decision(std::string_view id, const ApiRequest& request);
  ApiResponse get_image(std::string_view id, const ApiRequest& request) const;
  std::optional<ImageBytes> find_image(std::string_view id) const;
  void add_cors(ApiResponse& response) const;

  ReviewQueue queue_;
  ReviewServiceConfig cfg_;
  FileImageStore images_;
  std::mutex write_mu_;
};

class ReviewServer {
 public:
  ReviewServer(StoreLayout layout, ReviewServiceConfig cfg = {});
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Blocks until stop(). Returns false if the socket could not be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it (or -1); serve with listen_after_bind.
  int bind_any(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace memaudit
