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

#include "memaudit/review_service.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "memaudit/error.hpp"

namespace memaudit {

using nlohmann::ordered_json;

namespace {

ApiResponse json_response(int status, const ordered_json& body) {
  ApiResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

ApiResponse error_response(int status, std::string message) {
  return json_response(status, ordered_json{{"error", std::move(message)}});
}

std::optional<std::size_t> parse_size(const std::string& text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::string status_label(PromptStatus s) { return s == PromptStatus::candidate ? "pending" : std::string(to_string(s)); }

ordered_json decision_json(const DecisionRecord& d) { return ordered_json::parse(to_json_line(d)); }

std::string sniff_content_type(const ImageBytes& bytes) {
  static constexpr std::uint8_t png[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(png, png + 4, bytes.begin())) return "image/png";
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return "image/jpeg";
  return "application/octet-stream";
}

}  // namespace

ReviewApi::ReviewApi(StoreLayout layout, ReviewServiceConfig cfg)
    : queue_(layout), cfg_(std::move(cfg)), images_(layout.image_store_dir()) {}

void ReviewApi::add_cors(ApiResponse& response) const {
  response.headers["Access-Control-Allow-Origin"] = cfg_.allowed_origin;
  response.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS";
  response.headers["Access-Control-Allow-Headers"] = "Content-Type, X-Review-Token, If-None-Match";
  response.headers["Access-Control-Expose-Headers"] = "ETag";
}

ApiResponse ReviewApi::handle(const ApiRequest& request) {
  ApiResponse response;
  try {
    response = [&]() -> ApiResponse {
      if (request.method == "OPTIONS") {
        ApiResponse r;
        r.status = 204;
        r.content_type.clear();
        return r;
      }
      if (cfg_.token) {
        auto it = request.headers.find("x-review-token");
        if (it == request.headers.end() || it->second != *cfg_.token)
          return error_response(401, "missing or wrong X-Review-Token");
      }
      const std::string& path = request.path;
      constexpr std::string_view candidates = "/api/candidates";
      constexpr std::string_view images = "/api/images/";
      if (path == candidates) {
        if (request.method != "GET") return error_response(405, "method not allowed");
        return list_candidates(request);
      }
      if (path.starts_with(std::string(candidates) + "/")) {
        std::string_view rest = std::string_view(path).substr(candidates.size() + 1);
        constexpr std::string_view decision = "/decision";
        if (rest.ends_with(decision)) {
          rest.remove_suffix(decision.size());
          if (rest.empty() || rest.find('/') != std::string_view::npos) return error_response(404, "not found");
          if (request.method != "POST") return error_response(405, "method not allowed");
          return post_decision(rest, request);
        }
        if (rest.empty() || rest.find('/') != std::string_view::npos) return error_response(404, "not found");
        if (request.method != "GET") return error_response(405, "method not allowed");
        return get_candidate(rest);
      }
      if (path.starts_with(images)) {
        if (request.method != "GET") return error_response(405, "method not allowed");
        return get_image(std::string_view(path).substr(images.size()), request);
      }
      return error_response(404, "not found");
    }();
  } catch (const std::exception& e) {
    spdlog::error("review api: {} {} failed: {}", request.method, request.path, e.what());
    response = error_response(500, e.what());
  }
  add_cors(response);
  return response;
}

ApiResponse ReviewApi::list_candidates(const ApiRequest& request) const {
  auto param = [&](const char* key) -> std::optional<std::string> {
    auto it = request.query.find(key);
    if (it == request.query.end()) return std::nullopt;
    return it->second;
  };
  const std::string wanted = param("status").value_or("pending");
  if (wanted != "pending" && wanted != "verified" && wanted != "rejected" && wanted != "all")
    return error_response(422, "status must be pending, verified, rejected or all");
  std::size_t page = 1, page_size = cfg_.default_page_size;
  if (auto p = param("page")) {
    auto v = parse_size(*p);
    if (!v || *v == 0) return error_response(422, "page must be a positive integer");
    page = *v;
  }
  if (auto p = param("page_size")) {
    auto v = parse_size(*p);
    if (!v || *v == 0 || *v > cfg_.max_page_size)
      return error_response(422, "page_size must be in [1, " + std::to_string(cfg_.max_page_size) + "]");
    page_size = *v;
  }

  const QueueState state = queue_.state();
  struct Item {
    CandidateMeta meta;
    std::string status;
    std::uint64_t latest_seq;
  };
  std::vector<Item> items;
  for (auto& meta : queue_.candidates()) {
    auto it = state.find(meta.id);
    const std::string status = it == state.end() ? "pending" : status_label(it->second.status);
    const std::uint64_t seq = it != state.end() && it->second.latest ? it->second.latest->seq : 0;
    if (wanted == "all" || status == wanted) items.push_back({std::move(meta), status, seq});
  }
  std::ranges::stable_sort(items, [](const Item& a, const Item& b) {
    if (a.meta.d_theta != b.meta.d_theta) return a.meta.d_theta > b.meta.d_theta;
    return a.meta.id < b.meta.id;
  });

  ordered_json out;
  out["status"] = wanted;
  out["page"] = page;
  out["page_size"] = page_size;
  out["total"] = items.size();
  ordered_json list = ordered_json::array();
  const std::size_t begin = std::min(items.size(), (page - 1) * page_size);
  const std::size_t end = std::min(items.size(), begin + page_size);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& item = items[i];
    ordered_json thumbs = ordered_json::array();
    for (const auto& rep : item.meta.representatives) thumbs.push_back("/api/images/" + rep);
    list.push_back({{"id", item.meta.id},
                    {"prompt", item.meta.prompt},
                    {"d_theta", item.meta.d_theta},
                    {"cluster_size", item.meta.cluster_size},
                    {"thumbnails", std::move(thumbs)},
                    {"status", item.status},
                    {"latest_seq", item.latest_seq}});
  }
  out["items"] = std::move(list);
  return json_response(200, out);
}

ApiResponse ReviewApi::get_candidate(std::string_view id) const {
  auto meta = queue_.find(id);
  if (!meta) return error_response(404, "unknown candidate '" + std::string(id) + "'");
  const QueueState state = queue_.state();
  auto it = state.find(meta->id);

  ordered_json out;
  out["candidate"] = ordered_json::parse(to_json(*meta));
  out["status"] = it == state.end() ? "pending" : status_label(it->second.status);
  out["latest_seq"] = it != state.end() && it->second.latest ? it->second.latest->seq : 0;
  ordered_json images = ordered_json::array();
  for (const auto& rep : meta->representatives) images.push_back({{"id", rep}, {"url", "/api/images/" + rep}});
  out["images"] = std::move(images);
  ordered_json history = ordered_json::array();
  if (it != state.end())
    for (const auto& d : it->second.history) history.push_back(decision_json(d));
  out["history"] = std::move(history);
  return json_response(200, out);
}

ApiResponse ReviewApi::post_decision(std::string_view id, const ApiRequest& request) {
  if (!queue_.find(id)) return error_response(404, "unknown candidate '" + std::string(id) + "'");
  ordered_json body;
  try {
    body = ordered_json::parse(request.body);
  } catch (const ordered_json::parse_error&) {
    return error_response(422, "body is not valid JSON");
  }
  if (!body.is_object()) return error_response(422, "body must be a JSON object");

  DecisionRecord record;
  record.candidate_id = std::string(id);
  std::optional<std::uint64_t> base_seq;
  bool force = false;
  try {
    const auto& d = body.at("decision");
    if (!d.is_string()) return error_response(422, "decision must be a string");
    record.decision = parse_decision(d.get<std::string>());
    const auto& reviewer = body.at("reviewer");
    if (!reviewer.is_string()) return error_response(422, "reviewer must be a string");
    record.reviewer = reviewer.get<std::string>();
    for (const char* key : {"matched_source_url", "layout_group_id"}) {
      if (!body.contains(key) || body[key].is_null()) continue;
      if (!body[key].is_string()) return error_response(422, std::string(key) + " must be a string");
      (std::string_view(key) == "matched_source_url" ? record.matched_source_url : record.layout_group_id) =
          body[key].get<std::string>();
    }
    if (body.contains("base_seq") && !body["base_seq"].is_null()) {
      if (!body["base_seq"].is_number_unsigned()) return error_response(422, "base_seq must be a non-negative integer");
      base_seq = body["base_seq"].get<std::uint64_t>();
    }
    if (body.contains("force")) {
      if (!body["force"].is_boolean()) return error_response(422, "force must be a boolean");
      force = body["force"].get<bool>();
    }
    validate(record);
  } catch (const ordered_json::out_of_range& e) {
    return error_response(422, std::string("missing field: ") + e.what());
  } catch (const ValidationError& e) {
    return error_response(422, e.what());
  }

  std::lock_guard lock(write_mu_);
  const QueueState state = queue_.state();
  auto it = state.find(record.candidate_id);
  const std::uint64_t latest = it != state.end() && it->second.latest ? it->second.latest->seq : 0;
  if (!force && latest > base_seq.value_or(0)) {
    ordered_json conflict{{"error", "a newer decision exists"}, {"latest_seq", latest}};
    if (it != state.end() && it->second.latest) conflict["latest"] = decision_json(*it->second.latest);
    return json_response(409, conflict);
  }
  const DecisionRecord stored = queue_.log().append(std::move(record));
  const QueueState after = queue_.state();
  const auto& cs = after.at(stored.candidate_id);
  return json_response(200, ordered_json{{"candidate_id", stored.candidate_id},
                                         {"status", status_label(cs.status)},
                                         {"seq", stored.seq},
                                         {"decision", decision_json(stored)}});
}

std::optional<ImageBytes> ReviewApi::find_image(std::string_view id) const {
  if (auto bytes = images_.get(ImageRef{std::string(id)})) return bytes;
  for (const auto& meta : queue_.candidates()) {
    if (std::ranges::find(meta.representatives, id) == meta.representatives.end()) continue;
    const auto path = queue_.layout().candidate_dir(meta.id) / (std::string(id) + ".img");
    std::error_code ec;
    if (std::filesystem::is_regular_file(path, ec)) return read_file_bytes(path);
  }
  return std::nullopt;
}

ApiResponse ReviewApi::get_image(std::string_view id, const ApiRequest& request) const {
  if (!is_valid_image_id(id)) return error_response(404, "unknown image");
  const std::string etag = "\"" + std::string(id) + "\"";
  auto bytes = find_image(id);
  if (!bytes) return error_response(404, "unknown image");
  ApiResponse r;
  r.headers["ETag"] = etag;
  r.headers["Cache-Control"] = "public, max-age=31536000, immutable";
  auto inm = request.headers.find("if-none-match");
  if (inm != request.headers.end() && inm->second == etag) {
    r.status = 304;
    r.content_type.clear();
    return r;
  }
  r.content_type = sniff_content_type(*bytes);
  r.body.assign(bytes->begin(), bytes->end());
  return r;
}

struct ReviewServer::Impl {
  ReviewApi api;
  httplib::Server server;

  Impl(StoreLayout layout, ReviewServiceConfig cfg) : api(std::move(layout), std::move(cfg)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest request;
      request.method = req.method;
      request.path = req.path;
      for (const auto& [k, v] : req.params) request.query.emplace(k, v);
      for (const auto& [k, v] : req.headers) {
        std::string key = k;
        std::ranges::transform(key, key.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        request.headers.emplace(std::move(key), v);
      }
      request.body = req.body;
      ApiResponse response = api.handle(request);
      res.status = response.status;
      for (const auto& [k, v] : response.headers) res.set_header(k, v);
      if (!response.content_type.empty()) res.set_content(response.body, response.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Options(".*", handler);
  }
};

ReviewServer::ReviewServer(StoreLayout layout, ReviewServiceConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(layout), std::move(cfg))) {}

ReviewServer::~ReviewServer() { stop(); }

bool ReviewServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int ReviewServer::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool ReviewServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace memaudit
