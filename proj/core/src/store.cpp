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

#include "memaudit/store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"

namespace memaudit {

using nlohmann::ordered_json;

std::string_view to_string(ProvenanceKind kind) {
  switch (kind) {
    case ProvenanceKind::masked_prior: return "masked_prior";
    case ProvenanceKind::augmentation: return "augmentation";
    case ProvenanceKind::greedy: return "greedy";
    case ProvenanceKind::imported: return "imported";
  }
  return "imported";
}

std::string_view to_string(PromptStatus status) {
  switch (status) {
    case PromptStatus::candidate: return "candidate";
    case PromptStatus::verified: return "verified";
    case PromptStatus::rejected: return "rejected";
  }
  return "candidate";
}

std::string_view to_string(Decision decision) { return decision == Decision::accept ? "accept" : "reject"; }

ProvenanceKind parse_provenance_kind(std::string_view text) {
  if (text == "masked_prior") return ProvenanceKind::masked_prior;
  if (text == "augmentation") return ProvenanceKind::augmentation;
  if (text == "greedy") return ProvenanceKind::greedy;
  if (text == "imported") return ProvenanceKind::imported;
  throw ValidationError("unknown provenance '" + std::string(text) + "'");
}

PromptStatus parse_prompt_status(std::string_view text) {
  if (text == "candidate") return PromptStatus::candidate;
  if (text == "verified") return PromptStatus::verified;
  if (text == "rejected") return PromptStatus::rejected;
  throw ValidationError("unknown prompt status '" + std::string(text) + "'");
}

Decision parse_decision(std::string_view text) {
  if (text == "accept") return Decision::accept;
  if (text == "reject") return Decision::reject;
  throw ValidationError("decision must be 'accept' or 'reject', got '" + std::string(text) + "'");
}

namespace {

ordered_json parse_object(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  return j;
}

void check_schema(const ordered_json& j) {
  if (!j.contains("schema_version")) return;
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() > kSchemaVersion)
    throw ValidationError("unsupported schema_version " + j["schema_version"].dump());
}

template <class T>
T required(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return it->template get<T>();
  } catch (const ordered_json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T optional_or(const ordered_json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->template get<T>();
  } catch (const ordered_json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

std::optional<std::string> optional_string(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

ExtraFields collect_extra(const ordered_json& j, std::initializer_list<std::string_view> known) {
  ExtraFields extra;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) != known.end()) continue;
    extra.emplace_back(it.key(), it.value().dump());
  }
  return extra;
}

void append_extra(ordered_json& j, const ExtraFields& extra) {
  for (const auto& [key, raw] : extra) j[key] = ordered_json::parse(raw);
}

ordered_json to_json(const Provenance& p) {
  ordered_json j;
  j["kind"] = to_string(p.kind);
  if (p.kind == ProvenanceKind::augmentation) j["seed_id"] = p.seed_id;
  return j;
}

Provenance provenance_from(const ordered_json& j) {
  if (!j.is_object()) throw ValidationError("provenance must be an object");
  Provenance p;
  p.kind = parse_provenance_kind(required<std::string>(j, "kind"));
  p.seed_id = optional_or<std::string>(j, "seed_id", "");
  if (p.kind == ProvenanceKind::augmentation && p.seed_id.empty())
    throw ValidationError("augmentation provenance needs a seed_id");
  return p;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  if (!in) return lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string to_json_line(const TriggerPromptRecord& r) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  j["model_id"] = r.model_id;
  j["d_theta"] = r.d_theta;
  j["provenance"] = to_json(r.provenance);
  j["memorized_image_ids"] = r.memorized_image_ids;
  j["status"] = to_string(r.status);
  append_extra(j, r.extra);
  return j.dump();
}

TriggerPromptRecord parse_trigger_prompt(std::string_view line) {
  const auto j = parse_object(line);
  check_schema(j);
  TriggerPromptRecord r;
  r.id = required<std::string>(j, "id");
  r.prompt = required<std::string>(j, "prompt");
  r.model_id = optional_or<std::string>(j, "model_id", "");
  r.d_theta = optional_or<double>(j, "d_theta", 0.0);
  if (j.contains("provenance")) r.provenance = provenance_from(j["provenance"]);
  r.memorized_image_ids = optional_or<std::vector<std::string>>(j, "memorized_image_ids", {});
  r.status = parse_prompt_status(optional_or<std::string>(j, "status", "candidate"));
  r.extra = collect_extra(j, {"schema_version", "id", "prompt", "model_id", "d_theta", "provenance",
                              "memorized_image_ids", "status"});
  return r;
}

std::string to_json_line(const MemorizedImageRecord& r) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = r.id;
  j["source_urls"] = r.source_urls;
  j["layout_group_id"] = r.layout_group_id ? ordered_json(*r.layout_group_id) : ordered_json(nullptr);
  j["license_note"] = r.license_note;
  j["embedding_ref"] = r.embedding_ref ? ordered_json(*r.embedding_ref) : ordered_json(nullptr);
  j["embedding"] = r.embedding;
  append_extra(j, r.extra);
  return j.dump();
}

MemorizedImageRecord parse_memorized_image(std::string_view line) {
  const auto j = parse_object(line);
  check_schema(j);
  MemorizedImageRecord r;
  r.id = required<std::string>(j, "id");
  r.source_urls = optional_or<std::vector<std::string>>(j, "source_urls", {});
  r.layout_group_id = optional_string(j, "layout_group_id");
  r.license_note = optional_or<std::string>(j, "license_note", "");
  r.embedding_ref = optional_string(j, "embedding_ref");
  r.embedding = optional_or<std::vector<double>>(j, "embedding", {});
  r.extra = collect_extra(j, {"schema_version", "id", "source_urls", "layout_group_id", "license_note",
                              "embedding_ref", "embedding"});
  return r;
}

DatasetStats dataset_stats(std::span<const TriggerPromptRecord> prompts,
                           std::span<const MemorizedImageRecord> images) {
  DatasetStats s;
  s.prompts = prompts.size();
  for (const auto& p : prompts) {
    switch (p.status) {
      case PromptStatus::candidate: ++s.candidates; break;
      case PromptStatus::verified: ++s.verified; break;
      case PromptStatus::rejected: ++s.rejected; break;
    }
  }
  s.image_records = images.size();
  std::set<std::string> groups;
  for (const auto& img : images) {
    if (img.layout_group_id)
      groups.insert(*img.layout_group_id);
    else
      ++s.memorized_images;
  }
  s.memorized_images += groups.size();
  return s;
}

void validate(const Dataset& dataset) {
  std::set<std::string> ids;
  for (const auto& p : dataset.prompts) {
    if (p.id.empty()) throw ValidationError("trigger prompt record without an id");
    if (!ids.insert(p.id).second) throw ValidationError("duplicate trigger prompt id '" + p.id + "'");
    if (p.status == PromptStatus::verified && p.memorized_image_ids.empty())
      throw ValidationError("verified prompt '" + p.id + "' links no memorized image");
  }
  std::set<std::string> image_ids;
  for (const auto& img : dataset.images) {
    if (img.id.empty()) throw ValidationError("memorized image record without an id");
    if (!image_ids.insert(img.id).second) throw ValidationError("duplicate memorized image id '" + img.id + "'");
  }
}

namespace {

std::string manifest_text(const DatasetManifest& m) {
  ordered_json j;
  j["schema_version"] = m.schema_version;
  j["model_id"] = m.model_id;
  j["prompt_count"] = m.stats.prompts;
  j["status_counts"] = {{"candidate", m.stats.candidates},
                        {"verified", m.stats.verified},
                        {"rejected", m.stats.rejected}};
  j["image_record_count"] = m.stats.image_records;
  j["memorized_image_count"] = m.stats.memorized_images;
  return j.dump(2) + "\n";
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  validate(dataset);
  std::string prompts;
  for (const auto& p : dataset.prompts) prompts += to_json_line(p) + "\n";
  std::string images;
  for (const auto& img : dataset.images) images += to_json_line(img) + "\n";
  DatasetManifest manifest{kSchemaVersion, dataset.model_id, dataset_stats(dataset.prompts, dataset.images)};
  write_text_atomic(dir / "prompts.jsonl", prompts);
  write_text_atomic(dir / "images.jsonl", images);
  write_text_atomic(dir / "manifest.json", manifest_text(manifest));
}

LoadedDataset load_dataset(const std::filesystem::path& dir, std::string_view model_id) {
  LoadedDataset out;
  out.dataset.model_id = std::string(model_id);
  for (const auto& line : read_lines(dir / "prompts.jsonl")) out.dataset.prompts.push_back(parse_trigger_prompt(line));
  for (const auto& line : read_lines(dir / "images.jsonl")) out.dataset.images.push_back(parse_memorized_image(line));

  std::optional<DatasetStats> stored;
  if (std::ifstream in(dir / "manifest.json"); in) {
    std::stringstream ss;
    ss << in.rdbuf();
    const auto j = parse_object(ss.str());
    check_schema(j);
    if (out.dataset.model_id.empty()) out.dataset.model_id = optional_or<std::string>(j, "model_id", "");
    DatasetStats s;
    s.prompts = required<std::size_t>(j, "prompt_count");
    const auto& counts = j.at("status_counts");
    s.candidates = required<std::size_t>(counts, "candidate");
    s.verified = required<std::size_t>(counts, "verified");
    s.rejected = required<std::size_t>(counts, "rejected");
    s.image_records = required<std::size_t>(j, "image_record_count");
    s.memorized_images = required<std::size_t>(j, "memorized_image_count");
    stored = s;
  }
  validate(out.dataset);
  out.manifest.model_id = out.dataset.model_id;
  out.manifest.stats = dataset_stats(out.dataset.prompts, out.dataset.images);
  if (stored && !(*stored == out.manifest.stats))
    throw ValidationError("manifest counts in " + dir.string() + " do not match the records");
  return out;
}

void validate(const DecisionRecord& r) {
  if (r.candidate_id.empty()) throw ValidationError("decision needs a candidate_id");
  if (r.reviewer.empty()) throw ValidationError("decision needs a reviewer");
  const bool has_url = r.matched_source_url && !r.matched_source_url->empty();
  if (r.decision == Decision::accept && !has_url)
    throw ValidationError("accept requires matched_source_url");
  if (r.decision == Decision::reject && has_url)
    throw ValidationError("reject must not carry matched_source_url");
}

std::string to_json_line(const DecisionRecord& r) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["seq"] = r.seq;
  j["candidate_id"] = r.candidate_id;
  j["reviewer"] = r.reviewer;
  j["decision"] = to_string(r.decision);
  j["matched_source_url"] = r.matched_source_url ? ordered_json(*r.matched_source_url) : ordered_json(nullptr);
  j["layout_group_id"] = r.layout_group_id ? ordered_json(*r.layout_group_id) : ordered_json(nullptr);
  j["timestamp"] = r.timestamp;
  append_extra(j, r.extra);
  return j.dump();
}

DecisionRecord parse_decision_record(std::string_view line) {
  const auto j = parse_object(line);
  check_schema(j);
  DecisionRecord r;
  r.seq = optional_or<std::uint64_t>(j, "seq", 0);
  r.candidate_id = required<std::string>(j, "candidate_id");
  r.reviewer = optional_or<std::string>(j, "reviewer", "");
  r.decision = parse_decision(required<std::string>(j, "decision"));
  r.matched_source_url = optional_string(j, "matched_source_url");
  if (r.matched_source_url && r.matched_source_url->empty()) r.matched_source_url.reset();
  r.layout_group_id = optional_string(j, "layout_group_id");
  if (r.layout_group_id && r.layout_group_id->empty()) r.layout_group_id.reset();
  r.timestamp = optional_or<std::string>(j, "timestamp", "");
  r.extra = collect_extra(j, {"schema_version", "seq", "candidate_id", "reviewer", "decision",
                              "matched_source_url", "layout_group_id", "timestamp"});
  return r;
}

QueueState replay(std::span<const DecisionRecord> log) {
  std::vector<DecisionRecord> sorted(log.begin(), log.end());
  std::ranges::stable_sort(sorted, [](const DecisionRecord& a, const DecisionRecord& b) { return a.seq < b.seq; });
  QueueState state;
  for (auto& r : sorted) {
    auto& c = state[r.candidate_id];
    c.status = r.decision == Decision::accept ? PromptStatus::verified : PromptStatus::rejected;
    c.latest = r;
    c.history.push_back(std::move(r));
  }
  return state;
}

std::vector<DecisionRecord> DecisionLog::read() const {
  std::lock_guard lock(mu_);
  std::vector<DecisionRecord> out;
  for (const auto& line : read_lines(path_)) out.push_back(parse_decision_record(line));
  return out;
}

std::vector<DecisionRecord> DecisionLog::snapshot(std::uint64_t up_to) const {
  auto all = read();
  std::erase_if(all, [&](const DecisionRecord& r) { return r.seq > up_to; });
  return all;
}

DecisionRecord DecisionLog::append(DecisionRecord record) {
  validate(record);
  std::lock_guard lock(mu_);
  std::uint64_t last = 0;
  for (const auto& line : read_lines(path_)) last = std::max(last, parse_decision_record(line).seq);
  record.seq = last + 1;
  if (record.timestamp.empty()) record.timestamp = utc_now();
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to " + path_.string());
  out << to_json_line(record) << '\n';
  out.flush();
  if (!out) throw Error("short write to " + path_.string());
  return record;
}

std::string candidate_id_for(std::string_view model_id, std::string_view prompt) {
  std::string key(model_id);
  key.push_back('\0');
  key.append(prompt);
  return "c" + content_id(key).substr(0, 16);
}

std::string to_json(const CandidateMeta& m) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = m.id;
  j["prompt"] = m.prompt;
  j["model_id"] = m.model_id;
  j["d_theta"] = m.d_theta;
  j["noise_seeds"] = m.noise_seeds;
  j["provenance"] = to_json(m.provenance);
  j["generated_count"] = m.generated_count;
  j["cluster_size"] = m.cluster_size;
  j["representatives"] = m.representatives;
  ordered_json matches = ordered_json::array();
  for (const auto& w : m.web_matches)
    matches.push_back({{"image_id", w.image_id},
                       {"url", w.match.url},
                       {"thumbnail", w.match.thumbnail},
                       {"score", w.match.score}});
  j["web_matches"] = std::move(matches);
  j["needs_manual_search"] = m.needs_manual_search;
  j["status"] = m.status;
  return j.dump(2) + "\n";
}

CandidateMeta parse_candidate_meta(std::string_view text) {
  const auto j = parse_object(text);
  check_schema(j);
  CandidateMeta m;
  m.id = required<std::string>(j, "id");
  m.prompt = required<std::string>(j, "prompt");
  m.model_id = optional_or<std::string>(j, "model_id", "");
  m.d_theta = optional_or<double>(j, "d_theta", 0.0);
  m.noise_seeds = optional_or<std::vector<std::uint64_t>>(j, "noise_seeds", {});
  if (j.contains("provenance")) m.provenance = provenance_from(j["provenance"]);
  m.generated_count = optional_or<std::size_t>(j, "generated_count", 0);
  m.cluster_size = optional_or<std::size_t>(j, "cluster_size", 0);
  m.representatives = optional_or<std::vector<std::string>>(j, "representatives", {});
  if (auto it = j.find("web_matches"); it != j.end() && it->is_array()) {
    for (const auto& w : *it)
      m.web_matches.push_back({required<std::string>(w, "image_id"),
                               WebMatch{required<std::string>(w, "url"), optional_or<std::string>(w, "thumbnail", ""),
                                        optional_or<double>(w, "score", 0.0)}});
  }
  m.needs_manual_search = optional_or<bool>(j, "needs_manual_search", false);
  m.status = optional_or<std::string>(j, "status", "pending");
  return m;
}

namespace {

void require_safe_component(std::string_view part) {
  if (part.empty() || part == "." || part == ".." || part.find_first_of("/\\") != std::string_view::npos)
    throw ValidationError("unsafe path component '" + std::string(part) + "'");
}

}  // namespace

std::filesystem::path StoreLayout::dataset_dir(std::string_view model_id) const {
  require_safe_component(model_id);
  return root_ / "datasets" / std::string(model_id);
}

std::filesystem::path StoreLayout::run_dir(std::string_view run_id) const {
  require_safe_component(run_id);
  return runs_dir() / std::string(run_id);
}

std::filesystem::path StoreLayout::candidate_dir(std::string_view id) const {
  require_safe_component(id);
  return queue_dir() / std::string(id);
}

std::filesystem::path default_home() {
  if (const char* env = std::getenv("MEMAUDIT_HOME"); env != nullptr && *env != '\0') return env;
  return std::filesystem::current_path() / "memaudit-data";
}

ReviewQueue::ReviewQueue(StoreLayout layout) : layout_(std::move(layout)), log_(layout_.decisions_path()) {}

std::vector<CandidateMeta> ReviewQueue::candidates() const {
  std::vector<CandidateMeta> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(layout_.queue_dir(), ec)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(layout_.queue_dir())) {
    if (!entry.is_directory()) continue;
    const auto meta = entry.path() / "meta.json";
    if (!std::filesystem::is_regular_file(meta)) continue;
    std::ifstream in(meta);
    std::stringstream ss;
    ss << in.rdbuf();
    out.push_back(parse_candidate_meta(ss.str()));
  }
  std::ranges::sort(out, [](const CandidateMeta& a, const CandidateMeta& b) { return a.id < b.id; });
  return out;
}

std::optional<CandidateMeta> ReviewQueue::find(std::string_view id) const {
  std::filesystem::path dir;
  try {
    dir = layout_.candidate_dir(id);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
  std::ifstream in(dir / "meta.json");
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_candidate_meta(ss.str());
}

void ReviewQueue::write(const CandidateMeta& meta) const {
  write_text_atomic(layout_.candidate_dir(meta.id) / "meta.json", to_json(meta));
}

Dataset apply_queue(Dataset dataset, std::span<const CandidateMeta> candidates, const QueueState& state) {
  auto find_prompt = [&](const std::string& id) -> TriggerPromptRecord* {
    for (auto& p : dataset.prompts)
      if (p.id == id) return &p;
    return nullptr;
  };
  auto find_image = [&](const std::string& id) -> MemorizedImageRecord* {
    for (auto& img : dataset.images)
      if (img.id == id) return &img;
    return nullptr;
  };

  for (const auto& c : candidates) {
    if (!dataset.model_id.empty() && c.model_id != dataset.model_id) continue;
    TriggerPromptRecord* rec = find_prompt(c.id);
    if (rec == nullptr) {
      dataset.prompts.push_back({});
      rec = &dataset.prompts.back();
      rec->id = c.id;
    }
    rec->prompt = c.prompt;
    rec->model_id = c.model_id;
    rec->d_theta = c.d_theta;
    rec->provenance = c.provenance;

    auto it = state.find(c.id);
    if (it == state.end() || !it->second.latest) {
      rec->status = PromptStatus::candidate;
      rec->memorized_image_ids.clear();
      continue;
    }
    const DecisionRecord& d = *it->second.latest;
    rec->status = it->second.status;
    rec->memorized_image_ids.clear();
    if (d.decision != Decision::accept) continue;

    const std::string& url = *d.matched_source_url;
    const std::string image_id = "m" + content_id(url).substr(0, 16);
    MemorizedImageRecord* img = find_image(image_id);
    if (img == nullptr) {
      dataset.images.push_back({});
      img = &dataset.images.back();
      img->id = image_id;
      img->source_urls = {url};
    }
    if (d.layout_group_id) img->layout_group_id = d.layout_group_id;
    if (!img->embedding_ref && !c.representatives.empty()) img->embedding_ref = c.representatives.front();
    rec->memorized_image_ids.push_back(image_id);
  }
  return dataset;
}

}  // namespace memaudit
