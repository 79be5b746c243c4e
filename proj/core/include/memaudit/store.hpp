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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memaudit/backends.hpp"

namespace memaudit {

inline constexpr int kSchemaVersion = 1;

// Fields a reader did not recognize, kept as raw JSON in original order so
// they survive a load/save cycle.
using ExtraFields = std::vector<std::pair<std::string, std::string>>;

enum class ProvenanceKind { masked_prior, augmentation, greedy, imported };

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::imported;
  std::string seed_id;  // augmentation only

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

enum class PromptStatus { candidate, verified, rejected };

std::string_view to_string(ProvenanceKind kind);
std::string_view to_string(PromptStatus status);
ProvenanceKind parse_provenance_kind(std::string_view text);
PromptStatus parse_prompt_status(std::string_view text);

struct TriggerPromptRecord {
  std::string id;
  std::string prompt;
  std::string model_id;
  double d_theta = 0.0;
  Provenance provenance;
  std::vector<std::string> memorized_image_ids;
  PromptStatus status = PromptStatus::candidate;
  ExtraFields extra;

  friend bool operator==(const TriggerPromptRecord&, const TriggerPromptRecord&) = default;
};

struct MemorizedImageRecord {
  std::string id;
  std::vector<std::string> source_urls;
  // Records sharing a layout group count as one memorized image.
  std::optional<std::string> layout_group_id;
  std::string license_note;
  // Image id whose copy-detection embedding stands in for the source image.
  std::optional<std::string> embedding_ref;
  std::vector<double> embedding;  // optional inline copy-detection embedding
  ExtraFields extra;

  friend bool operator==(const MemorizedImageRecord&, const MemorizedImageRecord&) = default;
};

struct Dataset {
  std::string model_id;
  std::vector<TriggerPromptRecord> prompts;
  std::vector<MemorizedImageRecord> images;
};

struct DatasetStats {
  std::size_t prompts = 0;
  std::size_t candidates = 0;
  std::size_t verified = 0;
  std::size_t rejected = 0;
  std::size_t image_records = 0;
  // Image records with layout groups collapsed to one per group.
  std::size_t memorized_images = 0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct DatasetManifest {
  int schema_version = kSchemaVersion;
  std::string model_id;
  DatasetStats stats;
};

DatasetStats dataset_stats(std::span<const TriggerPromptRecord> prompts,
                           std::span<const MemorizedImageRecord> images);

// Unique ids; verified prompts link at least one image. Throws ValidationError.
void validate(const Dataset& dataset);

// Writes prompts.jsonl, images.jsonl and manifest.json under dir. One record
// per line, schema_version first.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

struct LoadedDataset {
  DatasetManifest manifest;
  Dataset dataset;
};

// A missing directory loads as an empty dataset. Throws ValidationError if a
// stored manifest disagrees with the recomputed counts.
LoadedDataset load_dataset(const std::filesystem::path& dir, std::string_view model_id = {});

std::string to_json_line(const TriggerPromptRecord& record);
std::string to_json_line(const MemorizedImageRecord& record);
TriggerPromptRecord parse_trigger_prompt(std::string_view line);
MemorizedImageRecord parse_memorized_image(std::string_view line);

enum class Decision { accept, reject };
std::string_view to_string(Decision decision);
Decision parse_decision(std::string_view text);

struct DecisionRecord {
  std::string candidate_id;
  std::string reviewer;
  Decision decision = Decision::reject;
  std::optional<std::string> matched_source_url;  // required iff accept
  std::optional<std::string> layout_group_id;
  std::string timestamp;  // ISO-8601 UTC
  std::uint64_t seq = 0;  // assigned by the log, strictly increasing
  ExtraFields extra;

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

// Throws ValidationError on a missing candidate id or reviewer, an accept
// without a source URL, or a reject carrying one.
void validate(const DecisionRecord& record);

std::string to_json_line(const DecisionRecord& record);
DecisionRecord parse_decision_record(std::string_view line);

struct CandidateState {
  PromptStatus status = PromptStatus::candidate;
  std::optional<DecisionRecord> latest;
  std::vector<DecisionRecord> history;  // ascending seq
};

using QueueState = std::map<std::string, CandidateState>;

// Folds a decision log into per-candidate state. The highest sequence number
// wins for each candidate; the rest stays in history. Input order does not
// matter and replaying the same log twice gives the same state.
QueueState replay(std::span<const DecisionRecord> log);

// Append-only decision log (JSONL). Appends are serialized; seq is assigned
// here as last seq + 1.
class DecisionLog {
 public:
  explicit DecisionLog(std::filesystem::path path) : path_(std::move(path)) {}

  std::vector<DecisionRecord> read() const;
  // Records with seq <= up_to.
  std::vector<DecisionRecord> snapshot(std::uint64_t up_to) const;
  // Validates, stamps seq (and timestamp when empty), appends, returns it.
  DecisionRecord append(DecisionRecord record);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
};

struct WebMatchEntry {
  std::string image_id;
  WebMatch match;
};

// On-disk review bundle: queue/<id>/meta.json next to the image files.
struct CandidateMeta {
  std::string id;
  std::string prompt;
  std::string model_id;
  double d_theta = 0.0;
  std::vector<std::uint64_t> noise_seeds;
  Provenance provenance;
  std::size_t generated_count = 0;
  std::size_t cluster_size = 0;
  std::vector<std::string> representatives;  // image ids
  std::vector<WebMatchEntry> web_matches;
  bool needs_manual_search = false;
  std::string status = "pending";
};

std::string candidate_id_for(std::string_view model_id, std::string_view prompt);
std::string to_json(const CandidateMeta& meta);
CandidateMeta parse_candidate_meta(std::string_view text);

// Directory conventions under a data root.
class StoreLayout {
 public:
  explicit StoreLayout(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path dataset_dir(std::string_view model_id) const;
  std::filesystem::path runs_dir() const { return root_ / "runs"; }
  std::filesystem::path run_dir(std::string_view run_id) const;
  std::filesystem::path queue_dir() const { return root_ / "queue"; }
  std::filesystem::path decisions_path() const { return queue_dir() / "decisions.jsonl"; }
  std::filesystem::path candidate_dir(std::string_view id) const;
  std::filesystem::path image_store_dir() const { return root_ / "images"; }

 private:
  std::filesystem::path root_;
};

// $MEMAUDIT_HOME, or ./memaudit-data when unset.
std::filesystem::path default_home();

// Candidates on disk plus the decision log.
class ReviewQueue {
 public:
  explicit ReviewQueue(StoreLayout layout);

  std::vector<CandidateMeta> candidates() const;  // ascending id
  std::optional<CandidateMeta> find(std::string_view id) const;
  void write(const CandidateMeta& meta) const;
  QueueState state() const { return replay(log_.read()); }
  DecisionLog& log() noexcept { return log_; }
  const DecisionLog& log() const noexcept { return log_; }
  const StoreLayout& layout() const noexcept { return layout_; }

 private:
  StoreLayout layout_;
  DecisionLog log_;
};

// Upserts one TriggerPromptRecord per queued candidate of `dataset.model_id`
// with the status implied by `state`. Accepted candidates link a
// MemorizedImageRecord keyed by the matched source URL whose embedding_ref
// is the candidate's first representative image.
Dataset apply_queue(Dataset dataset, std::span<const CandidateMeta> candidates, const QueueState& state);

}  // namespace memaudit
