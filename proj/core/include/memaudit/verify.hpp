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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "memaudit/backends.hpp"
#include "memaudit/energy.hpp"
#include "memaudit/store.hpp"

namespace memaudit {

// Cosine of two unit embeddings, clamped to [-1, 1]. Throws ContractError on
// a dimension mismatch.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b);
double similarity(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kDefaultGenerationCount = 100;
inline constexpr std::size_t kDefaultMinClusterNodes = 20;
inline constexpr double kDefaultClusterEps = 0.25;
inline constexpr double kDefaultMemorizationTau = 0.5;

struct CandidateBatch {
  std::string prompt;
  EnergyScore d_theta;
  std::vector<ImageRef> images;
  std::vector<EmbeddingVector> embeddings;  // aligned with images
};

struct ClusterConfig {
  double eps = kDefaultClusterEps;  // on cosine distance 1 - similarity
  std::size_t min_nodes = kDefaultMinClusterNodes;
  std::size_t representatives = 3;
};

inline constexpr int kNoiseLabel = -1;

struct ClusterReport {
  std::vector<int> labels;  // per image; kNoiseLabel for noise
  std::map<int, std::size_t> cluster_sizes;
  bool qualifying = false;
  int largest_cluster = kNoiseLabel;
  std::vector<std::size_t> representative_indices;
  std::vector<ImageRef> representatives;

  std::size_t largest_size() const;
};

// Density clustering (DBSCAN) on cosine distance. A point is core when at
// least min_nodes points, itself included, lie within eps. Core points that
// are eps-connected form a cluster; a border point joins the cluster of its
// nearest core point (ties go to the lexicographically smaller core
// embedding), which keeps the result independent of input order. Clusters
// are numbered by their first member. qualifying <=> some cluster has at
// least min_nodes members; representatives are the images nearest the medoid
// of the largest qualifying cluster.
ClusterReport cluster_embeddings(std::span<const EmbeddingVector> embeddings, const ClusterConfig& cfg);
ClusterReport cluster_generations(const CandidateBatch& batch, const ClusterConfig& cfg);

struct ReferenceImage {
  std::string id;
  EmbeddingVector embedding;
};

struct ReferenceMatch {
  std::string reference_id;
  double similarity = 0.0;
};

struct MemorizationDecision {
  ImageRef image;
  std::vector<ReferenceMatch> matched_refs;  // descending similarity
  bool is_memorized = false;
  double tau = kDefaultMemorizationTau;
};

// Memorized iff some reference has similarity strictly greater than tau.
MemorizationDecision memorization_indicator(const ImageRef& image, const EmbeddingVector& embedding,
                                            std::span<const ReferenceImage> refs,
                                            double tau = kDefaultMemorizationTau);

struct VerifyBackends {
  std::shared_ptr<const ImageGenerator> generator;
  std::shared_ptr<const ImageEmbedder> embedder;
  std::shared_ptr<const ImageStore> images;
  std::shared_ptr<const WebMatchProvider> web_matches;  // may be null
};

// Generates `count` images for the prompt and embeds them for copy detection.
CandidateBatch build_candidate_batch(const std::string& prompt, EnergyScore score, const VerifyBackends& backends,
                                     std::size_t count, std::uint64_t seed);

struct ExportOptions {
  std::filesystem::path queue_dir;
  std::string model_id;
  Provenance provenance;
};

// Writes queue/<candidate_id>/meta.json plus the representative images with
// status pending (distinct image ids only). If the web-match provider is
// missing or fails, matches are empty and needs_manual_search is set.
CandidateMeta export_candidates(const ClusterReport& report, const CandidateBatch& batch,
                                const VerifyBackends& backends, const ExportOptions& options);

}  // namespace memaudit
