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

#include "memaudit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"

namespace memaudit {

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("embeddings differ in dimension");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.kind != b.kind) throw ContractError("cannot compare embeddings of different kinds");
  return similarity(a.values, b.values);
}

std::size_t ClusterReport::largest_size() const {
  auto it = cluster_sizes.find(largest_cluster);
  return it == cluster_sizes.end() ? 0 : it->second;
}

ClusterReport cluster_embeddings(std::span<const EmbeddingVector> embeddings, const ClusterConfig& cfg) {
  if (cfg.min_nodes == 0) throw ConfigError("min_nodes must be at least 1");
  if (!(cfg.eps >= 0.0)) throw ConfigError("eps must be non-negative");
  const std::size_t n = embeddings.size();
  if (n < cfg.min_nodes)
    spdlog::warn("{} generations is fewer than min_nodes={}; no cluster can qualify", n, cfg.min_nodes);

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] = 1.0 - similarity(embeddings[i].values, embeddings[j].values);

  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t neighbours = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (dist[i][j] <= cfg.eps) ++neighbours;
    core[i] = neighbours >= cfg.min_nodes;
  }

  // Connected components of the core graph, numbered by their first member.
  ClusterReport report;
  report.labels.assign(n, kNoiseLabel);
  int next_label = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || report.labels[seed] != kNoiseLabel) continue;
    const int label = next_label++;
    std::vector<std::size_t> stack{seed};
    report.labels[seed] = label;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < n; ++v) {
        if (core[v] && report.labels[v] == kNoiseLabel && dist[u][v] <= cfg.eps) {
          report.labels[v] = label;
          stack.push_back(v);
        }
      }
    }
  }

  // Border points take the label of their nearest core point.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::optional<std::size_t> nearest;
    for (std::size_t c = 0; c < n; ++c) {
      if (!core[c] || dist[i][c] > cfg.eps) continue;
      if (!nearest || dist[i][c] < dist[i][*nearest] ||
          (dist[i][c] == dist[i][*nearest] && embeddings[c].values < embeddings[*nearest].values))
        nearest = c;
    }
    if (nearest) report.labels[i] = report.labels[*nearest];
  }

  // Renumber so labels follow first appearance in input order.
  std::map<int, int> relabel;
  for (int& l : report.labels) {
    if (l == kNoiseLabel) continue;
    auto [it, inserted] = relabel.try_emplace(l, static_cast<int>(relabel.size()));
    l = it->second;
  }
  for (int l : report.labels)
    if (l != kNoiseLabel) ++report.cluster_sizes[l];

  for (const auto& [label, size] : report.cluster_sizes) {
    if (size < cfg.min_nodes) continue;
    report.qualifying = true;
    if (report.largest_cluster == kNoiseLabel || size > report.cluster_sizes[report.largest_cluster])
      report.largest_cluster = label;
  }
  if (!report.qualifying) return report;

  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < n; ++i)
    if (report.labels[i] == report.largest_cluster) members.push_back(i);
  std::size_t medoid = members.front();
  double best_total = INFINITY;
  for (std::size_t m : members) {
    double total = 0.0;
    for (std::size_t o : members) total += dist[m][o];
    if (total < best_total) {
      best_total = total;
      medoid = m;
    }
  }
  std::ranges::stable_sort(members, [&](std::size_t a, std::size_t b) { return dist[medoid][a] < dist[medoid][b]; });
  members.resize(std::min(members.size(), cfg.representatives));
  report.representative_indices = std::move(members);
  return report;
}

ClusterReport cluster_generations(const CandidateBatch& batch, const ClusterConfig& cfg) {
  if (batch.images.size() != batch.embeddings.size())
    throw ContractError("candidate batch embeddings are not aligned with images");
  ClusterReport report = cluster_embeddings(batch.embeddings, cfg);
  for (std::size_t i : report.representative_indices) report.representatives.push_back(batch.images[i]);
  return report;
}

MemorizationDecision memorization_indicator(const ImageRef& image, const EmbeddingVector& embedding,
                                            std::span<const ReferenceImage> refs, double tau) {
  MemorizationDecision decision;
  decision.image = image;
  decision.tau = tau;
  for (const auto& ref : refs) decision.matched_refs.push_back({ref.id, similarity(embedding, ref.embedding)});
  std::ranges::stable_sort(decision.matched_refs, [](const ReferenceMatch& a, const ReferenceMatch& b) {
    return a.similarity > b.similarity;
  });
  decision.is_memorized = !decision.matched_refs.empty() && decision.matched_refs.front().similarity > tau;
  return decision;
}

CandidateBatch build_candidate_batch(const std::string& prompt, EnergyScore score, const VerifyBackends& backends,
                                     std::size_t count, std::uint64_t seed) {
  if (!backends.generator || !backends.embedder) throw ContractError("verification needs a generator and embedder");
  if (count == 0) throw ContractError("generation count must be at least 1");
  GenerationRequest request;
  request.prompt = prompt;
  request.image_count = static_cast<int>(count);
  request.seed = derive_seed(seed, {fnv1a64(prompt)});
  auto generated = backends.generator->generate_images(request);
  if (generated.failed > 0)
    spdlog::warn("{} of {} generations failed for '{}'", generated.failed, count, prompt);

  CandidateBatch batch;
  batch.prompt = prompt;
  batch.d_theta = std::move(score);
  batch.images = std::move(generated.images);
  batch.embeddings.reserve(batch.images.size());
  for (const auto& img : batch.images)
    batch.embeddings.push_back(backends.embedder->embed_image(img, EmbeddingKind::copy_detection));
  return batch;
}

CandidateMeta export_candidates(const ClusterReport& report, const CandidateBatch& batch,
                                const VerifyBackends& backends, const ExportOptions& options) {
  if (!backends.images) throw ContractError("export needs an image store");
  CandidateMeta meta;
  meta.id = candidate_id_for(options.model_id, batch.prompt);
  meta.prompt = batch.prompt;
  meta.model_id = options.model_id;
  meta.d_theta = batch.d_theta.value;
  meta.noise_seeds = batch.d_theta.noise_seeds;
  meta.provenance = options.provenance;
  meta.generated_count = batch.images.size();
  meta.cluster_size = report.largest_size();
  meta.needs_manual_search = backends.web_matches == nullptr;

  const auto dir = options.queue_dir / meta.id;
  std::filesystem::create_directories(dir);
  for (const auto& ref : report.representatives) {
    // Byte-identical generations share an id; keep one copy.
    if (std::ranges::find(meta.representatives, ref.id) != meta.representatives.end()) continue;
    auto bytes = backends.images->get(ref);
    if (!bytes) throw BackendError("representative image " + ref.id + " missing from the store");
    write_file_bytes(dir / (ref.id + ".img"), *bytes);
    meta.representatives.push_back(ref.id);
    if (!backends.web_matches || meta.needs_manual_search) continue;
    try {
      for (auto& m : backends.web_matches->find_matches(*bytes)) meta.web_matches.push_back({ref.id, std::move(m)});
    } catch (const BackendError& e) {
      spdlog::warn("web-match lookup failed for candidate {}: {}", meta.id, e.what());
      meta.web_matches.clear();
      meta.needs_manual_search = true;
    }
  }
  if (meta.web_matches.empty()) meta.needs_manual_search = true;

  const auto path = dir / "meta.json";
  const std::string text = to_json(meta);
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return meta;
}

}  // namespace memaudit
