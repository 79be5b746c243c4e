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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memaudit/backends.hpp"
#include "memaudit/random.hpp"
#include "memaudit/verify.hpp"

namespace memaudit {

enum class MitigationKind { prompt_rewrite, embedding_transform, attention_hook };
std::string_view to_string(MitigationKind kind);

using PluginParams = std::map<std::string, std::string>;

// A memorization mitigation applied while a GenerationRequest is prepared.
// prompt_rewrite plugins edit request.prompt and must be pure given the seed;
// the other kinds attach themselves as request.mitigation_hook for a
// generator that knows how to honor them.
class MitigationPlugin {
 public:
  virtual ~MitigationPlugin() = default;
  virtual std::string name() const = 0;
  virtual MitigationKind kind() const = 0;
  virtual PluginParams hyperparameters() const { return {}; }
  virtual GenerationRequest apply(GenerationRequest request, std::uint64_t seed) const = 0;
};

class IdentityPlugin final : public MitigationPlugin {
 public:
  std::string name() const override { return "identity"; }
  MitigationKind kind() const override { return MitigationKind::prompt_rewrite; }
  GenerationRequest apply(GenerationRequest request, std::uint64_t) const override { return request; }
};

// Inserts n random integers in [0, 10^6] at random word boundaries.
std::string rna_augment(std::string_view prompt, std::size_t n, Rng& rng);

// Inserts n tokens drawn uniformly from the vocabulary's regular tokens at
// random word boundaries.
std::string rta_augment(std::string_view prompt, std::size_t n, Rng& rng, const Vocabulary& vocab);

class RandomNumberPlugin final : public MitigationPlugin {
 public:
  explicit RandomNumberPlugin(std::size_t n) : n_(n) {}
  std::string name() const override { return "rna"; }
  MitigationKind kind() const override { return MitigationKind::prompt_rewrite; }
  PluginParams hyperparameters() const override { return {{"n", std::to_string(n_)}}; }
  GenerationRequest apply(GenerationRequest request, std::uint64_t seed) const override;

 private:
  std::size_t n_;
};

class RandomTokenPlugin final : public MitigationPlugin {
 public:
  RandomTokenPlugin(std::size_t n, std::shared_ptr<const Vocabulary> vocab) : n_(n), vocab_(std::move(vocab)) {}
  std::string name() const override { return "rta"; }
  MitigationKind kind() const override { return MitigationKind::prompt_rewrite; }
  PluginParams hyperparameters() const override { return {{"n", std::to_string(n_)}}; }
  GenerationRequest apply(GenerationRequest request, std::uint64_t seed) const override;

 private:
  std::size_t n_;
  std::shared_ptr<const Vocabulary> vocab_;
};

// Names: identity, rna (param n), rta (param n; needs a vocabulary).
// Throws ConfigError for unknown names or bad parameters.
std::shared_ptr<const MitigationPlugin> make_plugin(std::string_view name, const PluginParams& params,
                                                    std::shared_ptr<const Vocabulary> vocab);
std::vector<std::string> plugin_names();

inline constexpr std::size_t kTriggerImagesPerPrompt = 10;
inline constexpr double kCopyThreshold = 0.5;

struct ImageScore {
  ImageRef image;
  double sscd = 0.0;  // max similarity over the prompt's reference images
  double clip = 0.0;
  double aesthetic = 0.0;
};

struct MetricsRow {
  std::string prompt_id;
  double top1_sscd = 0.0;
  double top3_sscd_mean = 0.0;
  std::size_t over_threshold = 0;  // images with sscd > threshold
  bool any_over_threshold = false;
  double clip_mean = 0.0;
  double aesthetic_mean = 0.0;
  std::vector<ImageScore> images;
};

// top1 = max sscd; top3 = mean of the three largest (of all, if fewer).
MetricsRow prompt_metrics(std::string prompt_id, std::vector<ImageScore> images,
                          double threshold = kCopyThreshold);

// Max over references of the cosine similarity. Throws ContractError when
// refs is empty.
double max_reference_similarity(const EmbeddingVector& image, std::span<const EmbeddingVector> refs);

struct BenchConfig {
  std::size_t images_per_prompt = kTriggerImagesPerPrompt;
  double guidance_scale = kDefaultGuidanceScale;
  int steps = kDefaultInferenceSteps;
  std::uint64_t run_seed = 0;
  double threshold = kCopyThreshold;
  std::size_t jobs = 1;  // prompts evaluated concurrently; results do not depend on it
};

struct EvaluationBackends {
  std::shared_ptr<const ImageGenerator> generator;
  std::shared_ptr<const ImageEmbedder> embedder;
  std::shared_ptr<const AlignmentScorer> alignment;
  std::shared_ptr<const AestheticScorer> aesthetic;
};

struct TriggerPrompt {
  std::string id;
  std::string text;
  std::vector<EmbeddingVector> references;  // copy-detection embeddings of its memorized images
};

enum class Scenario { trigger, general };
std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);

struct Aggregate {
  std::size_t prompts = 0;
  std::size_t images = 0;
  double top1_sscd = 0.0;
  double top3_sscd = 0.0;
  double frac_over_threshold = 0.0;  // over images, not prompts
  double clip = 0.0;
  double aesthetic = 0.0;
};

// Published reference performance of the web image search proxy; stored, never
// recomputed.
struct ReferenceRow {
  double top1_sscd = 0.088;
  double clip = 0.310;
  std::string provenance = "published reference performance (image search API proxy)";
};

struct BenchmarkReport {
  Scenario scenario = Scenario::trigger;
  std::string plugin;
  PluginParams plugin_params;
  Aggregate aggregate;
  std::vector<MetricsRow> rows;  // ascending prompt id
  ReferenceRow reference;
  std::map<std::string, std::string> config;  // snapshot of the run settings
};

// Per image k of each prompt: seed = derive(run_seed, prompt id, k); the
// plugin rewrites the request under that seed; one image is generated and
// scored against the prompt's references.
BenchmarkReport evaluate_trigger_scenario(std::span<const TriggerPrompt> dataset, const EvaluationBackends& backends,
                                          const MitigationPlugin* plugin, const BenchConfig& cfg);

// One image per prompt; only alignment and aesthetic are reported. Throws
// ContractError on an empty prompt list.
BenchmarkReport evaluate_general_scenario(std::span<const std::string> prompts, const EvaluationBackends& backends,
                                          const MitigationPlugin* plugin, const BenchConfig& cfg);

// Single-threaded reducer; rows are sorted by prompt id first so the result
// does not depend on prompt order.
Aggregate aggregate_rows(std::vector<MetricsRow>& rows, double threshold);

std::string report_to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(std::string_view text);

enum class ReportFormat { table, json, csv };
ReportFormat parse_report_format(std::string_view text);

// Comparison table: one row per plugin and hyperparameter setting, with the
// reference row first and the identity plugin labelled "Base". Trigger and
// general reports for the same plugin setting share a row.
std::string render_report(std::span<const BenchmarkReport> reports, ReportFormat format);

}  // namespace memaudit
