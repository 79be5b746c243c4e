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

#include "memaudit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"
#include "memaudit/parallel.hpp"

namespace memaudit {

using nlohmann::ordered_json;

std::string_view to_string(MitigationKind kind) {
  switch (kind) {
    case MitigationKind::prompt_rewrite: return "prompt_rewrite";
    case MitigationKind::embedding_transform: return "embedding_transform";
    case MitigationKind::attention_hook: return "attention_hook";
  }
  return "prompt_rewrite";
}

std::string_view to_string(Scenario scenario) { return scenario == Scenario::trigger ? "trigger" : "general"; }

Scenario parse_scenario(std::string_view text) {
  if (text == "trigger") return Scenario::trigger;
  if (text == "general") return Scenario::general;
  throw ConfigError("scenario must be 'trigger' or 'general', got '" + std::string(text) + "'");
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "table") return ReportFormat::table;
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  throw ConfigError("format must be json, table or csv, got '" + std::string(text) + "'");
}

namespace {

constexpr std::uint64_t kMaxRandomNumber = 1'000'000;

std::string insert_words(std::string_view prompt, std::size_t n, Rng& rng,
                         const std::function<std::string(Rng&)>& draw) {
  if (n == 0) return std::string(prompt);
  auto words = split_words(prompt);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t pos = rng.index(words.size() + 1);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), draw(rng));
  }
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace

std::string rna_augment(std::string_view prompt, std::size_t n, Rng& rng) {
  return insert_words(prompt, n, rng, [](Rng& r) { return std::to_string(r.between(0, kMaxRandomNumber)); });
}

std::string rta_augment(std::string_view prompt, std::size_t n, Rng& rng, const Vocabulary& vocab) {
  const auto ids = vocab.regular_ids();
  return insert_words(prompt, n, rng, [&](Rng& r) { return vocab.token(ids[r.index(ids.size())]); });
}

GenerationRequest RandomNumberPlugin::apply(GenerationRequest request, std::uint64_t seed) const {
  Rng rng(seed);
  request.prompt = rna_augment(request.prompt, n_, rng);
  return request;
}

GenerationRequest RandomTokenPlugin::apply(GenerationRequest request, std::uint64_t seed) const {
  Rng rng(seed);
  request.prompt = rta_augment(request.prompt, n_, rng, *vocab_);
  return request;
}

namespace {

std::size_t count_param(const PluginParams& params, std::string_view plugin) {
  for (const auto& [key, value] : params)
    if (key != "n") throw ConfigError("plugin '" + std::string(plugin) + "' has no parameter '" + key + "'");
  auto it = params.find("n");
  if (it == params.end()) return 1;
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != it->second.size() || v < 0 || v > 1000)
    throw ConfigError("plugin parameter n must be an integer in [0, 1000], got '" + it->second + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<std::string> plugin_names() { return {"identity", "rna", "rta"}; }

std::shared_ptr<const MitigationPlugin> make_plugin(std::string_view name, const PluginParams& params,
                                                    std::shared_ptr<const Vocabulary> vocab) {
  if (name == "identity") {
    if (!params.empty()) throw ConfigError("plugin 'identity' takes no parameters");
    return std::make_shared<IdentityPlugin>();
  }
  if (name == "rna") return std::make_shared<RandomNumberPlugin>(count_param(params, name));
  if (name == "rta") {
    if (!vocab) throw ConfigError("plugin 'rta' needs the proposal vocabulary");
    return std::make_shared<RandomTokenPlugin>(count_param(params, name), std::move(vocab));
  }
  throw ConfigError("unknown plugin '" + std::string(name) + "' (known: identity, rna, rta)");
}

MetricsRow prompt_metrics(std::string prompt_id, std::vector<ImageScore> images, double threshold) {
  MetricsRow row;
  row.prompt_id = std::move(prompt_id);
  row.images = std::move(images);
  if (row.images.empty()) return row;
  std::vector<double> sscd;
  sscd.reserve(row.images.size());
  double clip = 0.0, aesthetic = 0.0;
  for (const auto& img : row.images) {
    sscd.push_back(img.sscd);
    clip += img.clip;
    aesthetic += img.aesthetic;
    if (img.sscd > threshold) ++row.over_threshold;
  }
  std::ranges::sort(sscd, std::greater<>());
  row.top1_sscd = sscd.front();
  const std::size_t top = std::min<std::size_t>(3, sscd.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < top; ++i) sum += sscd[i];
  row.top3_sscd_mean = sum / static_cast<double>(top);
  row.any_over_threshold = row.over_threshold > 0;
  row.clip_mean = clip / static_cast<double>(row.images.size());
  row.aesthetic_mean = aesthetic / static_cast<double>(row.images.size());
  return row;
}

double max_reference_similarity(const EmbeddingVector& image, std::span<const EmbeddingVector> refs) {
  if (refs.empty()) throw ContractError("no reference images to compare against");
  double best = -1.0;
  for (const auto& r : refs) best = std::max(best, similarity(image, r));
  return best;
}

Aggregate aggregate_rows(std::vector<MetricsRow>& rows, double threshold) {
  std::ranges::sort(rows, [](const MetricsRow& a, const MetricsRow& b) { return a.prompt_id < b.prompt_id; });
  Aggregate agg;
  agg.prompts = rows.size();
  std::size_t over = 0;
  double clip = 0.0, aesthetic = 0.0, top1 = 0.0, top3 = 0.0;
  for (const auto& row : rows) {
    top1 += row.top1_sscd;
    top3 += row.top3_sscd_mean;
    for (const auto& img : row.images) {
      ++agg.images;
      if (img.sscd > threshold) ++over;
      clip += img.clip;
      aesthetic += img.aesthetic;
    }
  }
  if (agg.prompts > 0) {
    agg.top1_sscd = top1 / static_cast<double>(agg.prompts);
    agg.top3_sscd = top3 / static_cast<double>(agg.prompts);
  }
  if (agg.images > 0) {
    agg.frac_over_threshold = static_cast<double>(over) / static_cast<double>(agg.images);
    agg.clip = clip / static_cast<double>(agg.images);
    agg.aesthetic = aesthetic / static_cast<double>(agg.images);
  }
  return agg;
}

namespace {

void require_backends(const EvaluationBackends& b, bool need_embedder) {
  if (!b.generator || !b.alignment || !b.aesthetic || (need_embedder && !b.embedder))
    throw ContractError("evaluation backends are incomplete");
}

std::map<std::string, std::string> snapshot(const BenchConfig& cfg, const EvaluationBackends& b,
                                            Scenario scenario) {
  auto fmt = [](double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
  };
  std::map<std::string, std::string> out{
      {"scenario", std::string(to_string(scenario))},
      {"guidance_scale", fmt(cfg.guidance_scale)},
      {"steps", std::to_string(cfg.steps)},
      {"run_seed", std::to_string(cfg.run_seed)},
      {"generator", b.generator->name()},
      {"alignment_scorer", b.alignment->name()},
      {"aesthetic_scorer", b.aesthetic->name()},
  };
  if (scenario == Scenario::trigger) {
    out["images_per_prompt"] = std::to_string(cfg.images_per_prompt);
    out["threshold"] = fmt(cfg.threshold);
    out["copy_detection_embedder"] = b.embedder->name();
  }
  return out;
}

GenerationRequest prepare_request(const std::string& text, const std::string& prompt_id, std::size_t k,
                                  const MitigationPlugin* plugin, const BenchConfig& cfg) {
  GenerationRequest request;
  request.prompt = text;
  request.image_count = 1;
  request.guidance_scale = cfg.guidance_scale;
  request.steps = cfg.steps;
  request.seed = derive_seed(cfg.run_seed, {fnv1a64(prompt_id), k});
  if (plugin != nullptr) request = plugin->apply(std::move(request), derive_seed(request.seed, {0x706c7567ULL}));
  return request;
}

BenchmarkReport make_report(Scenario scenario, const MitigationPlugin* plugin) {
  BenchmarkReport report;
  report.scenario = scenario;
  IdentityPlugin identity;
  const MitigationPlugin& p = plugin != nullptr ? *plugin : identity;
  report.plugin = p.name();
  report.plugin_params = p.hyperparameters();
  return report;
}

}  // namespace

BenchmarkReport evaluate_trigger_scenario(std::span<const TriggerPrompt> dataset, const EvaluationBackends& backends,
                                          const MitigationPlugin* plugin, const BenchConfig& cfg) {
  require_backends(backends, true);
  if (dataset.empty()) throw ContractError("trigger scenario needs at least one prompt");
  if (cfg.images_per_prompt == 0) throw ConfigError("images_per_prompt must be at least 1");
  for (const auto& p : dataset)
    if (p.references.empty()) throw ContractError("trigger prompt '" + p.id + "' has no reference images");

  std::vector<MetricsRow> rows(dataset.size());
  parallel_for(dataset.size(), cfg.jobs, [&](std::size_t idx) {
    const TriggerPrompt& p = dataset[idx];
    std::vector<ImageScore> scores;
    for (std::size_t k = 0; k < cfg.images_per_prompt; ++k) {
      const auto request = prepare_request(p.text, p.id, k, plugin, cfg);
      const auto result = backends.generator->generate_images(request);
      if (result.images.empty()) {
        spdlog::warn("generation failed for prompt {} image {}", p.id, k);
        continue;
      }
      const ImageRef& img = result.images.front();
      const auto emb = backends.embedder->embed_image(img, EmbeddingKind::copy_detection);
      scores.push_back({img, max_reference_similarity(emb, p.references),
                        backends.alignment->score_alignment(p.text, img), backends.aesthetic->score_aesthetic(img)});
    }
    rows[idx] = prompt_metrics(p.id, std::move(scores), cfg.threshold);
  });

  BenchmarkReport report = make_report(Scenario::trigger, plugin);
  report.aggregate = aggregate_rows(rows, cfg.threshold);
  report.rows = std::move(rows);
  report.config = snapshot(cfg, backends, Scenario::trigger);
  return report;
}

BenchmarkReport evaluate_general_scenario(std::span<const std::string> prompts, const EvaluationBackends& backends,
                                          const MitigationPlugin* plugin, const BenchConfig& cfg) {
  require_backends(backends, false);
  if (prompts.empty()) throw ContractError("general scenario needs at least one prompt");
  std::vector<MetricsRow> rows(prompts.size());
  // Zero-padded ids keep the id order equal to the input order.
  auto id_of = [](std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "g%08zu", i);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const std::string id = id_of(i);
    const auto request = prepare_request(prompts[i], id, 0, plugin, cfg);
    const auto result = backends.generator->generate_images(request);
    std::vector<ImageScore> scores;
    if (!result.images.empty()) {
      const ImageRef& img = result.images.front();
      scores.push_back({img, 0.0, backends.alignment->score_alignment(prompts[i], img),
                        backends.aesthetic->score_aesthetic(img)});
    }
    MetricsRow row;
    row.prompt_id = id;
    row.images = std::move(scores);
    if (!row.images.empty()) {
      row.clip_mean = row.images.front().clip;
      row.aesthetic_mean = row.images.front().aesthetic;
    }
    rows[i] = std::move(row);
  }
  BenchmarkReport report = make_report(Scenario::general, plugin);
  report.aggregate = aggregate_rows(rows, cfg.threshold);
  report.aggregate.top1_sscd = report.aggregate.top3_sscd = report.aggregate.frac_over_threshold = 0.0;
  report.rows = std::move(rows);
  report.config = snapshot(cfg, backends, Scenario::general);
  return report;
}

std::string report_to_json(const BenchmarkReport& r) {
  const bool trigger = r.scenario == Scenario::trigger;
  ordered_json j;
  j["schema_version"] = 1;
  j["scenario"] = to_string(r.scenario);
  j["plugin"] = r.plugin;
  j["plugin_params"] = r.plugin_params;
  ordered_json agg;
  agg["prompts"] = r.aggregate.prompts;
  agg["images"] = r.aggregate.images;
  if (trigger) {
    agg["top1_sscd"] = r.aggregate.top1_sscd;
    agg["top3_sscd"] = r.aggregate.top3_sscd;
    agg["frac_over_threshold"] = r.aggregate.frac_over_threshold;
  }
  agg["clip"] = r.aggregate.clip;
  agg["aesthetic"] = r.aggregate.aesthetic;
  j["aggregate"] = std::move(agg);
  j["reference"] = {{"top1_sscd", r.reference.top1_sscd},
                    {"clip", r.reference.clip},
                    {"provenance", r.reference.provenance}};
  j["config"] = r.config;
  ordered_json rows = ordered_json::array();
  for (const auto& row : r.rows) {
    ordered_json jr;
    jr["prompt_id"] = row.prompt_id;
    if (trigger) {
      jr["top1_sscd"] = row.top1_sscd;
      jr["top3_sscd_mean"] = row.top3_sscd_mean;
      jr["over_threshold"] = row.over_threshold;
      jr["any_over_threshold"] = row.any_over_threshold;
    }
    jr["clip_mean"] = row.clip_mean;
    jr["aesthetic_mean"] = row.aesthetic_mean;
    ordered_json imgs = ordered_json::array();
    for (const auto& img : row.images) {
      ordered_json ji;
      ji["image"] = img.image.id;
      if (trigger) ji["sscd"] = img.sscd;
      ji["clip"] = img.clip;
      ji["aesthetic"] = img.aesthetic;
      imgs.push_back(std::move(ji));
    }
    jr["images"] = std::move(imgs);
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

BenchmarkReport report_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
  try {
    BenchmarkReport r;
    r.scenario = parse_scenario(j.at("scenario").get<std::string>());
    r.plugin = j.at("plugin").get<std::string>();
    r.plugin_params = j.value("plugin_params", PluginParams{});
    const auto& agg = j.at("aggregate");
    r.aggregate.prompts = agg.value("prompts", std::size_t{0});
    r.aggregate.images = agg.value("images", std::size_t{0});
    r.aggregate.top1_sscd = agg.value("top1_sscd", 0.0);
    r.aggregate.top3_sscd = agg.value("top3_sscd", 0.0);
    r.aggregate.frac_over_threshold = agg.value("frac_over_threshold", 0.0);
    r.aggregate.clip = agg.value("clip", 0.0);
    r.aggregate.aesthetic = agg.value("aesthetic", 0.0);
    if (j.contains("reference")) {
      r.reference.top1_sscd = j["reference"].value("top1_sscd", r.reference.top1_sscd);
      r.reference.clip = j["reference"].value("clip", r.reference.clip);
      r.reference.provenance = j["reference"].value("provenance", r.reference.provenance);
    }
    r.config = j.value("config", std::map<std::string, std::string>{});
    for (const auto& jr : j.value("rows", ordered_json::array())) {
      MetricsRow row;
      row.prompt_id = jr.at("prompt_id").get<std::string>();
      row.top1_sscd = jr.value("top1_sscd", 0.0);
      row.top3_sscd_mean = jr.value("top3_sscd_mean", 0.0);
      row.over_threshold = jr.value("over_threshold", std::size_t{0});
      row.any_over_threshold = jr.value("any_over_threshold", false);
      row.clip_mean = jr.value("clip_mean", 0.0);
      row.aesthetic_mean = jr.value("aesthetic_mean", 0.0);
      for (const auto& ji : jr.value("images", ordered_json::array()))
        row.images.push_back({ImageRef{ji.at("image").get<std::string>()}, ji.value("sscd", 0.0),
                              ji.value("clip", 0.0), ji.value("aesthetic", 0.0)});
      r.rows.push_back(std::move(row));
    }
    return r;
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

namespace {

struct TableRow {
  std::string method;
  std::string setting;
  std::optional<Aggregate> trigger;
  std::optional<Aggregate> general;
  std::optional<double> ref_top1;
  std::optional<double> ref_clip;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string setting_of(const PluginParams& params) {
  std::string out;
  for (const auto& [k, v] : params) {
    if (!out.empty()) out += ", ";
    out += k + " = " + v;
  }
  return out;
}

// Numeric-aware ordering so "n = 10" sorts after "n = 9".
bool params_less(const PluginParams& a, const PluginParams& b) {
  auto ia = a.begin(), ib = b.begin();
  for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return ia->first < ib->first;
    if (ia->second == ib->second) continue;
    char* ea = nullptr;
    char* eb = nullptr;
    const double da = std::strtod(ia->second.c_str(), &ea);
    const double db = std::strtod(ib->second.c_str(), &eb);
    if (*ea == '\0' && *eb == '\0' && !ia->second.empty() && !ib->second.empty()) return da < db;
    return ia->second < ib->second;
  }
  return a.size() < b.size();
}

std::vector<std::vector<std::string>> build_cells(std::span<const BenchmarkReport> reports) {
  std::vector<std::pair<std::pair<std::string, PluginParams>, TableRow>> groups;
  for (const auto& r : reports) {
    auto key = std::make_pair(r.plugin, r.plugin_params);
    auto it = std::ranges::find_if(groups, [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      TableRow row;
      row.method = r.plugin == "identity" ? "Base" : r.plugin;
      row.setting = setting_of(r.plugin_params);
      groups.emplace_back(key, row);
      it = std::prev(groups.end());
    }
    (r.scenario == Scenario::trigger ? it->second.trigger : it->second.general) = r.aggregate;
  }
  std::ranges::stable_sort(groups, [](const auto& a, const auto& b) {
    const bool base_a = a.first.first == "identity", base_b = b.first.first == "identity";
    if (base_a != base_b) return base_a;
    if (a.first.first != b.first.first) return a.first.first < b.first.first;
    return params_less(a.first.second, b.first.second);
  });

  ReferenceRow ref = reports.empty() ? ReferenceRow{} : reports.front().reference;
  TableRow reference{"Reference", "(API search)", std::nullopt, std::nullopt, ref.top1_sscd, ref.clip};

  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Method", "Setting", "Top-1 SSCD", "Top-3 SSCD", "SSCD > 0.5", "CLIP", "Aesthetic", "General CLIP",
                   "General Aesthetic"});
  auto emit = [&](const TableRow& row) {
    const std::string dash = "-";
    std::vector<std::string> c{row.method, row.setting.empty() ? dash : row.setting};
    if (row.trigger) {
      c.push_back(fixed(row.trigger->top1_sscd, 3));
      c.push_back(fixed(row.trigger->top3_sscd, 3));
      c.push_back(fixed(row.trigger->frac_over_threshold, 3));
      c.push_back(fixed(row.trigger->clip, 3));
      c.push_back(fixed(row.trigger->aesthetic, 2));
    } else {
      c.push_back(row.ref_top1 ? fixed(*row.ref_top1, 3) : dash);
      c.push_back(dash);
      c.push_back(dash);
      c.push_back(row.ref_clip ? fixed(*row.ref_clip, 3) : dash);
      c.push_back(dash);
    }
    if (row.general) {
      c.push_back(fixed(row.general->clip, 3));
      c.push_back(fixed(row.general->aesthetic, 2));
    } else {
      c.push_back(dash);
      c.push_back(dash);
    }
    cells.push_back(std::move(c));
  };
  emit(reference);
  for (const auto& g : groups) emit(g.second);
  return cells;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string render_report(std::span<const BenchmarkReport> reports, ReportFormat format) {
  const auto cells = build_cells(reports);
  std::ostringstream out;
  switch (format) {
    case ReportFormat::csv:
      for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_escape(row[i]);
        out << '\n';
      }
      break;
    case ReportFormat::table: {
      std::vector<std::size_t> width(cells.front().size(), 0);
      for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
      auto line = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
          if (i) out << "  ";
          if (i < 2)
            out << row[i] << std::string(width[i] - row[i].size(), ' ');
          else
            out << std::string(width[i] - row[i].size(), ' ') << row[i];
        }
        out << '\n';
      };
      line(cells.front());
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
      for (std::size_t r = 1; r < cells.size(); ++r) line(cells[r]);
      break;
    }
    case ReportFormat::json: {
      ordered_json arr = ordered_json::array();
      const auto& header = cells.front();
      for (std::size_t r = 1; r < cells.size(); ++r) {
        ordered_json o;
        for (std::size_t i = 0; i < header.size(); ++i)
          o[header[i]] = cells[r][i] == "-" ? ordered_json(nullptr) : ordered_json(cells[r][i]);
        arr.push_back(std::move(o));
      }
      out << arr.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

}  // namespace memaudit
