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

#include "memaudit_cli/app.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "memaudit/bench.hpp"
#include "memaudit/error.hpp"
#include "memaudit/hashing.hpp"
#include "memaudit/mock_backends.hpp"
#include "memaudit/parallel.hpp"
#include "memaudit/review_service.hpp"
#include "memaudit/sampler.hpp"
#include "memaudit/store.hpp"
#include "memaudit/verify.hpp"
#include "memaudit_cli/config.hpp"

namespace memaudit::cli {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string home;
  std::size_t jobs = 1;
  std::string run_id;
  std::vector<std::string> sets;
  bool verbose = false;
  bool quiet = false;
};

// Every model-dependent capability, wired from the config.
struct World {
  std::shared_ptr<const Vocabulary> vocab;
  std::shared_ptr<const DenoiserBackend> denoiser;
  std::shared_ptr<const EnergyFunction> energy;
  std::shared_ptr<const ProposalModel> proposals;
  std::shared_ptr<FileImageStore> images;
  std::shared_ptr<const ImageGenerator> generator;
  std::shared_ptr<const ImageEmbedder> embedder;
  std::shared_ptr<const WebMatchProvider> web;
  std::shared_ptr<const AlignmentScorer> alignment;
  std::shared_ptr<const AestheticScorer> aesthetic;

  SearchBackends search() const { return {proposals, energy}; }
  VerifyBackends verify() const { return {generator, embedder, images, web}; }
  EvaluationBackends evaluation() const { return {generator, embedder, alignment, aesthetic}; }
};

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::string slug(std::string_view text) {
  std::string out;
  for (char c : text) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '-';
  return out;
}

World make_world(const Config& cfg, const StoreLayout& layout) {
  World w;
  const auto words = cfg.get_strings("backend.words");
  w.vocab = std::make_shared<const Vocabulary>(words);
  const std::string kind = cfg.get_string("backend.kind");
  std::vector<std::string> default_triggers;
  if (kind == "planted") {
    PlantedSpace space;
    space.words = words;
    space.planted = cfg.get_strings("backend.planted");
    space.peak = cfg.get_double("backend.peak");
    space.seed = cfg.get_uint("seed");
    if (space.planted.empty()) throw ConfigError("backend.planted must not be empty");
    for (const auto& p : space.planted)
      if (!w.vocab->find(p)) throw ConfigError("planted word '" + p + "' is not in backend.words");
    if (space.planted.size() != cfg.get_uint("sampler.length"))
      spdlog::warn("sampler.length {} differs from the planted prompt length {}", cfg.get_uint("sampler.length"),
                   space.planted.size());
    w.denoiser = LinearMockDenoiser::from_energy("planted-mock", planted_energy(space));
    default_triggers.push_back(join_words(space.planted));
  } else if (kind == "bag_of_words") {
    w.denoiser = LinearMockDenoiser::bag_of_words(words, cfg.get_uint("backend.max_tokens"));
  } else if (kind == "external") {
    const auto runtime = cfg.get_string("backend.runtime");
    w.denoiser = std::make_shared<UnavailableDenoiser>(runtime.empty() ? "external" : runtime);
  } else {
    throw ConfigError("backend.kind must be planted, bag_of_words or external, got '" + kind + "'");
  }

  EnergyConfig ecfg;
  ecfg.samples = cfg.get_uint("energy.samples");
  ecfg.temperature = cfg.get_double("sampler.temperature");
  ecfg.seed_policy = parse_seed_policy(cfg.get_string("energy.seed_policy"));
  ecfg.base_seed = cfg.get_uint("seed");
  validate(ecfg);
  w.energy = std::make_shared<const EnergyFunction>(w.denoiser, ecfg);
  w.proposals = TableProposalModel::uniform(w.vocab);

  w.images = std::make_shared<FileImageStore>(layout.image_store_dir());
  MockGeneratorConfig gcfg;
  auto triggers = cfg.get_strings("generator.triggers");
  if (triggers.empty()) triggers = default_triggers;
  gcfg.memorization_rate = cfg.get_double("generator.memorization_rate");
  gcfg.extra_word_decay = cfg.get_double("generator.extra_word_decay");
  gcfg.image_bytes = cfg.get_uint("generator.image_bytes");
  gcfg.fail_every = static_cast<int>(cfg.get_uint("generator.fail_every"));
  std::map<std::string, std::vector<WebMatch>> matches;
  const std::string prefix = cfg.get_string("web.url_prefix");
  for (const auto& t : triggers) {
    gcfg.memorized[t] = synthetic_image(t, gcfg.image_bytes);
    const std::string url = prefix + slug(t);
    matches[make_image_ref(gcfg.memorized[t]).id].push_back(WebMatch{url, url + "?thumbnail=1", 1.0});
  }
  w.generator = std::make_shared<MockImageGenerator>(w.images, gcfg);
  w.embedder = std::make_shared<HashEmbedder>(w.images, cfg.get_uint("embedder.dim"));
  if (cfg.get_bool("web.enabled")) w.web = std::make_shared<TableWebMatchProvider>(std::move(matches));
  w.alignment = std::make_shared<ConstantAlignmentScorer>(cfg.get_double("bench.clip"));
  w.aesthetic = std::make_shared<ConstantAestheticScorer>(cfg.get_double("bench.aesthetic"));
  return w;
}

SamplerConfig sampler_config(const Config& cfg) {
  SamplerConfig s;
  s.iterations = cfg.get_uint("sampler.iterations");
  s.proposals = cfg.get_uint("sampler.proposals");
  s.temperature = cfg.get_double("sampler.temperature");
  s.kappa = cfg.get_double("sampler.kappa");
  s.max_outer = cfg.get_uint("sampler.max_outer");
  s.length = cfg.get_uint("sampler.length");
  s.rng_seed = cfg.get_uint("seed");
  s.check_every_step = cfg.get_bool("sampler.check_every_step");
  validate(s);
  return s;
}

ClusterConfig cluster_config(const Config& cfg) {
  ClusterConfig c;
  c.eps = cfg.get_double("verify.eps");
  c.min_nodes = cfg.get_uint("verify.min_nodes");
  c.representatives = cfg.get_uint("verify.representatives");
  return c;
}

// State shared by every command once options are parsed.
struct Session {
  GlobalOptions opts;
  Config cfg;
  StoreLayout layout{"."};
  std::ostream* out = nullptr;
  std::string run_id;
  fs::path run_dir;

  void begin_run(const std::string& command, const std::string& fingerprint) {
    run_id = opts.run_id.empty()
                 ? command + "-" + to_hex(fnv1a64(cfg.dump() + "\n" + command + "\n" + fingerprint)).substr(0, 12)
                 : opts.run_id;
    run_dir = layout.run_dir(run_id);
    fs::create_directories(run_dir);
    write_text(run_dir / "config.toml", cfg.dump());
    ordered_json cmd{{"command", command}, {"arguments", fingerprint}, {"run_id", run_id}};
    write_text(run_dir / "command.json", cmd.dump(2) + "\n");
    spdlog::info("run {} in {}", run_id, run_dir.string());
  }

  static void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
  }
};

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

// Regenerates a prompt, clusters the batch and enqueues it when it qualifies.
std::optional<CandidateMeta> verify_prompt(Session& s, const World& w, const std::string& prompt,
                                           EnergyScore score, const Provenance& provenance, ClusterReport* report_out) {
  const auto seed = derive_seed(s.cfg.get_uint("seed"), {fnv1a64(prompt)});
  const auto batch = build_candidate_batch(prompt, std::move(score), w.verify(), s.cfg.get_uint("verify.generations"),
                                           seed);
  ClusterReport report = cluster_generations(batch, cluster_config(s.cfg));
  if (report_out) *report_out = report;
  spdlog::info("verify '{}': largest cluster {} of {} ({})", prompt, report.largest_size(), batch.images.size(),
               report.qualifying ? "qualifying" : "not qualifying");
  if (!report.qualifying) return std::nullopt;
  ExportOptions opt{s.layout.queue_dir(), s.cfg.get_string("model_id"), provenance};
  return export_candidates(report, batch, w.verify(), opt);
}

ordered_json cluster_json(const ClusterReport& r) {
  ordered_json sizes = ordered_json::object();
  for (const auto& [label, size] : r.cluster_sizes) sizes[std::to_string(label)] = size;
  ordered_json reps = ordered_json::array();
  for (const auto& ref : r.representatives) reps.push_back(ref.id);
  return {{"qualifying", r.qualifying},
          {"largest_cluster", r.largest_cluster},
          {"largest_size", r.largest_size()},
          {"cluster_sizes", std::move(sizes)},
          {"representatives", std::move(reps)}};
}

void write_trace(Session& s, const World& w, const ChainTrace& trace, const std::string& name) {
  std::ostringstream ss;
  write_trace_jsonl(trace, *w.vocab, ss);
  Session::write_text(s.run_dir / "traces" / name, ss.str());
}

std::string chain_file(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chain-%03zu.jsonl", k);
  return buf;
}

int cmd_search(Session& s) {
  s.begin_run("search", "");
  const World w = make_world(s.cfg, s.layout);
  const SamplerConfig sc = sampler_config(s.cfg);
  const std::size_t chains = s.cfg.get_uint("sampler.chains");
  if (chains == 0) throw ConfigError("sampler.chains must be at least 1");

  std::vector<ChainResult> results(chains);
  parallel_for(chains, s.opts.jobs, [&](std::size_t k) { results[k] = run_masked_prior_search(sc, w.search(), k); });

  ordered_json summary;
  summary["run_id"] = s.run_id;
  ordered_json chain_rows = ordered_json::array();
  std::vector<std::size_t> converged;
  for (std::size_t k = 0; k < chains; ++k) {
    const auto& t = results[k].trace;
    write_trace(s, w, t, chain_file(k));
    const std::string text = render_without_specials(t.best, *w.vocab);
    chain_rows.push_back({{"chain_id", k},
                          {"best", text},
                          {"d_theta", t.best_value()},
                          {"converged", t.converged},
                          {"steps", t.steps.size()},
                          {"energy_evaluations", t.energy_evaluations}});
    *s.out << "chain " << k << ": " << (t.converged ? "converged" : "not converged") << " best=\"" << text
           << "\" d_theta=" << t.best_value() << " oracle_calls=" << t.energy_evaluations << "\n";
    if (t.converged) converged.push_back(k);
  }
  summary["chains"] = std::move(chain_rows);

  std::set<std::string> seen;
  ordered_json candidates = ordered_json::array();
  for (std::size_t k : converged) {
    const auto& t = results[k].trace;
    const std::string text = render_without_specials(t.best, *w.vocab);
    if (!seen.insert(text).second || !t.best_score) continue;
    auto meta = verify_prompt(s, w, text, *t.best_score, Provenance{ProvenanceKind::masked_prior, ""}, nullptr);
    if (!meta) continue;
    candidates.push_back({{"id", meta->id}, {"prompt", meta->prompt}, {"d_theta", meta->d_theta}});
    *s.out << "enqueued " << meta->id << " \"" << meta->prompt << "\"\n";
  }
  summary["candidates"] = candidates;
  Session::write_text(s.run_dir / "search.json", summary.dump(2) + "\n");
  if (converged.empty()) {
    *s.out << "no chain reached kappa=" << sc.kappa << "\n";
    return kExitNotConverged;
  }
  if (candidates.empty()) *s.out << "no converged prompt passed verification\n";
  return kExitOk;
}

struct SeedPrompt {
  std::string id;
  std::string text;
};

SeedPrompt find_prompt(const Session& s, const std::string& id) {
  ReviewQueue queue(s.layout);
  if (auto meta = queue.find(id)) return {meta->id, meta->prompt};
  const auto loaded = load_dataset(s.layout.dataset_dir(s.cfg.get_string("model_id")), s.cfg.get_string("model_id"));
  for (const auto& p : loaded.dataset.prompts)
    if (p.id == id) return {p.id, p.prompt};
  throw NotFoundError("no queued candidate or dataset prompt with id '" + id + "'");
}

int cmd_augment(Session& s, const std::string& seed_id, bool verify) {
  s.begin_run("augment", seed_id + (verify ? "" : " --no-verify"));
  const World w = make_world(s.cfg, s.layout);
  const SeedPrompt seed = find_prompt(s, seed_id);
  const PromptState state(w.vocab->tokenize(seed.text));
  SamplerConfig sc = sampler_config(s.cfg);
  AugmentationConfig ac;
  ac.pool_size = s.cfg.get_uint("augment.pool_size");
  ac.per_seed = s.cfg.get_uint("augment.per_seed");
  ac.jobs = s.opts.jobs;
  const auto result = run_augmentation(state, sc, ac, w.search());
  for (std::size_t k = 0; k < result.traces.size(); ++k) write_trace(s, w, result.traces[k], chain_file(k));

  std::string lines;
  for (const auto& p : result.selected) {
    lines += ordered_json{{"prompt", p.text}, {"d_theta", p.score->value}, {"seed_id", seed.id}}.dump() + "\n";
    *s.out << p.score->value << "\t" << p.text << "\n";
  }
  Session::write_text(s.run_dir / "augmented.jsonl", lines);
  if (result.selected.empty())
    *s.out << "chains never left the seed prompt; a higher sampler.temperature flattens the landscape\n";
  if (verify)
    for (const auto& p : result.selected)
      if (auto meta = verify_prompt(s, w, p.text, *p.score, Provenance{ProvenanceKind::augmentation, seed.id}, nullptr))
        *s.out << "enqueued " << meta->id << " \"" << meta->prompt << "\"\n";
  return kExitOk;
}

int cmd_greedy(Session& s, const std::string& corpus_path, std::size_t top_k) {
  s.begin_run("greedy", corpus_path + " " + std::to_string(top_k));
  const World w = make_world(s.cfg, s.layout);
  const auto corpus = read_lines(corpus_path);
  if (corpus.empty()) throw ConfigError("corpus " + corpus_path + " has no prompts");
  const auto ranked = greedy_corpus_search(corpus, top_k, *w.energy);
  std::string lines;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& e = ranked[r];
    lines += ordered_json{{"rank", r + 1},
                          {"corpus_index", e.corpus_index},
                          {"prompt", corpus[e.corpus_index]},
                          {"d_theta", e.score.value}}
                 .dump() +
             "\n";
    *s.out << r + 1 << "\t" << e.score.value << "\t" << corpus[e.corpus_index] << "\n";
  }
  Session::write_text(s.run_dir / "greedy.jsonl", lines);
  return kExitOk;
}

int cmd_verify(Session& s, const std::string& candidate_id, const std::string& prompt_text) {
  if (candidate_id.empty() == prompt_text.empty()) throw ConfigError("give exactly one of --candidate-id or --prompt");
  s.begin_run("verify", candidate_id.empty() ? "prompt:" + prompt_text : candidate_id);
  const World w = make_world(s.cfg, s.layout);
  std::string text = prompt_text;
  Provenance provenance{ProvenanceKind::imported, ""};
  if (!candidate_id.empty()) {
    ReviewQueue queue(s.layout);
    if (auto meta = queue.find(candidate_id)) {
      text = meta->prompt;
      provenance = meta->provenance;
    } else {
      text = find_prompt(s, candidate_id).text;
    }
  }
  ClusterReport report;
  auto meta = verify_prompt(s, w, text, (*w.energy)(text), provenance, &report);
  ordered_json j{{"prompt", text}, {"cluster", cluster_json(report)}};
  if (meta) j["candidate_id"] = meta->id;
  Session::write_text(s.run_dir / "verify.json", j.dump(2) + "\n");
  *s.out << j.dump(2) << "\n";
  return kExitOk;
}

std::vector<TriggerPrompt> trigger_prompts(const Session& s, const World& w) {
  const std::string model = s.cfg.get_string("model_id");
  const auto loaded = load_dataset(s.layout.dataset_dir(model), model);
  std::map<std::string, const MemorizedImageRecord*> images;
  for (const auto& img : loaded.dataset.images) images[img.id] = &img;
  std::vector<TriggerPrompt> out;
  for (const auto& p : loaded.dataset.prompts) {
    if (p.status != PromptStatus::verified) continue;
    TriggerPrompt tp{p.id, p.prompt, {}};
    for (const auto& id : p.memorized_image_ids) {
      auto it = images.find(id);
      if (it == images.end()) throw ValidationError("prompt " + p.id + " links unknown image " + id);
      const auto& rec = *it->second;
      if (!rec.embedding.empty())
        tp.references.push_back(make_embedding(rec.embedding, EmbeddingKind::copy_detection));
      else if (rec.embedding_ref)
        tp.references.push_back(w.embedder->embed_image(ImageRef{*rec.embedding_ref}, EmbeddingKind::copy_detection));
    }
    if (tp.references.empty()) {
      spdlog::warn("verified prompt {} has no reference embedding; skipped", p.id);
      continue;
    }
    out.push_back(std::move(tp));
  }
  if (out.empty()) throw ConfigError("dataset for model '" + model + "' has no verified prompts with references");
  std::ranges::sort(out, {}, &TriggerPrompt::id);
  return out;
}

struct BenchArgs {
  std::string plugin = "identity";
  std::vector<std::string> params;
  std::string scenario = "trigger";
  std::string format = "table";
  std::string prompts;
};

PluginParams parse_params(const std::vector<std::string>& items) {
  PluginParams params;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param must look like key=value, got '" + item + "'");
    params[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return params;
}

int cmd_bench(Session& s, const BenchArgs& a) {
  const PluginParams params = parse_params(a.params);
  const Scenario scenario = parse_scenario(a.scenario);
  const ReportFormat format = parse_report_format(a.format);
  std::string fingerprint = a.plugin + " " + a.scenario;
  for (const auto& [k, v] : params) fingerprint += " " + k + "=" + v;
  if (!a.prompts.empty()) fingerprint += " prompts=" + a.prompts;

  const World w0 = make_world(s.cfg, s.layout);
  auto plugin = make_plugin(a.plugin, params, w0.vocab);
  s.begin_run("bench", fingerprint);
  const World& w = w0;

  BenchConfig bc;
  bc.images_per_prompt = s.cfg.get_uint("bench.images_per_prompt");
  bc.guidance_scale = s.cfg.get_double("bench.guidance_scale");
  bc.steps = static_cast<int>(s.cfg.get_uint("bench.steps"));
  bc.run_seed = s.cfg.get_uint("seed");
  bc.threshold = s.cfg.get_double("bench.threshold");
  bc.jobs = s.opts.jobs;

  BenchmarkReport report;
  if (scenario == Scenario::trigger) {
    const auto prompts = trigger_prompts(s, w);
    report = evaluate_trigger_scenario(prompts, w.evaluation(), plugin.get(), bc);
  } else {
    std::string path = a.prompts.empty() ? s.cfg.get_string("bench.general_prompts") : a.prompts;
    if (path.empty()) throw ConfigError("general scenario needs --prompts or bench.general_prompts");
    const auto prompts = read_lines(path);
    report = evaluate_general_scenario(prompts, w.evaluation(), plugin.get(), bc);
  }
  const std::string json = report_to_json(report);
  Session::write_text(s.run_dir / "report.json", json);
  if (format == ReportFormat::json)
    *s.out << json;
  else
    *s.out << render_report(std::span(&report, 1), format);
  return kExitOk;
}

int cmd_report(Session& s, const std::vector<std::string>& runs, const std::string& format_text) {
  const ReportFormat format = parse_report_format(format_text);
  std::vector<BenchmarkReport> reports;
  for (const auto& r : runs) {
    fs::path p = r;
    if (!fs::exists(p)) p = s.layout.run_dir(r);
    if (fs::is_directory(p)) p /= "report.json";
    if (!fs::exists(p)) throw ConfigError("no report found for '" + r + "'");
    reports.push_back(report_from_json(read_text(p)));
  }
  if (reports.empty()) throw ConfigError("report needs at least one run");
  *s.out << render_report(reports, format);
  return kExitOk;
}

int cmd_serve(Session& s, std::optional<int> port_flag, const std::string& host_flag) {
  ReviewServiceConfig rc;
  rc.allowed_origin = s.cfg.get_string("review.origin");
  if (auto token = s.cfg.get_string("review.token"); !token.empty()) rc.token = token;
  const int port = port_flag.value_or(static_cast<int>(s.cfg.get_uint("review.port")));
  const std::string host = host_flag.empty() ? s.cfg.get_string("review.host") : host_flag;
  ReviewServer server(s.layout, rc);
  *s.out << "serving review queue from " << s.layout.queue_dir().string() << " on http://" << host << ":" << port
         << std::endl;
  if (!server.listen(host, port)) {
    spdlog::error("cannot listen on {}:{}", host, port);
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_label(Session& s, const std::string& decisions_path) {
  s.begin_run("label", decisions_path);
  const auto lines = read_lines(decisions_path);
  ReviewQueue queue(s.layout);
  std::vector<DecisionRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      auto r = parse_decision_record(lines[i]);
      validate(r);
      if (!queue.find(r.candidate_id)) throw NotFoundError("unknown candidate '" + r.candidate_id + "'");
      records.push_back(std::move(r));
    } catch (const Error& e) {
      throw ValidationError(decisions_path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  for (auto& r : records) {
    const auto stored = queue.log().append(std::move(r));
    *s.out << "decision " << stored.seq << ": " << stored.candidate_id << " " << to_string(stored.decision) << "\n";
  }
  const std::string model = s.cfg.get_string("model_id");
  const fs::path dir = s.layout.dataset_dir(model);
  auto loaded = load_dataset(dir, model);
  loaded.dataset.model_id = model;
  const auto candidates = queue.candidates();
  Dataset updated = apply_queue(std::move(loaded.dataset), candidates, queue.state());
  validate(updated);
  save_dataset(dir, updated);
  const auto st = dataset_stats(updated.prompts, updated.images);
  *s.out << "dataset " << model << ": " << st.verified << " verified, " << st.rejected << " rejected, "
         << st.candidates << " pending, " << st.memorized_images << " memorized images\n";
  return kExitOk;
}

void configure_logging(std::ostream& err, bool verbose, bool quiet) {
  (void)err;
  auto logger = spdlog::get("memaudit");
  if (!logger) {
    logger = spdlog::stderr_logger_mt("memaudit");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trigger-prompt search, verification and mitigation benchmarking for text-to-image models",
               "memaudit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "TOML config file")->check(CLI::ExistingFile);
  app.add_option("--home", g.home, "Data root (default $MEMAUDIT_HOME or ./memaudit-data)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--run-id", g.run_id, "Run directory name (default derived from the config)");
  app.add_option("--set", g.sets, "Override a config key: table.key=value (repeatable)");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Warnings and errors only");

  auto* search = app.add_subcommand("search", "Masked-prior chains; verify and enqueue converged prompts");

  auto* augment = app.add_subcommand("augment", "Multi-chain augmentation around a seed prompt");
  std::string seed_id;
  bool no_verify = false;
  augment->add_option("--seed-prompt-id", seed_id, "Queued candidate or dataset prompt id")->required();
  augment->add_flag("--no-verify", no_verify, "Skip regeneration and clustering of the selected prompts");

  auto* greedy = app.add_subcommand("greedy", "Exact top-k of a prompt corpus by D_theta");
  std::string corpus;
  std::size_t top_k = kGreedyBaselineTopK;
  greedy->add_option("--corpus", corpus, "One prompt per line")->required()->check(CLI::ExistingFile);
  greedy->add_option("--top-k", top_k, "Prompts kept")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Regenerate and cluster one prompt");
  std::string candidate_id, prompt_text;
  verify->add_option("--candidate-id", candidate_id, "Queued candidate or dataset prompt id");
  verify->add_option("--prompt", prompt_text, "Verify this text instead");

  auto* bench = app.add_subcommand("bench", "Evaluate a mitigation plugin");
  BenchArgs bench_args;
  bench->add_option("--plugin", bench_args.plugin, "identity, rna or rta");
  bench->add_option("--param", bench_args.params, "Plugin parameter key=value (repeatable)");
  bench->add_option("--scenario", bench_args.scenario, "trigger or general");
  bench->add_option("--format", bench_args.format, "table, json or csv");
  bench->add_option("--prompts", bench_args.prompts, "General-scenario prompt file");

  auto* report = app.add_subcommand("report", "Comparison table over benchmark runs");
  std::vector<std::string> runs;
  std::string report_format = "table";
  report->add_option("--runs", runs, "Run ids or run directories")->required();
  report->add_option("--format", report_format, "table, json or csv");

  auto* serve = app.add_subcommand("serve-review", "Serve the review queue over HTTP");
  std::optional<int> port;
  std::string host;
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");

  auto* label = app.add_subcommand("label", "Import reviewer decisions and update the dataset");
  std::string decisions;
  label->add_option("--decisions", decisions, "JSONL decision records")->required()->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  configure_logging(err, g.verbose, g.quiet);
  Session s;
  s.opts = g;
  s.out = &out;
  try {
    s.cfg = default_config();
    if (!g.config_path.empty()) {
      Config file = Config::load(g.config_path);
      check_known_keys(file);
      s.cfg.merge(file);
    }
    for (const auto& assignment : g.sets) s.cfg.apply_override(assignment);
    check_known_keys(s.cfg);
    s.layout = StoreLayout(g.home.empty() ? default_home() : fs::path(g.home));

    if (*search) return cmd_search(s);
    if (*augment) return cmd_augment(s, seed_id, !no_verify);
    if (*greedy) return cmd_greedy(s, corpus, top_k);
    if (*verify) return cmd_verify(s, candidate_id, prompt_text);
    if (*bench) return cmd_bench(s, bench_args);
    if (*report) return cmd_report(s, runs, report_format);
    if (*serve) return cmd_serve(s, port, host);
    if (*label) return cmd_label(s, decisions);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    if (*bench) err << "\n" << bench->help();
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NotFoundError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace memaudit::cli
