#include "cforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>

#include <spdlog/spdlog.h>

#include "cforge/analytics.hpp"
#include "cforge/builder.hpp"

namespace cforge {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSeedsFile = "seeds.jsonl";
constexpr const char* kChainsFile = "chains.jsonl";
constexpr const char* kPairsFile = "pairs.jsonl";
constexpr const char* kRecordsFile = "records.jsonl";
constexpr const char* kManifestFile = "training_manifest.json";
constexpr const char* kSummaryFile = "run_summary.json";
constexpr const char* kErrorFile = "error_report.json";

fs::path Resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

// Runs fn(i) for i in [0, count) on up to `workers` threads.
void ParallelFor(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
}

template <typename T>
T Get(const Json& json, const char* key, const T& fallback) {
  if (!json.contains(key) || json[key].is_null()) return fallback;
  try {
    return json[key].get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::kConfig, std::string("config field '") + key + "' has the wrong type");
  }
}

void RejectUnknown(const Json& json, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, value] : json.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw Error(ErrorCode::kConfig, std::string("unknown ") + where + " key '" + key + "'");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// PipelineConfig

PipelineConfig PipelineConfig::FromJson(const Json& json, const fs::path& base_dir) {
  if (!json.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  RejectUnknown(json,
                {"seeds_path", "output_dir", "n_constraints", "merge_plan", "replay_path",
                 "replay_budget", "replay_per_stage", "rng_seed", "judger_mode",
                 "category_policy", "seed_count", "seed_sources", "min_ref_output_words",
                 "hard_constraints_path", "verb_lexicon_path", "top_n", "workers",
                 "rewrite_retries", "hyperparams", "provider"},
                "config");
  PipelineConfig c;
  if (json.contains("seeds_path")) c.seeds_path = Resolve(base_dir, Get<std::string>(json, "seeds_path", ""));
  c.output_dir = Resolve(base_dir, Get<std::string>(json, "output_dir", "out"));
  c.n_constraints = Get<int>(json, "n_constraints", c.n_constraints);
  if (json.contains("merge_plan") && !json["merge_plan"].is_null()) {
    c.merge_plan = MergePlan::FromJson(json["merge_plan"]);
  }
  if (json.contains("replay_path") && !json["replay_path"].is_null()) {
    c.replay_path = Resolve(base_dir, Get<std::string>(json, "replay_path", ""));
  }
  const auto budget = Get<long long>(json, "replay_budget", 10000);
  if (budget < 0) throw Error(ErrorCode::kConfig, "replay_budget must be >= 0");
  c.replay_budget = static_cast<std::uint64_t>(budget);
  c.replay_per_stage = Get<bool>(json, "replay_per_stage", false);
  c.rng_seed = Get<std::uint64_t>(json, "rng_seed", 0);
  const auto mode = Get<std::string>(json, "judger_mode", "both_orders");
  auto parsed_mode = ParseJudgeMode(mode);
  if (!parsed_mode) throw Error(ErrorCode::kConfig, "judger_mode must be single or both_orders");
  c.judger_mode = *parsed_mode;
  if (json.contains("category_policy")) c.category_policy = CategoryPolicy::FromJson(json["category_policy"]);
  c.seed_count = Get<std::size_t>(json, "seed_count", c.seed_count);
  for (const auto& name : Get<std::vector<std::string>>(json, "seed_sources", {})) {
    auto source = ParseSeedSource(name);
    if (!source) throw Error(ErrorCode::kConfig, "unknown seed source '" + name + "'");
    c.seed_sources.insert(*source);
  }
  c.min_ref_output_words = Get<std::size_t>(json, "min_ref_output_words", c.min_ref_output_words);
  if (json.contains("hard_constraints_path") && !json["hard_constraints_path"].is_null()) {
    c.hard_constraints_path = Resolve(base_dir, Get<std::string>(json, "hard_constraints_path", ""));
  }
  if (json.contains("verb_lexicon_path") && !json["verb_lexicon_path"].is_null()) {
    c.verb_lexicon_path = Resolve(base_dir, Get<std::string>(json, "verb_lexicon_path", ""));
  }
  c.top_n = Get<std::size_t>(json, "top_n", c.top_n);
  c.workers = Get<int>(json, "workers", c.workers);
  c.rewrite_retries = Get<int>(json, "rewrite_retries", c.rewrite_retries);
  if (json.contains("hyperparams")) c.hyperparams = Hyperparams::FromJson(json["hyperparams"]);

  if (json.contains("provider") && !json["provider"].is_null()) {
    const Json& p = json["provider"];
    if (!p.is_object()) throw Error(ErrorCode::kConfig, "provider must be an object");
    RejectUnknown(p,
                  {"kind", "mock_script", "endpoint", "api_key_env", "model", "temperature",
                   "max_tokens", "max_concurrency", "max_retries", "cache_dir", "cache",
                   "timeout_seconds", "base_backoff_ms"},
                  "provider");
    auto& ps = c.provider;
    ps.kind = Get<std::string>(p, "kind", ps.kind);
    if (p.contains("mock_script") && !p["mock_script"].is_null()) {
      ps.mock_script = Resolve(base_dir, Get<std::string>(p, "mock_script", ""));
    }
    ps.config.endpoint = Get<std::string>(p, "endpoint", ps.config.endpoint);
    ps.config.api_key_env_name = Get<std::string>(p, "api_key_env", ps.config.api_key_env_name);
    ps.config.max_concurrency = Get<int>(p, "max_concurrency", ps.config.max_concurrency);
    ps.config.max_retries = Get<int>(p, "max_retries", ps.config.max_retries);
    if (p.contains("cache_dir") && !p["cache_dir"].is_null()) {
      ps.config.cache_dir = Resolve(base_dir, Get<std::string>(p, "cache_dir", ""));
    }
    ps.cache = Get<bool>(p, "cache", ps.cache);
    ps.config.timeout = std::chrono::seconds(Get<long long>(p, "timeout_seconds", ps.config.timeout.count()));
    ps.config.base_backoff =
        std::chrono::milliseconds(Get<long long>(p, "base_backoff_ms", ps.config.base_backoff.count()));
    ps.generation.model_id = Get<std::string>(p, "model", ps.generation.model_id);
    ps.generation.temperature = Get<double>(p, "temperature", ps.generation.temperature);
    ps.generation.max_tokens = Get<int>(p, "max_tokens", ps.generation.max_tokens);
  }
  return c;
}

PipelineConfig PipelineConfig::FromFile(const fs::path& path) {
  Json json = Json::parse(ReadText(path), nullptr, false);
  if (json.is_discarded()) throw Error(ErrorCode::kConfig, path.string() + " is not valid JSON");
  return FromJson(json, fs::absolute(path).parent_path());
}

void PipelineConfig::Merge(const Json& overrides) {
  if (overrides.is_null() || (overrides.is_object() && overrides.empty())) return;
  Json merged = ToJson();
  merged.merge_patch(overrides);
  *this = FromJson(merged, fs::current_path());
}

void PipelineConfig::Validate() const {
  if (n_constraints < 1) throw Error(ErrorCode::kConfig, "n_constraints must be >= 1");
  merge_plan.Validate();
  if (!merge_plan.Covers(n_constraints)) {
    throw Error(ErrorCode::kConfig, "merge_plan must cover k = 1.." + std::to_string(n_constraints) +
                                        " exactly");
  }
  if (workers < 1) throw Error(ErrorCode::kConfig, "workers must be >= 1");
  if (rewrite_retries < 0) throw Error(ErrorCode::kConfig, "rewrite_retries must be >= 0");
  if (top_n < 1) throw Error(ErrorCode::kConfig, "top_n must be >= 1");
  if (provider.kind != "mock" && provider.kind != "http") {
    throw Error(ErrorCode::kConfig, "provider.kind must be mock or http");
  }
  provider.config.Validate();
  ChatRequest probe = provider.generation.Request("", "probe");
  try {
    probe.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("provider generation settings: ") + e.what());
  }
  double total = 0.0;
  for (double w : category_policy.weights) {
    if (w < 0.0) throw Error(ErrorCode::kConfig, "category_policy weights must be >= 0");
    total += w;
  }
  if (total <= 0.0) throw Error(ErrorCode::kConfig, "category_policy has all-zero weights");
}

Json PipelineConfig::ToJson() const {
  Json sources = Json::array();
  for (auto s : seed_sources) sources.push_back(SeedSourceName(s));
  Json p = {{"kind", provider.kind},
            {"mock_script", provider.mock_script ? Json(provider.mock_script->string()) : Json()},
            {"endpoint", provider.config.endpoint},
            {"api_key_env", provider.config.api_key_env_name},
            {"model", provider.generation.model_id},
            {"temperature", provider.generation.temperature},
            {"max_tokens", provider.generation.max_tokens},
            {"max_concurrency", provider.config.max_concurrency},
            {"max_retries", provider.config.max_retries},
            {"cache_dir", provider.config.cache_dir ? Json(provider.config.cache_dir->string()) : Json()},
            {"cache", provider.cache},
            {"timeout_seconds", provider.config.timeout.count()},
            {"base_backoff_ms", provider.config.base_backoff.count()}};
  return Json{{"seeds_path", seeds_path.string()},
              {"output_dir", output_dir.string()},
              {"n_constraints", n_constraints},
              {"merge_plan", merge_plan.ToJson()},
              {"replay_path", replay_path ? Json(replay_path->string()) : Json()},
              {"replay_budget", replay_budget},
              {"replay_per_stage", replay_per_stage},
              {"rng_seed", rng_seed},
              {"judger_mode", JudgeModeName(judger_mode)},
              {"category_policy", category_policy.ToJson()},
              {"seed_count", seed_count},
              {"seed_sources", sources},
              {"min_ref_output_words", min_ref_output_words},
              {"hard_constraints_path",
               hard_constraints_path ? Json(hard_constraints_path->string()) : Json()},
              {"verb_lexicon_path", verb_lexicon_path ? Json(verb_lexicon_path->string()) : Json()},
              {"top_n", top_n},
              {"workers", workers},
              {"rewrite_retries", rewrite_retries},
              {"hyperparams", hyperparams.ToJson()},
              {"provider", p}};
}

// ---------------------------------------------------------------------------
// Pipeline

struct Pipeline::ChainOutcome {
  std::optional<InstructionChain> chain;
  std::optional<TournamentResult> tournament;
  std::vector<ComparisonRecord> partial_records;
  std::string seed_id;
  std::string failed_stage;
  std::string error;
  int failed_k = 0;
};

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<Backend> backend)
    : config_(std::move(config)), backend_override_(std::move(backend)) {
  config_.Validate();
}

Pipeline::~Pipeline() = default;

std::size_t Pipeline::upstream_calls() const {
  return provider_ ? provider_->upstream_calls() : 0;
}

Provider& Pipeline::provider() {
  if (provider_) return *provider_;
  std::shared_ptr<Backend> backend = backend_override_;
  if (!backend) {
    if (config_.provider.kind == "mock") {
      if (!config_.provider.mock_script) {
        throw Error(ErrorCode::kConfig, "mock provider needs provider.mock_script");
      }
      backend = MockBackend::FromFile(*config_.provider.mock_script);
    } else {
      backend = std::make_shared<HttpBackend>(config_.provider.config);
    }
  }
  ProviderConfig pc = config_.provider.config;
  if (config_.provider.cache && !pc.cache_dir) pc.cache_dir = config_.output_dir / "cache";
  if (!config_.provider.cache) pc.cache_dir.reset();
  provider_ = std::make_unique<Provider>(std::move(backend), std::move(pc));
  return *provider_;
}

ConstraintSynthesizer Pipeline::MakeSynthesizer() {
  HardConstraintList hard = config_.hard_constraints_path
                                ? HardConstraintList::FromFile(*config_.hard_constraints_path)
                                : HardConstraintList::Default();
  return ConstraintSynthesizer(provider(), config_.category_policy, std::move(hard),
                               config_.provider.generation, config_.rewrite_retries);
}

template <typename Fn>
void Pipeline::Staged(const std::string& stage, Fn&& fn) {
  try {
    fn();
  } catch (const StageError& e) {
    WriteText(config_.output_dir / kErrorFile,
              Json{{"status", "error"}, {"stage", e.stage()}, {"code", ErrorCodeName(e.code())},
                   {"message", e.what()}}
                      .dump(2) + "\n");
    throw;
  } catch (const Error& e) {
    StageError wrapped(stage, e.code(), e.what());
    WriteText(config_.output_dir / kErrorFile,
              Json{{"status", "error"}, {"stage", stage}, {"code", ErrorCodeName(e.code())},
                   {"message", wrapped.what()}}
                      .dump(2) + "\n");
    throw wrapped;
  } catch (const std::exception& e) {
    StageError wrapped(stage, ErrorCode::kStage, e.what());
    WriteText(config_.output_dir / kErrorFile,
              Json{{"status", "error"}, {"stage", stage}, {"code", ErrorCodeName(ErrorCode::kStage)},
                   {"message", wrapped.what()}}
                      .dump(2) + "\n");
    throw wrapped;
  }
}

void Pipeline::Seeds() {
  Staged("seeds", [&] {
    if (config_.seeds_path.empty()) throw Error(ErrorCode::kConfig, "seeds_path is not set");
    SeedFilter filter;
    filter.sources = config_.seed_sources;
    filter.min_ref_output_words = config_.min_ref_output_words;
    auto loaded = LoadSeeds(config_.seeds_path, filter);
    auto seeds = Dedupe(loaded);
    const std::size_t deduped = seeds.size();
    if (seeds.size() > config_.seed_count) seeds.resize(config_.seed_count);
    WriteSeeds(config_.output_dir / kSeedsFile, seeds);
    summary_.data["seeds"] = {{"accepted", loaded.size()},
                              {"after_dedupe", deduped},
                              {"selected", seeds.size()}};
    spdlog::info("seeds: {} accepted, {} after dedupe, {} selected", loaded.size(), deduped,
                 seeds.size());
    WriteSummary();
  });
}

std::vector<SeedInstruction> Pipeline::ReadSeedArtifact() const {
  std::vector<SeedInstruction> seeds;
  for (const auto& row : ReadJsonl(config_.output_dir / kSeedsFile)) {
    SeedInstruction s;
    s.id = row.at("id").get<std::string>();
    s.text = row.at("text").get<std::string>();
    s.source = ParseSeedSource(row.value("source", std::string("other"))).value_or(SeedSource::kOther);
    if (row.contains("meta")) s.meta = row["meta"];
    seeds.push_back(std::move(s));
  }
  return seeds;
}

void Pipeline::Build() {
  Staged("build", [&] {
    const auto seeds = ReadSeedArtifact();
    const auto synthesizer = MakeSynthesizer();
    auto& prov = provider();
    std::vector<ChainOutcome> outcomes(seeds.size());
    ParallelFor(seeds.size(), config_.workers, [&](std::size_t i) {
      auto& out = outcomes[i];
      out.seed_id = seeds[i].id;
      Rng rng = Rng::Derive(config_.rng_seed, "build:" + seeds[i].id);
      try {
        out.chain = BuildChain(seeds[i], config_.n_constraints, synthesizer, prov, rng,
                               config_.provider.generation);
      } catch (const ChainError& e) {
        out.failed_stage = "build";
        out.failed_k = e.failed_k();
        out.error = e.what();
      }
    });
    std::vector<Json> rows;
    Json failures = Json::array();
    for (const auto& o : outcomes) {
      if (o.chain) {
        rows.push_back(o.chain->ToJson());
      } else {
        failures.push_back({{"seed_id", o.seed_id}, {"stage", "build"}, {"k", o.failed_k}, {"error", o.error}});
        summary_.warnings.push_back("chain " + o.seed_id + " skipped: " + o.error);
        spdlog::warn("chain {} skipped: {}", o.seed_id, o.error);
      }
    }
    WriteJsonl(config_.output_dir / kChainsFile, rows);
    summary_.data["build"] = {{"chains", rows.size()}, {"failed", failures}};
    WriteSummary();
  });
}

void Pipeline::WriteTournament(const std::vector<ChainOutcome>& outcomes) {
  std::vector<Json> pairs, records;
  Json failures = Json::array();
  std::size_t ties = 0;
  for (const auto& o : outcomes) {
    if (o.tournament) {
      for (const auto& p : o.tournament->pairs) pairs.push_back(p.ToJson());
      for (const auto& r : o.tournament->records) {
        if (r.final == Outcome::kTie) ++ties;
        records.push_back(r.ToJson());
      }
    } else {
      for (const auto& r : o.partial_records) records.push_back(r.ToJson());
      failures.push_back({{"seed_id", o.seed_id}, {"stage", o.failed_stage}, {"k", o.failed_k}, {"error", o.error}});
      if (o.failed_stage == "judge") {
        summary_.warnings.push_back("tournament " + o.seed_id + " aborted: " + o.error);
        spdlog::warn("tournament {} aborted: {}", o.seed_id, o.error);
      }
    }
  }
  WriteJsonl(config_.output_dir / kPairsFile, pairs);
  WriteJsonl(config_.output_dir / kRecordsFile, records);
  if (pairs.empty()) {
    summary_.warnings.emplace_back("judge produced zero preference pairs");
    spdlog::warn("judge produced zero preference pairs");
  }
  summary_.data["judge"] = {{"pairs", pairs.size()},
                            {"records", records.size()},
                            {"ties", ties},
                            {"mode", JudgeModeName(config_.judger_mode)},
                            {"failed", failures}};
}

void Pipeline::Judge() {
  Staged("judge", [&] {
    std::vector<InstructionChain> chains;
    for (const auto& row : ReadJsonl(config_.output_dir / kChainsFile)) {
      chains.push_back(InstructionChain::FromJson(row));
    }
    auto& prov = provider();
    std::vector<ChainOutcome> outcomes(chains.size());
    ParallelFor(chains.size(), config_.workers, [&](std::size_t i) {
      auto& out = outcomes[i];
      out.seed_id = chains[i].seed.id;
      Rng rng = Rng::Derive(config_.rng_seed, "judge:" + chains[i].seed.id);
      try {
        out.tournament = ReorderChain(chains[i], config_.judger_mode, prov, rng,
                                      config_.provider.generation);
      } catch (const TournamentError& e) {
        out.failed_stage = "judge";
        out.failed_k = e.failed_k();
        out.error = e.what();
        out.partial_records = e.partial().records;
      }
    });
    WriteTournament(outcomes);
    WriteSummary();
  });
}

void Pipeline::Assemble() {
  Staged("assemble", [&] {
    std::vector<PreferencePair> pairs;
    for (const auto& row : ReadJsonl(config_.output_dir / kPairsFile)) {
      pairs.push_back(PreferencePair::FromJson(row));
    }
    auto binned = BinByConstraintCount(pairs, config_.merge_plan);
    for (const auto& w : binned.warnings) {
      summary_.warnings.push_back("assemble: " + w);
      spdlog::warn("assemble: {}", w);
    }

    ReplaySettings replay;
    if (config_.replay_path && config_.replay_budget > 0) {
      const auto pool = ReplayPool::Load(*config_.replay_path, config_.replay_budget);
      replay.budget = config_.replay_budget;
      replay.per_stage = config_.replay_per_stage;
      replay.pool_size = pool.examples.size();
      std::vector<std::uint64_t> sizes;
      for (const auto& s : binned.stages) sizes.push_back(s.dpo_triplets.size());
      std::vector<std::uint64_t> allocation(sizes.size(), 0);
      const bool any = std::any_of(sizes.begin(), sizes.end(), [](auto s) { return s > 0; });
      if (config_.replay_per_stage) {
        for (std::size_t i = 0; i < sizes.size(); ++i) {
          allocation[i] = sizes[i] > 0 ? std::min<std::uint64_t>(replay.budget, pool.examples.size()) : 0;
        }
      } else if (any) {
        allocation = AllocateReplay(sizes, replay.budget);
      } else {
        summary_.warnings.emplace_back("assemble: replay skipped because every stage is empty");
      }
      for (std::size_t i = 0; i < binned.stages.size(); ++i) {
        if (allocation[i] > pool.examples.size()) {
          throw Error(ErrorCode::kInvalidArgument,
                      "replay allocation " + std::to_string(allocation[i]) + " for stage " +
                          binned.stages[i].stage_id + " exceeds replay pool of " +
                          std::to_string(pool.examples.size()));
        }
        Rng rng = Rng::Derive(config_.rng_seed, "replay:" + binned.stages[i].stage_id);
        binned.stages[i] = MixReplay(std::move(binned.stages[i]), pool, allocation[i], rng);
      }
    } else if (!config_.replay_path) {
      summary_.warnings.emplace_back("assemble: no replay_path configured; replay mixing disabled");
    }

    // Drop stage directories left by earlier runs with a different plan.
    std::error_code ec;
    if (fs::exists(config_.output_dir, ec)) {
      for (const auto& entry : fs::directory_iterator(config_.output_dir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("stage_", 0) == 0) {
          fs::remove_all(entry.path(), ec);
        }
      }
    }

    std::vector<StageDescriptor> descriptors;
    for (const auto& stage : binned.stages) {
      descriptors.push_back(EmitStageFiles(stage, config_.output_dir));
    }
    EmitTrainingManifest(descriptors, config_.hyperparams, replay,
                         config_.output_dir / kManifestFile);
    Json rows = Json::array();
    for (const auto& d : descriptors) {
      rows.push_back({{"stage_id", d.stage_id},
                      {"k_min", d.k_min},
                      {"k_max", d.k_max},
                      {"dpo", d.dpo_count},
                      {"sft", d.sft_count},
                      {"replay", d.replay_count}});
    }
    summary_.data["stages"] = rows;
    WriteSummary();
  });
}

void Pipeline::Stats(const std::optional<fs::path>& input_root) {
  Staged("stats", [&] {
    const fs::path root = input_root.value_or(config_.output_dir);
    if (!fs::exists(root)) throw Error(ErrorCode::kIo, "input path does not exist: " + root.string());
    auto report = DatasetStats(StagesFromManifest(root));
    WriteText(config_.output_dir / "reports" / "stats.json", report.ToJson().dump(2) + "\n");
    WriteText(config_.output_dir / "reports" / "stats.txt", report.ToText());
    summary_.data["stats_rows"] = report.rows.size();
    WriteSummary();
  });
}

void Pipeline::Verbs(const std::optional<fs::path>& input_root) {
  Staged("verbs", [&] {
    const fs::path root = input_root.value_or(config_.output_dir);
    if (!fs::exists(root)) throw Error(ErrorCode::kIo, "input path does not exist: " + root.string());
    std::vector<std::string> instructions;
    for (const auto& stage : StagesFromManifest(root)) {
      for (const auto& row : ReadJsonl(stage.dpo_path)) {
        instructions.push_back(row.value("instruction", std::string()));
      }
    }
    const auto lexicon = config_.verb_lexicon_path ? LoadVerbLexicon(*config_.verb_lexicon_path)
                                                   : DefaultVerbLexicon();
    const auto hist = VerbFrequency(instructions, config_.top_n, lexicon);
    WriteText(config_.output_dir / "reports" / "verbs.json", VerbHistogramJson(hist).dump(2) + "\n");
    WriteText(config_.output_dir / "reports" / "verbs.txt", VerbHistogramText(hist));
    summary_.data["verbs"] = hist.size();
    WriteSummary();
  });
}

void Pipeline::Run() {
  std::error_code ec;
  fs::remove(config_.output_dir / kErrorFile, ec);
  Seeds();
  Staged("build", [&] {
    // Combined run: each chain is judged as soon as it is built.
    const auto seeds = ReadSeedArtifact();
    const auto synthesizer = MakeSynthesizer();
    auto& prov = provider();
    std::vector<ChainOutcome> outcomes(seeds.size());
    ParallelFor(seeds.size(), config_.workers, [&](std::size_t i) {
      auto& out = outcomes[i];
      out.seed_id = seeds[i].id;
      Rng build_rng = Rng::Derive(config_.rng_seed, "build:" + seeds[i].id);
      try {
        out.chain = BuildChain(seeds[i], config_.n_constraints, synthesizer, prov, build_rng,
                               config_.provider.generation);
      } catch (const ChainError& e) {
        out.failed_stage = "build";
        out.failed_k = e.failed_k();
        out.error = e.what();
        return;
      }
      Rng judge_rng = Rng::Derive(config_.rng_seed, "judge:" + seeds[i].id);
      try {
        out.tournament = ReorderChain(*out.chain, config_.judger_mode, prov, judge_rng,
                                      config_.provider.generation);
      } catch (const TournamentError& e) {
        out.failed_stage = "judge";
        out.failed_k = e.failed_k();
        out.error = e.what();
        out.partial_records = e.partial().records;
      }
    });
    std::vector<Json> chain_rows;
    Json failures = Json::array();
    for (const auto& o : outcomes) {
      if (o.chain) {
        chain_rows.push_back(o.chain->ToJson());
      } else {
        failures.push_back({{"seed_id", o.seed_id}, {"stage", "build"}, {"k", o.failed_k}, {"error", o.error}});
        summary_.warnings.push_back("chain " + o.seed_id + " skipped: " + o.error);
        spdlog::warn("chain {} skipped: {}", o.seed_id, o.error);
      }
    }
    WriteJsonl(config_.output_dir / kChainsFile, chain_rows);
    summary_.data["build"] = {{"chains", chain_rows.size()}, {"failed", failures}};
    std::vector<ChainOutcome> judged;
    for (auto& o : outcomes) {
      if (o.chain) judged.push_back(std::move(o));
    }
    WriteTournament(judged);
  });
  Assemble();
  Stats();
  Verbs();
  summary_.data["status"] = "ok";
  WriteSummary();
  spdlog::info("run complete: {} upstream calls", upstream_calls());
}

void Pipeline::RunStage(const std::string& name) {
  if (name == "seeds") return Seeds();
  if (name == "build") return Build();
  if (name == "judge") return Judge();
  if (name == "assemble") return Assemble();
  if (name == "stats") return Stats();
  if (name == "verbs") return Verbs();
  if (name == "run") return Run();
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + name + "'");
}

void Pipeline::WriteSummary() {
  Json out = summary_.data;
  out["warnings"] = summary_.warnings;
  WriteText(config_.output_dir / kSummaryFile, out.dump(2) + "\n");
}

}  // namespace cforge
