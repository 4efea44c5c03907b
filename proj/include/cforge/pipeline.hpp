#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cforge/constraints.hpp"
#include "cforge/curriculum.hpp"
#include "cforge/error.hpp"
#include "cforge/judger.hpp"
#include "cforge/provider.hpp"
#include "cforge/seeds.hpp"

namespace cforge {

struct ProviderSettings {
  std::string kind = "mock";  // "mock" | "http"
  std::optional<std::filesystem::path> mock_script;
  ProviderConfig config;
  GenerationParams generation;
  bool cache = true;  // cache_dir defaults to <output_dir>/cache when unset
};

struct PipelineConfig {
  std::filesystem::path seeds_path;
  std::filesystem::path output_dir = "out";
  int n_constraints = 5;
  MergePlan merge_plan = MergePlan::Default();
  std::optional<std::filesystem::path> replay_path;
  std::uint64_t replay_budget = 10000;
  bool replay_per_stage = false;
  std::uint64_t rng_seed = 0;
  JudgeMode judger_mode = JudgeMode::kBothOrders;
  CategoryPolicy category_policy;
  std::size_t seed_count = 1500;
  std::set<SeedSource> seed_sources;
  std::size_t min_ref_output_words = 10;
  std::optional<std::filesystem::path> hard_constraints_path;
  std::optional<std::filesystem::path> verb_lexicon_path;
  std::size_t top_n = 20;
  int workers = 4;
  int rewrite_retries = 2;
  Hyperparams hyperparams;
  ProviderSettings provider;

  // Relative paths inside `json` resolve against `base_dir`. Unknown keys are
  // rejected. Throws Error(kConfig).
  static PipelineConfig FromJson(const Json& json, const std::filesystem::path& base_dir = {});
  static PipelineConfig FromFile(const std::filesystem::path& path);
  // Applies override keys (same schema, paths relative to the process cwd).
  void Merge(const Json& overrides);

  // n_constraints >= 1, merge plan covering 1..n, sane provider settings.
  void Validate() const;
  Json ToJson() const;
};

// Failure of a whole pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorCode code, const std::string& message)
      : Error(code, stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunSummary {
  Json data = Json::object();  // written to run_summary.json
  std::vector<std::string> warnings;
};

class Pipeline {
 public:
  // `backend` replaces the configured provider backend (tests, embedding).
  explicit Pipeline(PipelineConfig config, std::shared_ptr<Backend> backend = nullptr);
  ~Pipeline();

  // Each stage reads its inputs from, and writes its artifacts to, output_dir.
  void Seeds();
  void Build();
  void Judge();
  void Assemble();
  void Stats(const std::optional<std::filesystem::path>& input_root = std::nullopt);
  void Verbs(const std::optional<std::filesystem::path>& input_root = std::nullopt);
  // seeds -> per-chain build+judge -> assemble -> stats -> verbs. On failure
  // writes error_report.json and rethrows as StageError.
  void Run();

  // Dispatch by subcommand name.
  void RunStage(const std::string& name);

  const PipelineConfig& config() const { return config_; }
  const RunSummary& summary() const { return summary_; }
  std::size_t upstream_calls() const;

 private:
  struct ChainOutcome;

  Provider& provider();
  ConstraintSynthesizer MakeSynthesizer();
  std::vector<SeedInstruction> ReadSeedArtifact() const;
  void WriteTournament(const std::vector<ChainOutcome>& outcomes);
  void WriteSummary();
  template <typename Fn>
  void Staged(const std::string& stage, Fn&& fn);

  PipelineConfig config_;
  std::shared_ptr<Backend> backend_override_;
  std::unique_ptr<Provider> provider_;
  RunSummary summary_;
};

}  // namespace cforge
