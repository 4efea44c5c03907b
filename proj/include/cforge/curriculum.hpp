#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cforge/judger.hpp"
#include "cforge/jsonl.hpp"
#include "cforge/rng.hpp"

namespace cforge {

// Disjoint sets of constraint counts; each set becomes one stage.
struct MergePlan {
  std::vector<std::vector<int>> sets;

  static MergePlan Default() { return {{{1, 2, 3}, {4, 5}}}; }
  static MergePlan Singletons(int n);
  static MergePlan FromJson(const Json& json);
  Json ToJson() const;

  // Throws Error(kConfig) on empty/overlapping sets or non-positive k.
  void Validate() const;
  // True when the sets cover exactly 1..n.
  bool Covers(int n) const;
};

struct SftExample {
  std::string instruction;
  std::string response;
  bool is_replay = false;
};

struct CurriculumStage {
  std::string stage_id;
  int k_min = 0;
  int k_max = 0;
  std::vector<int> ks;
  std::vector<PreferencePair> dpo_triplets;
  std::vector<SftExample> sft_pairs;  // projections of dpo_triplets, then replay
  std::size_t replay_count = 0;
};

struct BinResult {
  std::vector<CurriculumStage> stages;
  std::vector<std::string> warnings;
};

// One stage per plan set, ordered by ascending max k; SFT pairs are the
// (instruction, chosen) projections of the routed triplets.
BinResult BinByConstraintCount(const std::vector<PreferencePair>& pairs, const MergePlan& plan);

// Largest-remainder allocation of `budget` in proportion to `stage_sizes`.
// Remainder ties go to the lower index. Result sums to `budget` exactly.
std::vector<std::uint64_t> AllocateReplay(std::span<const std::uint64_t> stage_sizes,
                                          std::uint64_t budget);

struct ReplayExample {
  std::string instruction;
  std::string response;
};

struct ReplayPool {
  std::vector<ReplayExample> examples;
  std::uint64_t total_budget = 10000;

  // conversations.jsonl: {"instruction","response"} rows, or ShareGPT-style
  // {"conversations":[{"from","value"},...]} rows reduced to their first turn.
  static ReplayPool Load(const std::filesystem::path& path, std::uint64_t budget);
};

// Appends `count` pool examples sampled without replacement to the SFT stream,
// flagged as replay. Throws Error(kInvalidArgument) when count exceeds the pool.
CurriculumStage MixReplay(CurriculumStage stage, const ReplayPool& pool, std::size_t count,
                          Rng& rng);

struct StageDescriptor {
  std::string stage_id;
  int k_min = 0;
  int k_max = 0;
  std::vector<int> ks;
  std::string dir;       // relative to the output root
  std::string dpo_path;  // relative to the output root
  std::string sft_path;
  std::size_t dpo_count = 0;
  std::size_t sft_count = 0;
  std::size_t replay_count = 0;

  Json ToJson() const;
  static StageDescriptor FromJson(const Json& json);
};

// Writes <root>/stage_<id>/{dpo,sft}.jsonl.
StageDescriptor EmitStageFiles(const CurriculumStage& stage, const std::filesystem::path& root);

// Reads a stage back from its files (replay rows keep their flag).
CurriculumStage LoadStage(const StageDescriptor& descriptor, const std::filesystem::path& root);

struct Hyperparams {
  double beta = 0.1;
  double learning_rate = 5.0e-6;
  int epochs = 3;
  std::string scheduler = "cosine";
  double warmup_ratio = 0.1;
  int grad_accum = 8;
  std::string adapter = "lora-all";

  static Hyperparams FromJson(const Json& json);  // missing keys keep defaults
  Json ToJson() const;
};

struct ReplaySettings {
  std::uint64_t budget = 0;
  bool per_stage = false;  // each stage draws up to the full budget
  std::size_t pool_size = 0;
};

// Throws Error(kInvalidArgument) when stages are not ascending by k_max.
void EmitTrainingManifest(const std::vector<StageDescriptor>& stages, const Hyperparams& hyperparams,
                          const ReplaySettings& replay, const std::filesystem::path& path);

}  // namespace cforge
