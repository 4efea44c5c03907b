#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cforge/jsonl.hpp"

namespace cforge {

// Ordered list of distinct item identifiers.
class Ranking {
 public:
  // Throws Error(kInvalidArgument) on empty input or duplicate items.
  explicit Ranking(std::vector<std::string> items);

  const std::vector<std::string>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<std::string> items_;
};

// Tie-free Kendall tau by direct enumeration of all item pairs.
// Throws when item sets differ or fewer than two items are ranked.
double KendallTau(const Ranking& r1, const Ranking& r2);

// Fraction of items at the same position in both rankings.
double PositionConsistency(const Ranking& r1, const Ranking& r2);

struct LossSample {
  double logp_policy_chosen = 0.0;
  double logp_ref_chosen = 0.0;
  double logp_policy_rejected = 0.0;
  double logp_ref_rejected = 0.0;
};

struct LossBreakdown {
  double dpo = 0.0;
  double sft = 0.0;
  double total = 0.0;
};

// log(1 + e^x) without overflow.
double Softplus(double x);

// beta * [(pc - rc) - (pr - rr)]
double PreferenceMargin(const LossSample& sample, double beta);

// Per-sample -log sigmoid(margin) and -logp_policy_chosen.
LossBreakdown SampleLoss(const LossSample& sample, double beta);

// Mean-reduced DPO and SFT losses; total = dpo + sft. Throws
// Error(kInvalidArgument) for an empty batch, beta <= 0 or non-finite inputs.
LossBreakdown DpoSftLoss(std::span<const LossSample> batch, double beta);

struct StageInput {
  std::string label;
  int k_min = 0;
  int k_max = 0;
  std::filesystem::path dpo_path;
};

struct StatsRow {
  std::string label;
  std::string constraints;  // "3" or "1-3"
  std::size_t preference_pairs = 0;
  double avg_instruction_length = 0.0;
  bool empty = false;
  std::vector<std::string> malformed;  // "path:line" entries skipped
};

struct StatsReport {
  std::vector<StatsRow> rows;

  Json ToJson() const;
  std::string ToText() const;  // aligned columns
};

// Per stage: pair count and mean whitespace-token length of "instruction".
// Malformed lines are recorded and skipped; an unreadable file throws.
StatsReport DatasetStats(const std::vector<StageInput>& stages);

// Stage inputs from <root>/training_manifest.json.
std::vector<StageInput> StagesFromManifest(const std::filesystem::path& root);

using VerbHistogram = std::vector<std::pair<std::string, std::size_t>>;

std::set<std::string> DefaultVerbLexicon();
// One verb per line; '#' comments allowed.
std::set<std::string> LoadVerbLexicon(const std::filesystem::path& path);

// Counts the lowercased first token of each instruction when it is in the
// lexicon; top_n by count, ties alphabetical.
VerbHistogram VerbFrequency(const std::vector<std::string>& instructions, std::size_t top_n,
                            const std::set<std::string>& lexicon = DefaultVerbLexicon());

Json VerbHistogramJson(const VerbHistogram& histogram);
std::string VerbHistogramText(const VerbHistogram& histogram);

}  // namespace cforge
