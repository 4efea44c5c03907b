#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cforge/jsonl.hpp"
#include "cforge/provider.hpp"
#include "cforge/rng.hpp"

namespace cforge {

enum class ConstraintKind { kContent, kSituation, kStyle, kHard };

// Subtypes of each kind. Hard constraints carry the list index instead.
enum class ConstraintSubtype {
  kOpenQa,               // content
  kLanguageLimitations,  // content
  kSuggestion,           // situation
  kRolePlay,             // situation
  kStory,                // situation
  kStyle,                // style (single template)
  kHardEntry,            // hard
};

inline constexpr std::array<ConstraintKind, 4> kAllKinds = {
    ConstraintKind::kContent, ConstraintKind::kSituation, ConstraintKind::kStyle,
    ConstraintKind::kHard};

const char* KindName(ConstraintKind kind);
const char* SubtypeName(ConstraintSubtype subtype);
std::optional<ConstraintKind> ParseKind(std::string_view name);
std::optional<ConstraintSubtype> ParseSubtype(std::string_view name);
std::vector<ConstraintSubtype> SubtypesOf(ConstraintKind kind);

struct ConstraintCategory {
  ConstraintKind kind = ConstraintKind::kContent;
  ConstraintSubtype subtype = ConstraintSubtype::kOpenQa;
  std::size_t hard_index = 0;  // meaningful only for kHard

  bool IsSoft() const { return kind != ConstraintKind::kHard; }
  bool Valid() const;
  bool operator==(const ConstraintCategory&) const = default;
};

// Relative weight per kind; subtypes within a kind are drawn uniformly.
struct CategoryPolicy {
  std::array<double, 4> weights = {1.0, 1.0, 1.0, 1.0};  // indexed like kAllKinds

  double& weight(ConstraintKind kind) { return weights[static_cast<std::size_t>(kind)]; }
  double weight(ConstraintKind kind) const { return weights[static_cast<std::size_t>(kind)]; }

  // {"content": w, "situation": w, "style": w, "hard": w}; missing kinds get 0
  // when the object is non-empty.
  static CategoryPolicy FromJson(const Json& json);
  Json ToJson() const;
};

// Draws a kind by weight, then a uniform subtype. Throws Error(kConfig) when
// weights are negative, non-finite or all zero. For kHard the returned
// hard_index is left at 0; SelectHardConstraint assigns it.
ConstraintCategory SampleCategory(Rng& rng, const CategoryPolicy& policy);

struct RewriteResult {
  std::string modified_instruction;
  std::string added_constraint;

  bool operator==(const RewriteResult&) const = default;
};

// Rewrite prompt for a soft category with the instruction substituted.
// Throws Error(kInvalidArgument) for hard categories.
ChatRequest BuildRewritePrompt(std::string_view instruction, const ConstraintCategory& category,
                               const GenerationParams& params = {});

// The phrase that identifies each soft template (used by tests and mocks).
std::string_view TemplateMarker(ConstraintSubtype subtype);

// Extracts the first balanced JSON object (tolerating prose and code
// fences). Throws Error(kParse) when no object is found, a field is missing,
// or a field is empty.
RewriteResult ParseRewrite(std::string_view response);
std::string SerializeRewrite(const RewriteResult& result);

// First balanced top-level {...} that parses as a JSON object.
std::optional<Json> ExtractFirstJsonObject(std::string_view text);

struct RewriteReport {
  long long length_delta = 0;
  std::vector<std::string> warnings;

  bool ok() const { return warnings.empty(); }
};

// Advisory checks: word-count delta in [10, 20], an actual modification, and
// the added constraint overlapping the newly added words.
RewriteReport ValidateRewrite(std::string_view original, const RewriteResult& result);

class HardConstraintList {
 public:
  // Throws Error(kConfig) when empty or when entries repeat.
  explicit HardConstraintList(std::vector<std::string> entries);

  static HardConstraintList Default();
  // One description per line; blank lines and '#' comments are skipped.
  static HardConstraintList FromFile(const std::filesystem::path& path);

  const std::vector<std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::string> entries_;
};

struct HardSelection {
  std::size_t index = 0;
  std::string description;
};

// Uniform draw among entries not in `used`; records the index in `used`.
// Throws Error(kExhausted) when every entry has been used.
HardSelection SelectHardConstraint(const HardConstraintList& list, Rng& rng,
                                   std::set<std::size_t>& used);

struct SynthesizedConstraint {
  ConstraintCategory category;
  std::string constraint_text;
  std::string instruction;
  std::vector<std::string> warnings;
};

// Produces the next constraint for an instruction. Soft categories go through
// the provider; a malformed or identity rewrite is reprompted up to
// `parse_retries` times before failing with Error(kParse).
class ConstraintSynthesizer {
 public:
  ConstraintSynthesizer(Provider& provider, CategoryPolicy policy, HardConstraintList hard,
                        GenerationParams params = {}, int parse_retries = 2);

  SynthesizedConstraint Next(const std::string& instruction, Rng& rng,
                             std::set<std::size_t>& used_hard) const;

  const HardConstraintList& hard_list() const { return hard_; }

 private:
  Provider& provider_;
  CategoryPolicy policy_;
  HardConstraintList hard_;
  GenerationParams params_;
  int parse_retries_;
};

}  // namespace cforge
