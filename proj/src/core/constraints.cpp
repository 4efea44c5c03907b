#include "cforge/constraints.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "cforge/error.hpp"

namespace cforge {

namespace {

constexpr std::string_view kRewritePreamble =
    "You are an Instruction Rewriting Expert. You need to rewrite #Given Instruction# based on "
    "#Rewriting Requirement#, in order to obtain a #Rewritten Instruction#. Basically, "
    "#Rewritten Instruction# should adhere to the following guidelines:\n"
    "1. Your rewriting cannot omit the non-text parts such as the table and code in "
    "#Given Instruction#.\n"
    "2. #Rewritten Instruction# must be reasonable and must be understood and responded to by "
    "humans.\n"
    "3. You should try your best not to make the #Rewritten Instruction# become verbose, "
    "#Rewritten Instruction# can only add 10 to 20 words into #Given Instruction#.\n"
    "/* The Given Instruction */\n";

constexpr std::string_view kRequirementHeader = "\n/* Rewriting Requirement */\n";

constexpr std::string_view kJsonFormatLine =
    "Please output in JSON format with the fields 'modified_instruction' for the modified "
    "instruction and 'added_constraint' for the added constraint.";

constexpr std::string_view kContentOpenQa =
    "Please add one proper content constraint to the #Given Instruction#. The content "
    "constraints include but are not limited to:\n"
    "1. Add a Subtask or Another Related Question.\n"
    "2. Narrow Down the Topic: Instead of a general theme or topic, provide a more specific "
    "subset.\n"
    "3. Set a Higher Standard: Raise the bar for what's considered acceptable or successful.\n"
    "4. Limit Resources: Restrict the number or type of resources someone can use.\n"
    "5. Introduce Specific Criteria: Mandate particular components or features that must be "
    "included.\n"
    "6. Specifying Sequence: Dictate the order in which certain steps or actions should be "
    "taken.\n";

constexpr std::string_view kContentLanguage =
    "Please add one proper content constraint to the #Given Instruction#. The content "
    "constraints include but are not limited to:\n"
    "1. Specify Language Complexity: Determine whether the text should use simple, "
    "intermediate, or advanced language.\n"
    "2. Control Output Length: Set limits on the text's length, such as maximum word count or "
    "number of paragraphs.\n"
    "3. Restrict Vocabulary: Include or exclude specific words or phrases, or limit the range of "
    "vocabulary.\n"
    "4. Mandate Structure: Require a specific format, such as headings, bullet points, or a "
    "particular narrative style.\n";

constexpr std::string_view kSituationSuggestion =
    "Please add one proper situation constraint to the #Given Instruction#. The situation "
    "constraints include but are not limited to:\n"
    "1. Define the Context: Specify a particular situation or environment that the suggestions "
    "should be relevant to.\n"
    "2. Introduce a Specific Problem: Focus on addressing a distinct problem or challenge that "
    "needs suggestions.\n"
    "3. Impose Urgency: Include a time constraint or urgency for when the suggestions should be "
    "applied.\n"
    "4. Limit Options: Restrict the scope of potential suggestions to a narrower set of "
    "choices.\n"
    "5. Add Dependencies: Require that suggestions consider certain conditions or "
    "prerequisites.\n"
    "6. Prioritize Outcomes: Highlight specific outcomes or goals that the suggestions should "
    "aim to achieve.\n";

constexpr std::string_view kSituationRolePlay =
    "Please add one proper situation constraint to the #Given Instruction#. The situation "
    "constraints include but are not limited to:\n"
    "1. Specify a Role: Clearly define the role or persona to be taken on during the "
    "role-play.\n"
    "2. Define the Setting: Outline the environment or context in which the role-play should "
    "occur.\n"
    "3. Add Conflict or Challenge: Introduce a specific problem, conflict, or challenge that "
    "must be addressed within the role-play.\n"
    "4. Limit the Actions: Restrict the types or number of actions that can be taken during the "
    "role-play.\n"
    "5. Set Specific Goals: Define clear objectives that the role-player must achieve.\n"
    "6. Introduce Time Constraints: Impose a time limit for the role-play to unfold or for "
    "certain actions to be completed.\n";

constexpr std::string_view kSituationStory =
    "Please add one proper situation constraint to the #Given Instruction#. The situation "
    "constraints include but are not limited to:\n"
    "1. Define Character Archetypes: Specify certain archetypes or roles characters should "
    "fulfill, such as a hero, mentor, or antagonist.\n"
    "2. Include Specific Plot Points: Mandate the inclusion of certain events or plot twists "
    "that must occur.\n"
    "3. Moral Dilemmas: Introduce a scenario where the characters must make a tough decision "
    "that involves competing ethical principles or risks.\n";

constexpr std::string_view kStyle =
    "Please add one proper style constraint to the #Given Instruction#. The style constraints "
    "include but are not limited to:\n"
    "1. Tone and Emotion: Specify the desired emotional tone for the response.\n"
    "2. Writing Style: Ask the AI to mimic a specific author's writing style.\n"
    "3. Contradiction: Ask the AI to provide a response that contradicts the previous statement "
    "or take a stance opposite to its prior response.\n"
    "4. Ambiguity: Instruct the AI to create responses with intentional ambiguity or double "
    "meanings.\n"
    "5. Humor or Satire: Request that the response be humorous or satirical, requiring the AI "
    "to generate jokes or witty remarks.\n";

std::string_view RequirementFor(ConstraintSubtype subtype) {
  switch (subtype) {
    case ConstraintSubtype::kOpenQa: return kContentOpenQa;
    case ConstraintSubtype::kLanguageLimitations: return kContentLanguage;
    case ConstraintSubtype::kSuggestion: return kSituationSuggestion;
    case ConstraintSubtype::kRolePlay: return kSituationRolePlay;
    case ConstraintSubtype::kStory: return kSituationStory;
    case ConstraintSubtype::kStyle: return kStyle;
    case ConstraintSubtype::kHardEntry: break;
  }
  throw Error(ErrorCode::kInvalidArgument, "hard constraints have no rewrite template");
}

std::vector<std::string> Tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

}  // namespace

const char* KindName(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kContent: return "content";
    case ConstraintKind::kSituation: return "situation";
    case ConstraintKind::kStyle: return "style";
    case ConstraintKind::kHard: return "hard";
  }
  return "content";
}

const char* SubtypeName(ConstraintSubtype subtype) {
  switch (subtype) {
    case ConstraintSubtype::kOpenQa: return "open_qa";
    case ConstraintSubtype::kLanguageLimitations: return "language_limitations";
    case ConstraintSubtype::kSuggestion: return "suggestion";
    case ConstraintSubtype::kRolePlay: return "role_play";
    case ConstraintSubtype::kStory: return "story";
    case ConstraintSubtype::kStyle: return "single";
    case ConstraintSubtype::kHardEntry: return "list_index";
  }
  return "open_qa";
}

std::optional<ConstraintKind> ParseKind(std::string_view name) {
  for (auto kind : kAllKinds) {
    if (name == KindName(kind)) return kind;
  }
  return std::nullopt;
}

std::optional<ConstraintSubtype> ParseSubtype(std::string_view name) {
  for (auto s : {ConstraintSubtype::kOpenQa, ConstraintSubtype::kLanguageLimitations,
                 ConstraintSubtype::kSuggestion, ConstraintSubtype::kRolePlay,
                 ConstraintSubtype::kStory, ConstraintSubtype::kStyle,
                 ConstraintSubtype::kHardEntry}) {
    if (name == SubtypeName(s)) return s;
  }
  return std::nullopt;
}

std::vector<ConstraintSubtype> SubtypesOf(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kContent:
      return {ConstraintSubtype::kOpenQa, ConstraintSubtype::kLanguageLimitations};
    case ConstraintKind::kSituation:
      return {ConstraintSubtype::kSuggestion, ConstraintSubtype::kRolePlay,
              ConstraintSubtype::kStory};
    case ConstraintKind::kStyle:
      return {ConstraintSubtype::kStyle};
    case ConstraintKind::kHard:
      return {ConstraintSubtype::kHardEntry};
  }
  return {};
}

bool ConstraintCategory::Valid() const {
  const auto subs = SubtypesOf(kind);
  return std::find(subs.begin(), subs.end(), subtype) != subs.end();
}

CategoryPolicy CategoryPolicy::FromJson(const Json& json) {
  CategoryPolicy policy;
  if (json.is_null() || (json.is_object() && json.empty())) return policy;
  if (!json.is_object()) {
    throw Error(ErrorCode::kConfig, "category_policy must be an object of kind weights");
  }
  policy.weights = {0.0, 0.0, 0.0, 0.0};
  for (const auto& [name, value] : json.items()) {
    auto kind = ParseKind(name);
    if (!kind) throw Error(ErrorCode::kConfig, "category_policy: unknown kind '" + name + "'");
    if (!value.is_number()) {
      throw Error(ErrorCode::kConfig, "category_policy: weight for '" + name + "' is not a number");
    }
    policy.weight(*kind) = value.get<double>();
  }
  return policy;
}

Json CategoryPolicy::ToJson() const {
  Json out = Json::object();
  for (auto kind : kAllKinds) out[KindName(kind)] = weight(kind);
  return out;
}

ConstraintCategory SampleCategory(Rng& rng, const CategoryPolicy& policy) {
  double total = 0.0;
  for (double w : policy.weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kConfig, "category weights must be finite and nonnegative");
    }
    total += w;
  }
  if (total <= 0.0) {
    throw Error(ErrorCode::kConfig, "category policy is degenerate: all weights are zero");
  }
  const double u = rng.UniformReal() * total;
  ConstraintKind chosen = ConstraintKind::kContent;
  double acc = 0.0;
  // Rounding at the top edge falls through to the last positive kind.
  for (auto kind : kAllKinds) {
    if (policy.weight(kind) <= 0.0) continue;
    acc += policy.weight(kind);
    chosen = kind;
    if (u < acc) break;
  }
  const auto subs = SubtypesOf(chosen);
  ConstraintCategory category;
  category.kind = chosen;
  category.subtype = subs[subs.size() == 1 ? 0 : rng.UniformIndex(subs.size())];
  return category;
}

std::string_view TemplateMarker(ConstraintSubtype subtype) {
  switch (subtype) {
    case ConstraintSubtype::kOpenQa: return "Narrow Down the Topic";
    case ConstraintSubtype::kLanguageLimitations: return "Specify Language Complexity";
    case ConstraintSubtype::kSuggestion: return "Impose Urgency";
    case ConstraintSubtype::kRolePlay: return "Specify a Role";
    case ConstraintSubtype::kStory: return "Define Character Archetypes";
    case ConstraintSubtype::kStyle: return "Tone and Emotion";
    case ConstraintSubtype::kHardEntry: break;
  }
  return {};
}

ChatRequest BuildRewritePrompt(std::string_view instruction, const ConstraintCategory& category,
                               const GenerationParams& params) {
  if (!category.IsSoft()) {
    throw Error(ErrorCode::kInvalidArgument, "hard constraints are not rewritten by the LLM");
  }
  if (!category.Valid()) {
    throw Error(ErrorCode::kInvalidArgument, "subtype does not belong to the category kind");
  }
  std::string prompt;
  prompt.reserve(kRewritePreamble.size() + instruction.size() + 1200);
  prompt += kRewritePreamble;
  prompt += instruction;
  prompt += kRequirementHeader;
  prompt += RequirementFor(category.subtype);
  // The style template ships without the output-format line; it is appended
  // so every soft rewrite answers in the same JSON shape.
  prompt += kJsonFormatLine;
  return params.Request("", std::move(prompt));
}

std::optional<Json> ExtractFirstJsonObject(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          Json value = Json::parse(text.substr(start, i - start + 1), nullptr, false);
          if (!value.is_discarded() && value.is_object()) return value;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

RewriteResult ParseRewrite(std::string_view response) {
  auto object = ExtractFirstJsonObject(response);
  if (!object) throw Error(ErrorCode::kParse, "no JSON object found in rewrite response");
  RewriteResult result;
  for (auto [field, target] : {std::pair{"modified_instruction", &result.modified_instruction},
                               std::pair{"added_constraint", &result.added_constraint}}) {
    if (!object->contains(field) || !(*object)[field].is_string()) {
      throw Error(ErrorCode::kParse, std::string("rewrite response missing field '") + field + "'");
    }
    *target = Trim((*object)[field].get<std::string>());
    if (target->empty()) {
      throw Error(ErrorCode::kParse, std::string("rewrite response has empty field '") + field + "'");
    }
  }
  return result;
}

std::string SerializeRewrite(const RewriteResult& result) {
  return DumpLine(Json{{"modified_instruction", result.modified_instruction},
                       {"added_constraint", result.added_constraint}});
}

RewriteReport ValidateRewrite(std::string_view original, const RewriteResult& result) {
  RewriteReport report;
  report.length_delta = static_cast<long long>(CountWords(result.modified_instruction)) -
                        static_cast<long long>(CountWords(original));
  if (Trim(result.modified_instruction) == Trim(original)) {
    report.warnings.emplace_back("no modification");
    return report;
  }
  if (report.length_delta < 10 || report.length_delta > 20) {
    report.warnings.push_back("length delta " + std::to_string(report.length_delta) +
                              " outside [10,20]");
  }
  const auto before = Tokens(original);
  const std::unordered_set<std::string> old_tokens(before.begin(), before.end());
  std::unordered_set<std::string> added;
  for (auto& t : Tokens(result.modified_instruction)) {
    if (!old_tokens.contains(t)) added.insert(std::move(t));
  }
  std::size_t overlap = 0, considered = 0;
  for (const auto& t : Tokens(result.added_constraint)) {
    if (t.size() < 3) continue;
    ++considered;
    if (added.contains(t)) ++overlap;
  }
  if (considered > 0 && overlap == 0) {
    report.warnings.emplace_back("added constraint does not appear in the modification");
  }
  return report;
}

HardConstraintList::HardConstraintList(std::vector<std::string> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw Error(ErrorCode::kConfig, "hard constraint list is empty");
  std::unordered_set<std::string> seen;
  for (const auto& e : entries_) {
    if (Trim(e).empty()) throw Error(ErrorCode::kConfig, "hard constraint entry is blank");
    if (!seen.insert(e).second) {
      throw Error(ErrorCode::kConfig, "duplicate hard constraint entry: " + e);
    }
  }
}

HardConstraintList HardConstraintList::Default() {
  return HardConstraintList({
      "Answer in fewer than 150 words.",
      "Answer in at least 300 words.",
      "Include the keywords \"evidence\" and \"example\" in your response.",
      "Do not use the word \"very\" anywhere in your response.",
      "Format your response as a bulleted list where every item starts with \"- \".",
      "Wrap your entire response in a valid JSON object with a single \"answer\" field.",
      "Write your entire response in lowercase letters only.",
      "Write your entire response in uppercase letters only.",
      "Organize your response into exactly 3 paragraphs separated by blank lines.",
      "End your response with the exact phrase \"Is there anything else I can help with?\"",
      "Include a title wrapped in double angular brackets, such as <<title>>.",
      "Do not use any commas in your response.",
  });
}

HardConstraintList HardConstraintList::FromFile(const std::filesystem::path& path) {
  std::vector<std::string> entries;
  for (const auto& line : ReadLines(path)) {
    std::string text = Trim(line.text);
    if (text.empty() || text.front() == '#') continue;
    entries.push_back(std::move(text));
  }
  return HardConstraintList(std::move(entries));
}

HardSelection SelectHardConstraint(const HardConstraintList& list, Rng& rng,
                                   std::set<std::size_t>& used) {
  std::vector<std::size_t> available;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!used.contains(i)) available.push_back(i);
  }
  if (available.empty()) {
    throw Error(ErrorCode::kExhausted, "hard constraint list exhausted for this chain");
  }
  const std::size_t index =
      available.size() == 1 ? available.front() : available[rng.UniformIndex(available.size())];
  used.insert(index);
  return {index, list.entries()[index]};
}

ConstraintSynthesizer::ConstraintSynthesizer(Provider& provider, CategoryPolicy policy,
                                             HardConstraintList hard, GenerationParams params,
                                             int parse_retries)
    : provider_(provider),
      policy_(policy),
      hard_(std::move(hard)),
      params_(std::move(params)),
      parse_retries_(parse_retries) {}

SynthesizedConstraint ConstraintSynthesizer::Next(const std::string& instruction, Rng& rng,
                                                  std::set<std::size_t>& used_hard) const {
  CategoryPolicy policy = policy_;
  if (used_hard.size() >= hard_.size()) policy.weight(ConstraintKind::kHard) = 0.0;

  SynthesizedConstraint out;
  out.category = SampleCategory(rng, policy);

  if (!out.category.IsSoft()) {
    auto pick = SelectHardConstraint(hard_, rng, used_hard);
    out.category.hard_index = pick.index;
    out.constraint_text = pick.description;
    out.instruction = Trim(instruction) + " " + pick.description;
    return out;
  }

  const ChatRequest request = BuildRewritePrompt(instruction, out.category, params_);
  std::string last_error;
  for (int attempt = 0; attempt <= parse_retries_; ++attempt) {
    const auto response =
        provider_.Complete(request, attempt == 0 ? CacheMode::kUse : CacheMode::kRefresh);
    try {
      RewriteResult result = ParseRewrite(response.text);
      if (Trim(result.modified_instruction) == Trim(instruction)) {
        throw Error(ErrorCode::kParse, "rewrite returned the instruction unchanged");
      }
      out.warnings = ValidateRewrite(instruction, result).warnings;
      out.constraint_text = std::move(result.added_constraint);
      out.instruction = std::move(result.modified_instruction);
      return out;
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw Error(ErrorCode::kParse, "rewrite failed after " + std::to_string(parse_retries_ + 1) +
                                     " attempts: " + last_error);
}

}  // namespace cforge
