#include "cforge/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "cforge/error.hpp"

namespace cforge {

namespace {

std::unordered_map<std::string, std::size_t> Positions(const Ranking& r) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < r.size(); ++i) pos.emplace(r.items()[i], i);
  return pos;
}

void RequireSameItems(const Ranking& r1, const Ranking& r2,
                      const std::unordered_map<std::string, std::size_t>& pos2) {
  if (r1.size() != r2.size()) {
    throw Error(ErrorCode::kInvalidArgument, "rankings have different item sets");
  }
  for (const auto& item : r1.items()) {
    if (!pos2.contains(item)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "rankings have different item sets (missing '" + item + "')");
    }
  }
}

int Sign(long long x) { return (x > 0) - (x < 0); }

std::string FormatFixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

Ranking::Ranking(std::vector<std::string> items) : items_(std::move(items)) {
  if (items_.empty()) throw Error(ErrorCode::kInvalidArgument, "ranking is empty");
  std::unordered_set<std::string> seen;
  for (const auto& item : items_) {
    if (!seen.insert(item).second) {
      throw Error(ErrorCode::kInvalidArgument, "ranking has duplicate item '" + item + "'");
    }
  }
}

double KendallTau(const Ranking& r1, const Ranking& r2) {
  const auto pos2 = Positions(r2);
  RequireSameItems(r1, r2, pos2);
  const std::size_t n = r1.size();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "kendall tau needs at least two items");

  // Items enumerated in r1 order, so r1(i) = i.
  std::vector<long long> p2(n);
  for (std::size_t i = 0; i < n; ++i) p2[i] = static_cast<long long>(pos2.at(r1.items()[i]));

  long long sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sum += Sign(static_cast<long long>(i) - static_cast<long long>(j)) * Sign(p2[i] - p2[j]);
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(sum) / pairs;
}

double PositionConsistency(const Ranking& r1, const Ranking& r2) {
  const auto pos2 = Positions(r2);
  RequireSameItems(r1, r2, pos2);
  std::size_t same = 0;
  for (std::size_t i = 0; i < r1.size(); ++i) {
    if (pos2.at(r1.items()[i]) == i) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(r1.size());
}

double Softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double PreferenceMargin(const LossSample& s, double beta) {
  return beta * ((s.logp_policy_chosen - s.logp_ref_chosen) -
                 (s.logp_policy_rejected - s.logp_ref_rejected));
}

LossBreakdown SampleLoss(const LossSample& s, double beta) {
  LossBreakdown out;
  out.dpo = Softplus(-PreferenceMargin(s, beta));  // -log sigmoid(d) = softplus(-d)
  out.sft = -s.logp_policy_chosen;
  out.total = out.dpo + out.sft;
  return out;
}

LossBreakdown DpoSftLoss(std::span<const LossSample> batch, double beta) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "loss batch is empty");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be a finite positive number");
  }
  double dpo = 0.0, sft = 0.0;
  for (const auto& s : batch) {
    if (!std::isfinite(s.logp_policy_chosen) || !std::isfinite(s.logp_ref_chosen) ||
        !std::isfinite(s.logp_policy_rejected) || !std::isfinite(s.logp_ref_rejected)) {
      throw Error(ErrorCode::kInvalidArgument, "loss sample has non-finite log-probabilities");
    }
    const auto l = SampleLoss(s, beta);
    dpo += l.dpo;
    sft += l.sft;
  }
  const double n = static_cast<double>(batch.size());
  LossBreakdown out;
  out.dpo = dpo / n;
  out.sft = sft / n;
  out.total = out.dpo + out.sft;
  return out;
}

Json StatsReport::ToJson() const {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"curriculum", r.label},
                   {"constraints", r.constraints},
                   {"preference_pairs", r.preference_pairs},
                   {"avg_instruction_length", r.avg_instruction_length},
                   {"empty", r.empty},
                   {"malformed_lines", r.malformed}});
  }
  return Json{{"rows", std::move(out)}};
}

std::string StatsReport::ToText() const {
  const std::vector<std::string> header = {"Curriculum", "# Constraints", "# Preference Pairs",
                                           "Avg Length"};
  std::vector<std::vector<std::string>> table = {header};
  for (const auto& r : rows) {
    table.push_back({r.label, r.constraints, std::to_string(r.preference_pairs),
                     r.empty ? "0 (empty)" : FormatFixed(r.avg_instruction_length, 1)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string cell = row[c];
      cell.resize(width[c], ' ');
      out += cell;
      if (c + 1 < row.size()) out += "  ";
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  return out;
}

StatsReport DatasetStats(const std::vector<StageInput>& stages) {
  StatsReport report;
  for (const auto& stage : stages) {
    StatsRow row;
    row.label = stage.label;
    row.constraints = stage.k_min == stage.k_max
                          ? std::to_string(stage.k_min)
                          : std::to_string(stage.k_min) + "-" + std::to_string(stage.k_max);
    std::size_t total_words = 0;
    for (const auto& line : ReadLines(stage.dpo_path)) {
      Json value = Json::parse(line.text, nullptr, false);
      if (value.is_discarded() || !value.is_object() || !value.contains("instruction") ||
          !value["instruction"].is_string()) {
        row.malformed.push_back(stage.dpo_path.string() + ":" + std::to_string(line.line_number));
        continue;
      }
      ++row.preference_pairs;
      total_words += CountWords(value["instruction"].get<std::string>());
    }
    row.empty = row.preference_pairs == 0;
    row.avg_instruction_length =
        row.empty ? 0.0
                  : static_cast<double>(total_words) / static_cast<double>(row.preference_pairs);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<StageInput> StagesFromManifest(const std::filesystem::path& root) {
  const auto path = root / "training_manifest.json";
  Json manifest = Json::parse(ReadText(path), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("stages")) {
    throw Error(ErrorCode::kParse, path.string() + " is not a training manifest");
  }
  std::vector<StageInput> out;
  for (const auto& s : manifest["stages"]) {
    StageInput in;
    in.label = "Curri." + s.at("stage_id").get<std::string>();
    in.k_min = s.at("k_min").get<int>();
    in.k_max = s.at("k_max").get<int>();
    in.dpo_path = root / s.at("dpo_path").get<std::string>();
    out.push_back(std::move(in));
  }
  return out;
}

std::set<std::string> DefaultVerbLexicon() {
  return {"analyze", "answer", "arrange", "ask",       "assess",    "brainstorm", "calculate",
          "categorize", "choose", "classify", "compare", "compile", "compose",    "convert",
          "correct", "create", "debug", "define", "describe", "design", "detect", "determine",
          "develop", "discuss", "draft", "edit", "evaluate", "explain", "extract", "find",
          "fix", "generate", "give", "help", "identify", "illustrate", "imagine", "implement",
          "improve", "list", "make", "name", "outline", "paraphrase", "plan", "predict",
          "prepare", "propose", "provide", "read", "recommend", "rewrite", "share", "show",
          "solve", "sort", "suggest", "summarize", "tell", "transform", "translate", "use",
          "write"};
}

std::set<std::string> LoadVerbLexicon(const std::filesystem::path& path) {
  std::set<std::string> out;
  for (const auto& line : ReadLines(path)) {
    std::string verb = Trim(line.text);
    if (verb.empty() || verb.front() == '#') continue;
    std::transform(verb.begin(), verb.end(), verb.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.insert(std::move(verb));
  }
  return out;
}

VerbHistogram VerbFrequency(const std::vector<std::string>& instructions, std::size_t top_n,
                            const std::set<std::string>& lexicon) {
  if (top_n == 0) throw Error(ErrorCode::kInvalidArgument, "top_n must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : instructions) {
    std::string token;
    for (unsigned char c : text) {
      if (std::isalpha(c) || (c == '\'' && !token.empty())) {
        token += static_cast<char>(std::tolower(c));
      } else if (!token.empty()) {
        break;
      }
    }
    if (!token.empty() && lexicon.contains(token)) ++counts[token];
  }
  VerbHistogram hist(counts.begin(), counts.end());
  std::stable_sort(hist.begin(), hist.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (hist.size() > top_n) hist.resize(top_n);
  return hist;
}

Json VerbHistogramJson(const VerbHistogram& histogram) {
  Json out = Json::array();
  for (const auto& [verb, count] : histogram) out.push_back({{"verb", verb}, {"count", count}});
  return out;
}

std::string VerbHistogramText(const VerbHistogram& histogram) {
  std::size_t width = 4;
  for (const auto& [verb, count] : histogram) width = std::max(width, verb.size());
  std::string out = "Verb";
  out.resize(width, ' ');
  out += "  Count\n";
  for (const auto& [verb, count] : histogram) {
    std::string cell = verb;
    cell.resize(width, ' ');
    out += cell + "  " + std::to_string(count) + "\n";
  }
  return out;
}

}  // namespace cforge
