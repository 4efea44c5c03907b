#include "cforge/validate.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include "cforge/error.hpp"

namespace cforge {

namespace fs = std::filesystem;

Json ValidationReport::ToJson() const {
  Json rows = Json::array();
  for (const auto& v : violations) {
    rows.push_back({{"file", v.file}, {"line", v.line}, {"message", v.message}});
  }
  return Json{{"ok", ok()}, {"files_checked", files_checked}, {"violations", std::move(rows)}};
}

std::string ValidationReport::ToText() const {
  std::string out;
  for (const auto& v : violations) {
    out += v.file;
    if (v.line > 0) out += ":" + std::to_string(v.line);
    out += ": " + v.message + "\n";
  }
  out += ok() ? "ok: " : "failed: ";
  out += std::to_string(files_checked) + " files checked, " + std::to_string(violations.size()) +
         " violations\n";
  return out;
}

namespace {

struct Row {
  std::size_t line = 0;
  Json value;
};

class Checker {
 public:
  explicit Checker(ValidationReport& report) : report_(report) {}

  void Flag(const fs::path& file, std::size_t line, std::string message) {
    report_.violations.push_back({file.string(), line, std::move(message)});
  }

  // Parsed object rows; malformed lines are flagged and dropped.
  std::optional<std::vector<Row>> Load(const fs::path& path) {
    ++report_.files_checked;
    std::vector<JsonlLine> lines;
    try {
      lines = ReadLines(path);
    } catch (const Error& e) {
      Flag(path, 0, e.what());
      return std::nullopt;
    }
    std::vector<Row> rows;
    for (auto& l : lines) {
      Json value = Json::parse(l.text, nullptr, false);
      if (value.is_discarded() || !value.is_object()) {
        Flag(path, l.line_number, "malformed JSON line");
        continue;
      }
      rows.push_back({l.line_number, std::move(value)});
    }
    return rows;
  }

  bool String(const fs::path& f, const Row& r, const char* key, bool allow_empty = false) {
    const auto it = r.value.find(key);
    if (it == r.value.end()) {
      Flag(f, r.line, std::string("missing ") + key);
      return false;
    }
    if (!it->is_string()) {
      Flag(f, r.line, std::string(key) + " is not a string");
      return false;
    }
    if (!allow_empty && Trim(it->get<std::string>()).empty()) {
      Flag(f, r.line, std::string("empty ") + key);
      return false;
    }
    return true;
  }

  bool Int(const fs::path& f, const Row& r, const char* key, long long min_value) {
    const auto it = r.value.find(key);
    if (it == r.value.end()) {
      Flag(f, r.line, std::string("missing ") + key);
      return false;
    }
    if (!it->is_number_integer()) {
      Flag(f, r.line, std::string(key) + " is not an integer");
      return false;
    }
    if (it->get<long long>() < min_value) {
      Flag(f, r.line, std::string(key) + " must be >= " + std::to_string(min_value));
      return false;
    }
    return true;
  }

  bool Bool(const fs::path& f, const Row& r, const char* key) {
    const auto it = r.value.find(key);
    if (it == r.value.end() || !it->is_boolean()) {
      Flag(f, r.line, std::string("missing or non-boolean ") + key);
      return false;
    }
    return true;
  }

 private:
  ValidationReport& report_;
};

struct PairRow {
  std::size_t line = 0;
  std::string seed_id;
  int k = 0;
  std::string instruction;
  std::string chosen;
  std::string record_ref;
};

// pairs.jsonl and stage dpo.jsonl share one schema. Rows failing it are not
// returned, so cross-file checks only see well-formed pairs.
std::vector<PairRow> CheckPairs(Checker& c, const fs::path& path, const std::vector<Row>& rows) {
  std::vector<PairRow> out;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& r : rows) {
    bool ok = c.String(path, r, "seed_id");
    ok = c.Int(path, r, "k", 1) && ok;
    ok = c.String(path, r, "instruction") && ok;
    ok = c.String(path, r, "chosen") && ok;
    ok = c.String(path, r, "rejected") && ok;
    ok = c.String(path, r, "record_ref") && ok;
    if (!ok) continue;
    PairRow p{r.line, r.value["seed_id"].get<std::string>(), r.value["k"].get<int>(),
              r.value["instruction"].get<std::string>(), r.value["chosen"].get<std::string>(),
              r.value["record_ref"].get<std::string>()};
    if (p.chosen == r.value["rejected"].get<std::string>()) {
      c.Flag(path, r.line, "chosen equals rejected");
    }
    if (!seen.emplace(p.seed_id, p.k).second) {
      c.Flag(path, r.line, "duplicate k " + std::to_string(p.k) + " for seed " + p.seed_id);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void CheckSeeds(Checker& c, const fs::path& path, const std::vector<Row>& rows) {
  std::set<std::string> ids;
  for (const auto& r : rows) {
    const bool id_ok = c.String(path, r, "id");
    c.String(path, r, "text");
    if (id_ok && !ids.insert(r.value["id"].get<std::string>()).second) {
      c.Flag(path, r.line, "duplicate seed id " + r.value["id"].get<std::string>());
    }
  }
}

void CheckChains(Checker& c, const fs::path& path, const std::vector<Row>& rows) {
  std::set<std::string> ids;
  for (const auto& r : rows) {
    if (c.String(path, r, "seed_id") && !ids.insert(r.value["seed_id"].get<std::string>()).second) {
      c.Flag(path, r.line, "duplicate chain for seed " + r.value["seed_id"].get<std::string>());
    }
    c.String(path, r, "seed_text");
    c.String(path, r, "seed_output");
    const bool n_ok = c.Int(path, r, "n", 1);
    const auto steps = r.value.find("steps");
    if (steps == r.value.end() || !steps->is_array()) {
      c.Flag(path, r.line, "missing steps array");
      continue;
    }
    std::set<int> ks;
    for (std::size_t i = 0; i < steps->size(); ++i) {
      const Row step{r.line, (*steps)[i]};
      if (!step.value.is_object()) {
        c.Flag(path, r.line, "step " + std::to_string(i) + " is not an object");
        continue;
      }
      if (c.Int(path, step, "k", 1)) {
        const int k = step.value["k"].get<int>();
        if (!ks.insert(k).second) {
          c.Flag(path, r.line, "duplicate k " + std::to_string(k) + " in chain steps");
        } else if (k != static_cast<int>(i) + 1) {
          c.Flag(path, r.line, "step " + std::to_string(i) + " has k " + std::to_string(k) +
                                   ", expected " + std::to_string(i + 1));
        }
      }
      c.String(path, step, "instruction");
      c.String(path, step, "output");
      c.String(path, step, "constraint");
      c.String(path, step, "category");
    }
    if (n_ok && static_cast<std::size_t>(r.value["n"].get<int>()) != steps->size()) {
      c.Flag(path, r.line, "chain has " + std::to_string(steps->size()) + " steps but n = " +
                               std::to_string(r.value["n"].get<int>()));
    }
  }
}

std::map<std::string, std::string> CheckRecords(Checker& c, const fs::path& path,
                                                const std::vector<Row>& rows) {
  static const std::set<std::string> kFinals = {"incumbent_wins", "challenger_wins", "tie"};
  std::map<std::string, std::string> finals;
  for (const auto& r : rows) {
    bool ok = c.String(path, r, "id");
    c.String(path, r, "seed_id");
    c.Int(path, r, "k", 1);
    c.Int(path, r, "incumbent_k", 0);
    ok = c.String(path, r, "final") && ok;
    if (!r.value.contains("queries") || !r.value["queries"].is_array() || r.value["queries"].empty()) {
      c.Flag(path, r.line, "record has no judge queries");
    }
    if (!ok) continue;
    const auto final = r.value["final"].get<std::string>();
    if (!kFinals.contains(final)) c.Flag(path, r.line, "unknown outcome '" + final + "'");
    if (!finals.emplace(r.value["id"].get<std::string>(), final).second) {
      c.Flag(path, r.line, "duplicate record id " + r.value["id"].get<std::string>());
    }
  }
  return finals;
}

struct SftRow {
  std::size_t line = 0;
  std::string instruction;
  std::string response;
  bool is_replay = false;
};

std::vector<SftRow> CheckSft(Checker& c, const fs::path& path, const std::vector<Row>& rows) {
  std::vector<SftRow> out;
  for (const auto& r : rows) {
    bool ok = c.String(path, r, "instruction");
    ok = c.String(path, r, "response") && ok;
    ok = c.Bool(path, r, "is_replay") && ok;
    if (!ok) continue;
    out.push_back({r.line, r.value["instruction"].get<std::string>(),
                   r.value["response"].get<std::string>(), r.value["is_replay"].get<bool>()});
  }
  return out;
}

struct StageEntry {
  std::string stage_id;
  int k_min = 0;
  int k_max = 0;
  std::set<int> ks;
  std::string dpo_path;
  std::string sft_path;
  std::size_t dpo_count = 0;
  std::size_t sft_count = 0;
  std::size_t replay_count = 0;
};

void CheckStageFiles(Checker& c, const fs::path& root, const StageEntry& s,
                     std::vector<PairRow>& all_pairs, const fs::path& manifest_path) {
  const fs::path dpo_path = root / s.dpo_path;
  const fs::path sft_path = root / s.sft_path;
  const std::string name = "stage " + s.stage_id;

  std::vector<PairRow> dpo;
  std::size_t dpo_lines = 0;
  if (auto rows = c.Load(dpo_path)) {
    dpo_lines = ReadLines(dpo_path).size();
    dpo = CheckPairs(c, dpo_path, *rows);
    for (const auto& p : dpo) {
      if (!s.ks.contains(p.k)) {
        c.Flag(dpo_path, p.line, "k " + std::to_string(p.k) + " outside " + name + " range [" +
                                     std::to_string(s.k_min) + ", " + std::to_string(s.k_max) + "]");
      }
    }
    if (dpo_lines != s.dpo_count) {
      c.Flag(manifest_path, 0, "manifest/stage count mismatch: " + name + " lists dpo_count " +
                                   std::to_string(s.dpo_count) + " but " + s.dpo_path + " has " +
                                   std::to_string(dpo_lines) + " lines");
    }
  }

  if (auto rows = c.Load(sft_path)) {
    const std::size_t sft_lines = ReadLines(sft_path).size();
    const auto sft = CheckSft(c, sft_path, *rows);
    if (sft_lines != s.sft_count) {
      c.Flag(manifest_path, 0, "manifest/stage count mismatch: " + name + " lists sft_count " +
                                   std::to_string(s.sft_count) + " but " + s.sft_path + " has " +
                                   std::to_string(sft_lines) + " lines");
    }
    std::vector<const SftRow*> projected;
    std::size_t replay = 0;
    bool replay_started = false;
    for (const auto& row : sft) {
      if (row.is_replay) {
        ++replay;
        replay_started = true;
      } else {
        if (replay_started) c.Flag(sft_path, row.line, "broken SFT projection: projected row after replay rows");
        projected.push_back(&row);
      }
    }
    if (replay != s.replay_count) {
      c.Flag(manifest_path, 0, "manifest/stage count mismatch: " + name + " lists replay_count " +
                                   std::to_string(s.replay_count) + " but " + s.sft_path + " has " +
                                   std::to_string(replay) + " replay rows");
    }
    if (projected.size() != dpo.size()) {
      c.Flag(sft_path, 0, "broken SFT projection: " + std::to_string(projected.size()) +
                              " projected rows for " + std::to_string(dpo.size()) + " triplets");
    }
    for (std::size_t i = 0; i < std::min(projected.size(), dpo.size()); ++i) {
      if (projected[i]->instruction != dpo[i].instruction || projected[i]->response != dpo[i].chosen) {
        c.Flag(sft_path, projected[i]->line,
               "broken SFT projection: row differs from (instruction, chosen) of dpo line " +
                   std::to_string(dpo[i].line));
      }
    }
  }
  for (auto& p : dpo) all_pairs.push_back(std::move(p));
}

std::optional<StageEntry> ParseStageEntry(Checker& c, const fs::path& manifest_path,
                                          const Json& json, std::size_t index) {
  const std::string where = "stage entry " + std::to_string(index);
  if (!json.is_object()) {
    c.Flag(manifest_path, 0, where + " is not an object");
    return std::nullopt;
  }
  try {
    StageEntry s;
    s.stage_id = json.at("stage_id").get<std::string>();
    s.k_min = json.at("k_min").get<int>();
    s.k_max = json.at("k_max").get<int>();
    const auto ks = json.at("ks").get<std::vector<int>>();
    s.ks.insert(ks.begin(), ks.end());
    s.dpo_path = json.at("dpo_path").get<std::string>();
    s.sft_path = json.at("sft_path").get<std::string>();
    s.dpo_count = json.at("dpo_count").get<std::size_t>();
    s.sft_count = json.at("sft_count").get<std::size_t>();
    s.replay_count = json.at("replay_count").get<std::size_t>();
    if (s.ks.empty() || ks.size() != s.ks.size() || *s.ks.begin() != s.k_min ||
        *s.ks.rbegin() != s.k_max) {
      c.Flag(manifest_path, 0, where + " has inconsistent ks/k_min/k_max");
    }
    return s;
  } catch (const Json::exception& e) {
    c.Flag(manifest_path, 0, where + " is malformed: " + e.what());
    return std::nullopt;
  }
}

void CheckTree(Checker& c, ValidationReport& report, const fs::path& root) {
  const fs::path manifest_path = root / "training_manifest.json";
  std::optional<std::vector<PairRow>> pairs;
  std::optional<std::map<std::string, std::string>> records;

  if (fs::exists(root / "seeds.jsonl")) {
    if (auto rows = c.Load(root / "seeds.jsonl")) CheckSeeds(c, root / "seeds.jsonl", *rows);
  }
  if (fs::exists(root / "chains.jsonl")) {
    if (auto rows = c.Load(root / "chains.jsonl")) CheckChains(c, root / "chains.jsonl", *rows);
  }
  if (fs::exists(root / "pairs.jsonl")) {
    if (auto rows = c.Load(root / "pairs.jsonl")) pairs = CheckPairs(c, root / "pairs.jsonl", *rows);
  }
  if (fs::exists(root / "records.jsonl")) {
    if (auto rows = c.Load(root / "records.jsonl")) {
      records = CheckRecords(c, root / "records.jsonl", *rows);
    }
  }

  const auto audit = [&](const fs::path& file, const PairRow& p) {
    if (!records) return;
    const auto it = records->find(p.record_ref);
    if (it == records->end()) {
      c.Flag(file, p.line, "record_ref " + p.record_ref + " not found in records.jsonl");
    } else if (it->second == "tie") {
      c.Flag(file, p.line, "record_ref " + p.record_ref + " points at a tie");
    }
  };
  if (pairs) {
    for (const auto& p : *pairs) audit(root / "pairs.jsonl", p);
    if (!records && !pairs->empty()) {
      c.Flag(root / "records.jsonl", 0, "missing comparison log for " +
                                            std::to_string(pairs->size()) + " preference pairs");
    }
  }

  if (!fs::exists(manifest_path)) {
    c.Flag(manifest_path, 0, "missing training manifest");
    return;
  }
  ++report.files_checked;
  Json manifest = Json::parse(ReadText(manifest_path), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) {
    c.Flag(manifest_path, 0, "malformed JSON");
    return;
  }
  if (!manifest.contains("stages") || !manifest["stages"].is_array()) {
    c.Flag(manifest_path, 0, "missing stages array");
    return;
  }
  if (!manifest.contains("hyperparams") || !manifest["hyperparams"].is_object()) {
    c.Flag(manifest_path, 0, "missing hyperparams object");
  }

  std::vector<StageEntry> stages;
  for (std::size_t i = 0; i < manifest["stages"].size(); ++i) {
    if (auto s = ParseStageEntry(c, manifest_path, manifest["stages"][i], i)) stages.push_back(*s);
  }
  std::set<std::string> stage_ids;
  std::set<int> covered;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (!stage_ids.insert(stages[i].stage_id).second) {
      c.Flag(manifest_path, 0, "duplicate stage id " + stages[i].stage_id);
    }
    if (i > 0 && stages[i].k_max <= stages[i - 1].k_max) {
      c.Flag(manifest_path, 0, "stages not sorted by k_max: stage " + stages[i].stage_id +
                                   " (k_max " + std::to_string(stages[i].k_max) + ") follows stage " +
                                   stages[i - 1].stage_id + " (k_max " +
                                   std::to_string(stages[i - 1].k_max) + ")");
    }
    for (int k : stages[i].ks) {
      if (!covered.insert(k).second) {
        c.Flag(manifest_path, 0, "k " + std::to_string(k) + " assigned to more than one stage");
      }
    }
  }

  std::vector<PairRow> staged;
  for (const auto& s : stages) {
    std::vector<PairRow> stage_pairs;
    CheckStageFiles(c, root, s, stage_pairs, manifest_path);
    for (const auto& p : stage_pairs) audit(root / s.dpo_path, p);
    for (auto& p : stage_pairs) staged.push_back(std::move(p));
  }

  // Replay budget.
  const Json replay = manifest.value("replay", Json::object());
  const auto budget = replay.value("budget", std::uint64_t{0});
  const bool per_stage = replay.value("per_stage", false);
  const auto pool_size = replay.value("pool_size", std::uint64_t{0});
  std::uint64_t replay_total = 0;
  for (const auto& s : stages) {
    replay_total += s.replay_count;
    if (s.replay_count > pool_size) {
      c.Flag(manifest_path, 0, "replay overdraw: stage " + s.stage_id + " draws " +
                                   std::to_string(s.replay_count) + " from a pool of " +
                                   std::to_string(pool_size));
    }
    if (per_stage && s.replay_count > budget) {
      c.Flag(manifest_path, 0, "replay overdraw: stage " + s.stage_id + " draws " +
                                   std::to_string(s.replay_count) + " over the budget of " +
                                   std::to_string(budget));
    }
  }
  if (!per_stage && replay_total > budget) {
    c.Flag(manifest_path, 0, "replay overdraw: stages draw " + std::to_string(replay_total) +
                                 " over the budget of " + std::to_string(budget));
  }

  // Partition: every pair lands in exactly one stage.
  if (pairs) {
    std::multiset<std::pair<std::string, int>> expected, actual;
    for (const auto& p : *pairs) expected.emplace(p.seed_id, p.k);
    for (const auto& p : staged) actual.emplace(p.seed_id, p.k);
    if (expected != actual) {
      c.Flag(manifest_path, 0, "stages hold " + std::to_string(staged.size()) +
                                   " triplets that do not partition the " +
                                   std::to_string(pairs->size()) + " pairs in pairs.jsonl");
    }
  }
}

}  // namespace

ValidationReport ValidateTree(const fs::path& root) {
  ValidationReport report;
  Checker c(report);
  if (!fs::is_directory(root)) {
    c.Flag(root, 0, "not a directory");
    return report;
  }
  CheckTree(c, report, root);
  return report;
}

ValidationReport ValidateFile(const fs::path& path) {
  ValidationReport report;
  Checker c(report);
  const std::string name = path.filename().string();
  if (name == "training_manifest.json") {
    ++report.files_checked;
    Json m = Json::parse(ReadText(path), nullptr, false);
    if (m.is_discarded() || !m.is_object() || !m.contains("stages") || !m["stages"].is_array()) {
      c.Flag(path, 0, "malformed training manifest");
      return report;
    }
    for (std::size_t i = 0; i < m["stages"].size(); ++i) ParseStageEntry(c, path, m["stages"][i], i);
    return report;
  }
  auto rows = c.Load(path);
  if (!rows) return report;
  if (name == "seeds.jsonl") {
    CheckSeeds(c, path, *rows);
  } else if (name == "chains.jsonl") {
    CheckChains(c, path, *rows);
  } else if (name == "pairs.jsonl" || name == "dpo.jsonl") {
    CheckPairs(c, path, *rows);
  } else if (name == "records.jsonl") {
    CheckRecords(c, path, *rows);
  } else if (name == "sft.jsonl") {
    CheckSft(c, path, *rows);
  }
  return report;
}

ValidationReport ValidatePaths(const std::vector<fs::path>& paths) {
  ValidationReport merged;
  for (const auto& p : paths) {
    ValidationReport r;
    if (!fs::exists(p)) {
      r.violations.push_back({p.string(), 0, "path does not exist"});
    } else {
      r = fs::is_directory(p) ? ValidateTree(p) : ValidateFile(p);
    }
    merged.files_checked += r.files_checked;
    for (auto& v : r.violations) merged.violations.push_back(std::move(v));
  }
  return merged;
}

}  // namespace cforge
