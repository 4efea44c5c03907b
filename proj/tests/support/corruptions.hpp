// Targeted damage applied to a valid output tree, one defect class each.
#pragma once

#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cforge/jsonl.hpp"
#include "test_util.hpp"

namespace cforge::testing {

inline std::vector<Json> ReadRows(const std::filesystem::path& path) {
  std::vector<Json> rows;
  std::istringstream in(Slurp(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(Json::parse(line));
  }
  return rows;
}

inline void WriteRows(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  Spit(path, text);
}

inline void EditRows(const std::filesystem::path& path, const std::function<void(std::vector<Json>&)>& fn) {
  auto rows = ReadRows(path);
  fn(rows);
  WriteRows(path, rows);
}

inline void EditJson(const std::filesystem::path& path, const std::function<void(Json&)>& fn) {
  Json j = Json::parse(Slurp(path));
  fn(j);
  Spit(path, j.dump(2) + "\n");
}

struct Corruption {
  std::string name;
  // Substring the validator must report.
  std::string expect;
  std::function<void(const std::filesystem::path&)> apply;
};

// Expects a tree with stage_1 holding at least two triplets and a second stage.
inline std::vector<Corruption> Corruptions() {
  namespace fs = std::filesystem;
  return {
      {"chosen_equals_rejected", "chosen equals rejected",
       [](const fs::path& r) {
         EditRows(r / "stage_1/dpo.jsonl", [](auto& rows) { rows[0]["rejected"] = rows[0]["chosen"]; });
       }},
      {"duplicate_k", "duplicate k",
       [](const fs::path& r) {
         EditRows(r / "stage_1/dpo.jsonl", [](auto& rows) { rows.push_back(rows[0]); });
       }},
      {"k_outside_stage", "outside stage",
       [](const fs::path& r) { EditRows(r / "stage_1/dpo.jsonl", [](auto& rows) { rows[0]["k"] = 9; }); }},
      {"manifest_count", "count mismatch",
       [](const fs::path& r) {
         EditJson(r / "training_manifest.json", [](Json& m) { m["stages"][0]["dpo_count"] = 99; });
       }},
      {"sft_projection", "broken SFT projection",
       [](const fs::path& r) {
         EditRows(r / "stage_1/sft.jsonl", [](auto& rows) { rows[0]["response"] = "something else"; });
       }},
      {"stage_order", "not sorted",
       [](const fs::path& r) {
         EditJson(r / "training_manifest.json", [](Json& m) {
           auto stages = m["stages"];
           std::swap(stages[0], stages[1]);
           m["stages"] = stages;
         });
       }},
      {"replay_overdraw", "replay overdraw",
       [](const fs::path& r) {
         EditJson(r / "training_manifest.json", [](Json& m) { m["replay"]["budget"] = 1; });
       }},
      {"missing_record_ref", "missing record_ref",
       [](const fs::path& r) {
         EditRows(r / "stage_1/dpo.jsonl", [](auto& rows) { rows[0].erase("record_ref"); });
       }},
      {"empty_instruction", "empty instruction",
       [](const fs::path& r) { EditRows(r / "stage_1/dpo.jsonl", [](auto& rows) { rows[1]["instruction"] = ""; }); }},
      {"malformed_line", "malformed JSON line",
       [](const fs::path& r) { Spit(r / "chains.jsonl", Slurp(r / "chains.jsonl") + "{not json\n"); }},
  };
}

}  // namespace cforge::testing
