#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cforge/jsonl.hpp"

namespace cforge {

struct Violation {
  std::string file;
  std::size_t line = 0;  // 0 when the violation concerns the whole file
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::size_t files_checked = 0;

  bool ok() const { return violations.empty(); }
  Json ToJson() const;
  std::string ToText() const;  // "file:line: message" per violation
};

// Schema checks on every artifact under `root` plus the cross-file invariants:
// stage ordering and disjointness, manifest counts, SFT projection, replay
// budget, partition of pairs.jsonl into stages, and record_ref resolution.
ValidationReport ValidateTree(const std::filesystem::path& root);

// Schema check for a single artifact, dispatched on its file name.
ValidationReport ValidateFile(const std::filesystem::path& path);

// Directories go through ValidateTree, files through ValidateFile.
ValidationReport ValidatePaths(const std::vector<std::filesystem::path>& paths);

}  // namespace cforge
