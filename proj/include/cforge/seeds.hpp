#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cforge/jsonl.hpp"

namespace cforge {

enum class SeedSource { kOasst, kSelfInstruct, kSuperNatural, kOther };

const char* SeedSourceName(SeedSource source);
std::optional<SeedSource> ParseSeedSource(std::string_view name);

struct SeedInstruction {
  std::string id;
  SeedSource source = SeedSource::kOther;
  std::string text;
  Json meta = Json::object();

  Json ToJson() const;
};

struct SeedFilter {
  // Sources to keep; empty keeps every source.
  std::set<SeedSource> sources;
  // Super-Natural records carrying meta.ref_output_len below this word count
  // are dropped as "simple output" tasks.
  std::size_t min_ref_output_words = 10;

  bool Accepts(const SeedInstruction& seed) const;
};

// Reads seeds.jsonl ({"id","source","text","meta"} per line). Open Assistant
// records are kept only at meta.rank == 0 and meta.turn == 0. Throws on an
// unreadable file, a malformed line, a missing id/text, or a duplicate id.
std::vector<SeedInstruction> LoadSeeds(const std::filesystem::path& path, const SeedFilter& filter);

// Keeps the first occurrence per normalized text (lowercased,
// whitespace-collapsed), preserving order.
std::vector<SeedInstruction> Dedupe(const std::vector<SeedInstruction>& seeds);

std::string NormalizeForDedupe(std::string_view text);

void WriteSeeds(const std::filesystem::path& path, const std::vector<SeedInstruction>& seeds);

}  // namespace cforge
