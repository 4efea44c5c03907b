#include "cforge/seeds.hpp"

#include <cctype>
#include <unordered_set>

#include "cforge/error.hpp"

namespace cforge {

namespace {

std::optional<long long> MetaInt(const Json& meta, const char* key) {
  if (!meta.is_object() || !meta.contains(key)) return std::nullopt;
  const auto& v = meta.at(key);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_unsigned()) return static_cast<long long>(v.get<unsigned long long>());
  return std::nullopt;
}

}  // namespace

const char* SeedSourceName(SeedSource source) {
  switch (source) {
    case SeedSource::kOasst: return "oasst";
    case SeedSource::kSelfInstruct: return "self_instruct";
    case SeedSource::kSuperNatural: return "super_natural";
    case SeedSource::kOther: return "other";
  }
  return "other";
}

std::optional<SeedSource> ParseSeedSource(std::string_view name) {
  for (auto s : {SeedSource::kOasst, SeedSource::kSelfInstruct, SeedSource::kSuperNatural,
                 SeedSource::kOther}) {
    if (name == SeedSourceName(s)) return s;
  }
  return std::nullopt;
}

Json SeedInstruction::ToJson() const {
  return Json{{"id", id}, {"source", SeedSourceName(source)}, {"text", text}, {"meta", meta}};
}

bool SeedFilter::Accepts(const SeedInstruction& seed) const {
  if (!sources.empty() && !sources.contains(seed.source)) return false;
  switch (seed.source) {
    case SeedSource::kOasst: {
      // Missing rank/turn cannot prove a first-turn, rank-0 message.
      const auto rank = MetaInt(seed.meta, "rank");
      const auto turn = MetaInt(seed.meta, "turn");
      return rank == 0 && turn == 0;
    }
    case SeedSource::kSuperNatural: {
      const auto len = MetaInt(seed.meta, "ref_output_len");
      return !len || *len >= static_cast<long long>(min_ref_output_words);
    }
    default:
      return true;
  }
}

std::vector<SeedInstruction> LoadSeeds(const std::filesystem::path& path, const SeedFilter& filter) {
  std::vector<SeedInstruction> seeds;
  std::unordered_set<std::string> ids;
  for (const auto& line : ReadLines(path)) {
    const std::string where = path.string() + ":" + std::to_string(line.line_number);
    Json row = Json::parse(line.text, nullptr, false);
    if (row.is_discarded() || !row.is_object()) {
      throw Error(ErrorCode::kParse, where + ": malformed JSON line");
    }
    if (!row.contains("id") || !row["id"].is_string() || row["id"].get<std::string>().empty()) {
      throw Error(ErrorCode::kParse, where + ": record missing id");
    }
    if (!row.contains("text") || !row["text"].is_string() ||
        Trim(row["text"].get<std::string>()).empty()) {
      throw Error(ErrorCode::kParse, where + ": record missing text");
    }
    SeedInstruction seed;
    seed.id = row["id"].get<std::string>();
    seed.text = row["text"].get<std::string>();
    if (row.contains("source") && row["source"].is_string()) {
      seed.source = ParseSeedSource(row["source"].get<std::string>()).value_or(SeedSource::kOther);
    }
    if (row.contains("meta") && row["meta"].is_object()) seed.meta = row["meta"];
    if (!ids.insert(seed.id).second) {
      throw Error(ErrorCode::kParse, where + ": duplicate id '" + seed.id + "'");
    }
    if (filter.Accepts(seed)) seeds.push_back(std::move(seed));
  }
  return seeds;
}

std::string NormalizeForDedupe(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::vector<SeedInstruction> Dedupe(const std::vector<SeedInstruction>& seeds) {
  std::vector<SeedInstruction> out;
  std::unordered_set<std::string> seen;
  for (const auto& seed : seeds) {
    if (seen.insert(NormalizeForDedupe(seed.text)).second) out.push_back(seed);
  }
  return out;
}

void WriteSeeds(const std::filesystem::path& path, const std::vector<SeedInstruction>& seeds) {
  std::vector<Json> rows;
  rows.reserve(seeds.size());
  for (const auto& s : seeds) rows.push_back(s.ToJson());
  WriteJsonl(path, rows);
}

}  // namespace cforge
