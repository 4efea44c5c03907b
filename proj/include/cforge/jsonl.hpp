#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cforge {

using Json = nlohmann::ordered_json;

struct JsonlLine {
  std::size_t line_number = 0;  // 1-based
  std::string text;
};

// Reads non-blank lines. Throws Error(kIo) naming the path when unreadable.
std::vector<JsonlLine> ReadLines(const std::filesystem::path& path);

// Parses every line as a JSON object; throws Error(kParse) with the line number
// of the first malformed line.
std::vector<Json> ReadJsonl(const std::filesystem::path& path);

// Writes one compact JSON document per line (creating parent directories).
void WriteJsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

void WriteText(const std::filesystem::path& path, std::string_view text);
std::string ReadText(const std::filesystem::path& path);

// Compact dump used for every artifact; keys keep insertion order so output is
// byte-stable.
std::string DumpLine(const Json& value);

// Whitespace-token count.
std::size_t CountWords(std::string_view text);

std::string Trim(std::string_view text);

}  // namespace cforge
