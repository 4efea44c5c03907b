#include "cforge/jsonl.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "cforge/error.hpp"

namespace cforge {

std::vector<JsonlLine> ReadLines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot read " + path.string());
  }
  std::vector<JsonlLine> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty()) continue;
    lines.push_back({number, line});
  }
  return lines;
}

std::vector<Json> ReadJsonl(const std::filesystem::path& path) {
  std::vector<Json> rows;
  for (const auto& line : ReadLines(path)) {
    Json value = Json::parse(line.text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded() || !value.is_object()) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line.line_number) +
                                         ": malformed JSON line");
    }
    rows.push_back(std::move(value));
  }
  return rows;
}

std::string DumpLine(const Json& value) {
  return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

void WriteText(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed for " + path.string());
  }
}

void WriteJsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string buffer;
  for (const auto& row : rows) {
    buffer += DumpLine(row);
    buffer += '\n';
  }
  WriteText(path, buffer);
}

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t CountWords(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

std::string Trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return std::string(text.substr(b, e - b));
}

}  // namespace cforge
