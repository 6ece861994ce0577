#include "text_reader.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ktp/error.hpp"

namespace ktp::detail {

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.emplace_back(line.substr(start, i - start));
  }
  return tokens;
}

std::optional<std::string_view> TextReader::next_line() {
  if (pos_ >= text_.size()) return std::nullopt;
  line_start_ = pos_;
  std::size_t end = text_.find('\n', pos_);
  if (end == std::string_view::npos) end = text_.size();
  std::string_view line = text_.substr(pos_, end - pos_);
  pos_ = end < text_.size() ? end + 1 : end;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string> TextReader::tokens_of_next_line(const char* what) {
  auto line = next_line();
  if (!line) {
    line_start_ = text_.size();
    throw ParseError(std::string("unexpected end of input reading ") + what, text_.size());
  }
  return split_whitespace(*line);
}

std::optional<std::vector<std::string>> TextReader::maybe_tokens_of_next_line() {
  while (auto line = next_line()) {
    auto tokens = split_whitespace(*line);
    if (!tokens.empty()) return tokens;
  }
  return std::nullopt;
}

std::size_t TextReader::parse_size(std::string_view token, const char* what) const {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(token) + "'", line_start_);
  }
  return value;
}

double TextReader::parse_double(std::string_view token, const char* what) const {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(token) + "'", line_start_);
  }
  return value;
}

std::string format_double(double value) {
  std::array<char, 32> buffer{};
  auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return std::string(buffer.data(), ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << contents;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ktp::detail
