#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ktp::detail {

// Line-oriented tokenizer that remembers the byte offset of the current line
// for error reporting.
class TextReader {
 public:
  explicit TextReader(std::string_view text) : text_(text) {}

  // Next line split on whitespace; ParseError at end of input.
  std::vector<std::string> tokens_of_next_line(const char* what);
  // Like above but returns nullopt when only blank lines remain.
  std::optional<std::vector<std::string>> maybe_tokens_of_next_line();
  // Raw next line without its terminator; nullopt at end of input.
  std::optional<std::string_view> next_line();

  std::size_t line_offset() const noexcept { return line_start_; }
  std::size_t position() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ >= text_.size(); }

  std::size_t parse_size(std::string_view token, const char* what) const;
  double parse_double(std::string_view token, const char* what) const;

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

std::vector<std::string> split_whitespace(std::string_view line);

// Shortest representation that parses back to the identical double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace ktp::detail
