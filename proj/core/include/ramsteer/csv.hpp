#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ramsteer {

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ull);

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict full-string parses; throw std::invalid_argument on trailing junk.
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);
std::uint64_t parse_uint(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string> split_csv_line(std::string_view line);

/// Comment lines start with '#'; blank lines are skipped. The first remaining
/// line is the header.
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, or -1.
  int column(std::string_view name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Writes "# key=value" lines.
void write_comment(std::ostream& out, std::string_view key, std::string_view value);

}  // namespace ramsteer
