#ifndef PRORED_TSV_HPP
#define PRORED_TSV_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prored {

// In-memory delimited table with a header row. Cells are kept as text;
// numeric parsing happens at the point of use so row errors can carry
// line numbers.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find_column(std::string_view name) const;
  // Throws a schema error naming the column if it is absent.
  std::size_t require_column(std::string_view name) const;
};

Table read_delimited(std::istream& in, char delim, const std::string& origin);
Table read_tsv(const std::string& path);
void write_delimited(std::ostream& out, const Table& table, char delim);
void write_tsv(const std::string& path, const Table& table);
void write_csv(const std::string& path, const Table& table);

// Locale-independent numeric conversions. format_double produces the
// shortest string that round-trips the value.
std::string format_double(double value);
std::string format_fixed(double value, int decimals);
double parse_double(std::string_view text, const std::string& context);
long parse_long(std::string_view text, const std::string& context);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace prored

#endif  // PRORED_TSV_HPP
