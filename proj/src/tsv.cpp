#include "prored/tsv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "prored/error.hpp"

namespace prored {

const char* error_category_name(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::data: return "data";
    case ErrorCategory::alignment: return "alignment";
    case ErrorCategory::dependency: return "dependency";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

std::optional<std::size_t> Table::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Table::require_column(std::string_view name) const {
  if (auto idx = find_column(name)) return *idx;
  throw Error(ErrorCategory::schema,
              "missing required column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

Table read_delimited(std::istream& in, char delim, const std::string& origin) {
  Table table;
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCategory::schema, origin + ": empty input, expected a header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_line(line, delim);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line, delim);
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCategory::data,
                  origin + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

Table read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "' for reading");
  return read_delimited(in, '\t', path);
}

void write_delimited(std::ostream& out, const Table& table, char delim) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << delim;
    out << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << delim;
      out << row[i];
    }
    out << '\n';
  }
}

namespace {

void write_file(const std::string& path, const Table& table, char delim) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  write_delimited(out, table, delim);
  if (!out) throw Error(ErrorCategory::io, "failed writing '" + path + "'");
}

}  // namespace

void write_tsv(const std::string& path, const Table& table) { write_file(path, table, '\t'); }
void write_csv(const std::string& path, const Table& table) { write_file(path, table, ','); }

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& context) {
  double value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCategory::data,
                context + ": not a number: '" + std::string(text) + "'");
  }
  return value;
}

long parse_long(std::string_view text, const std::string& context) {
  long value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCategory::data,
                context + ": not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCategory::io, "failed writing '" + path + "'");
}

}  // namespace prored
