#ifndef STE_CSV_HPP
#define STE_CSV_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ste/error.hpp"
#include "ste/fitting.hpp"

namespace ste {

/// Header plus a rectangular numeric body.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t columns() const noexcept { return header.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Parses comma-separated text with a header row. Data rows are numbered
/// from 1 (the header is not counted) in error messages.
inline CsvTable parse_csv(std::string_view text, std::string_view source = "input") {
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t row_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (!have_header) {
      for (auto f : fields) table.header.emplace_back(f);
      have_header = true;
      continue;
    }
    ++row_no;
    const std::string where =
        std::string(source) + ": row " + std::to_string(row_no) + " (line " + std::to_string(line_no) + ")";
    if (fields.size() != table.header.size())
      throw DataError(where + ": expected " + std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto f = fields[c];
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (!f.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, values[c]);
      if (f.empty() || ec != std::errc() || ptr != last || !std::isfinite(values[c]))
        throw DataError(where + ": non-numeric cell '" + std::string(f) + "' in column " + std::to_string(c + 1));
    }
    table.rows.push_back(std::move(values));
  }
  if (!have_header) throw DataError(std::string(source) + ": empty file");
  if (table.rows.empty()) throw DataError(std::string(source) + ": no data rows");
  return table;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, ptr);
}

inline std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    out += '\n';
  }
  return out;
}

/// Writes to a sibling temporary file and renames it over the target.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

/// Dataset from a table whose columns are x_1..x_d followed by y, each
/// column divided by its rescale factor. An empty factor list means no
/// rescaling; a single factor applies to every column.
inline Dataset dataset_from_table(const CsvTable& table, std::vector<double> rescale = {}) {
  const std::size_t cols = table.columns();
  if (cols < 2) throw DataError("need at least one input column and one response column");
  if (rescale.empty()) rescale.assign(cols, 1.0);
  if (rescale.size() == 1) rescale.assign(cols, rescale.front());
  if (rescale.size() != cols)
    throw DataError("rescale has " + std::to_string(rescale.size()) + " factors, table has " +
                    std::to_string(cols) + " columns");
  for (double c : rescale)
    if (!(c > 0.0) || !std::isfinite(c)) throw DataError("rescale factors must be positive");
  Dataset data;
  data.d = cols - 1;
  data.X.reserve(table.rows.size() * data.d);
  data.y.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    for (std::size_t r = 0; r < data.d; ++r) data.X.push_back(row[r] / rescale[r]);
    data.y.push_back(row[data.d] / rescale[data.d]);
  }
  data.validate();
  return data;
}

inline Dataset ingest(const std::filesystem::path& path, std::vector<double> rescale = {}) {
  return dataset_from_table(read_csv(path), std::move(rescale));
}

}  // namespace ste

#endif  // STE_CSV_HPP
