#include <boost/tokenizer.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ncvax/core.hpp"

namespace ncvax {
namespace {

using Row = std::vector<std::string>;

Row split_line(const std::string& line) {
  boost::escaped_list_separator<char> sep('\\', ',', '"');
  boost::tokenizer<boost::escaped_list_separator<char>> tok(line, sep);
  Row out(tok.begin(), tok.end());
  for (auto& cell : out) {
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && (cell[b] == ' ' || cell[b] == '\t')) ++b;
    cell.erase(0, b);
  }
  return out;
}

struct Table {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open '" + path.string() + "'");
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      if (line.empty()) throw Error(ErrorCode::MalformedInput, "missing header row");
      table.header = split_line(line);
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    Row row = split_line(line);
    if (row.size() != table.header.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(table.header.size()) + " fields, got " +
                                             std::to_string(row.size()));
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorCode::MalformedInput, "missing header row");
  return table;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::size_t find_column(const Row& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in header");
}

std::optional<std::size_t> find_optional(const Row& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& column, const std::string& cell) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column '" + column +
                                         "': cannot parse '" + cell + "'");
}

[[noreturn]] void row_violation(std::size_t line, const std::string& reason) {
  throw Error(ErrorCode::InvariantViolation, "line " + std::to_string(line) + ": " + reason);
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\\") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CovariateSchema& schema,
                 const ColumnMap& column_map) {
  const Table table = read_table(path);
  const Row& h = table.header;

  const auto id_col = find_optional(h, column_map.id);
  const std::size_t t_col = find_column(h, column_map.t);
  const std::size_t y1_col = find_column(h, column_map.y1);
  std::vector<std::size_t> y2_cols;
  if (!column_map.y2_type_prefix.empty()) {
    for (std::size_t i = 0; i < h.size(); ++i)
      if (h[i].rfind(column_map.y2_type_prefix, 0) == 0) y2_cols.push_back(i);
    if (y2_cols.empty())
      throw Error(ErrorCode::MissingColumn,
                  "no column starts with prefix '" + column_map.y2_type_prefix + "'");
  } else {
    y2_cols.push_back(find_column(h, column_map.y2));
  }
  std::vector<std::size_t> cov_cols;
  for (const auto& [name, kind] : schema) {
    auto it = column_map.covariates.find(name);
    cov_cols.push_back(find_column(h, it == column_map.covariates.end() ? name : it->second));
  }

  DatasetColumns cols;
  const std::size_t n = table.rows.size();
  cols.t.reserve(n);
  cols.y1.reserve(n);
  cols.y2.reserve(n);
  if (id_col) cols.ids.reserve(n);
  std::vector<std::map<std::string, int>> level_index(schema.size());
  for (const auto& [name, kind] : schema) {
    CovariateColumn c;
    c.name = name;
    c.kind = kind;
    cols.covariates.push_back(std::move(c));
  }

  for (std::size_t r = 0; r < n; ++r) {
    const Row& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    if (id_col) cols.ids.push_back(row[*id_col]);

    const auto t = parse_number(row[t_col]);
    if (!t) parse_error(line, h[t_col], row[t_col]);
    if (*t != 0.0 && *t != 1.0) row_violation(line, "t must be 0 or 1, got " + row[t_col]);
    const auto y1 = parse_number(row[y1_col]);
    if (!y1) parse_error(line, h[y1_col], row[y1_col]);
    if (*y1 != 0.0 && *y1 != 1.0) row_violation(line, "y1 must be 0 or 1, got " + row[y1_col]);
    double y2 = 0.0;
    for (std::size_t c : y2_cols) {
      const auto v = parse_number(row[c]);
      if (!v) parse_error(line, h[c], row[c]);
      if (*v < 0.0 || *v != std::floor(*v))
        row_violation(line, "'" + h[c] + "' must be a nonnegative integer, got " + row[c]);
      y2 += *v;
    }
    cols.t.push_back(*t);
    cols.y1.push_back(*y1);
    cols.y2.push_back(y2);

    for (std::size_t k = 0; k < schema.size(); ++k) {
      const std::string& cell = row[cov_cols[k]];
      auto& col = cols.covariates[k];
      if (cell.empty() || cell == "NA")
        row_violation(line, "covariate '" + col.name + "' is missing");
      if (col.kind == CovariateKind::numeric) {
        const auto v = parse_number(cell);
        if (!v) parse_error(line, h[cov_cols[k]], cell);
        col.values.push_back(*v);
      } else {
        auto [pos, inserted] = level_index[k].try_emplace(cell, static_cast<int>(col.levels.size()));
        if (inserted) col.levels.push_back(cell);
        col.codes.push_back(pos->second);
      }
    }
  }
  return Dataset(std::move(cols));
}

CovariateSchema infer_schema(const std::filesystem::path& path, const ColumnMap& column_map) {
  const Table table = read_table(path);
  CovariateSchema schema;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name == column_map.id || name == column_map.t || name == column_map.y1) continue;
    if (column_map.y2_type_prefix.empty() ? name == column_map.y2
                                          : name.rfind(column_map.y2_type_prefix, 0) == 0)
      continue;
    bool numeric = true;
    for (const auto& row : table.rows) {
      const std::string& cell = row[c];
      if (cell.empty() || cell == "NA") continue;  // reported at load time
      if (!parse_number(cell)) {
        numeric = false;
        break;
      }
    }
    std::string cov_name = name;
    for (const auto& [cov, column] : column_map.covariates)
      if (column == name) cov_name = cov;
    schema.emplace_back(cov_name, numeric ? CovariateKind::numeric : CovariateKind::categorical);
  }
  return schema;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MalformedInput, "cannot write '" + path.string() + "'");
  out << "id,t,y1,y2";
  for (const auto& c : data.covariates()) out << ',' << quote(c.name);
  out << '\n';
  const auto t = data.t(), y1 = data.y1(), y2 = data.y2();
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << quote(data.id(i)) << ',' << static_cast<int>(t[i]) << ',' << static_cast<int>(y1[i])
        << ',' << static_cast<std::int64_t>(y2[i]);
    for (const auto& c : data.covariates()) {
      out << ',';
      if (c.kind == CovariateKind::numeric)
        out << format_double(c.values[i]);
      else
        out << quote(c.levels[static_cast<std::size_t>(c.codes[i])]);
    }
    out << '\n';
  }
}

}  // namespace ncvax
