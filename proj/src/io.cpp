#include "statknn/io.hpp"

#include "statknn/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace statknn::io {

namespace {

// Splits one CSV record. Quoted fields may contain commas, doubled quotes
// and line breaks; `in` supplies continuation lines for the latter.
bool next_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (quoted) {
        std::string more;
        if (!std::getline(in, more)) fail(ErrorKind::Data, "unterminated quoted CSV field");
        field += '\n';
        line = std::move(more);
        i = static_cast<std::size_t>(-1);
        continue;
      }
      break;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return true;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Data, "cannot open CSV file " + path.string());
  CsvTable table;
  require(next_record(in, table.header), ErrorKind::Data, "CSV file " + path.string() + " has no header row");
  std::vector<std::string> fields;
  std::size_t line_no = 1;
  while (next_record(in, fields)) {
    ++line_no;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    require(fields.size() == table.header.size(), ErrorKind::Data,
            path.string() + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                " fields, header has " + std::to_string(table.header.size()));
    table.rows.push_back(fields);
  }
  return table;
}

Matrix numeric_columns(const CsvTable& table, const std::vector<std::string>& columns,
                       std::vector<std::string>* names) {
  std::vector<std::size_t> idx;
  if (columns.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c) idx.push_back(c);
  } else {
    for (const auto& name : columns) {
      std::size_t c = 0;
      while (c < table.header.size() && trim(table.header[c]) != name) ++c;
      require(c < table.header.size(), ErrorKind::Data, "column '" + name + "' not found");
      idx.push_back(c);
    }
  }
  require(!table.rows.empty(), ErrorKind::Data, "CSV file has no data rows");
  Matrix m(static_cast<Index>(table.rows.size()), static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t c = 0; c < idx.size(); ++c) {
      double v = 0.0;
      require(parse_double(table.rows[r][idx[c]], v), ErrorKind::Data,
              "non-numeric value '" + table.rows[r][idx[c]] + "' at row " + std::to_string(r + 1) + ", column " +
                  std::to_string(idx[c] + 1) + " (" + table.header[idx[c]] + ")");
      m(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  if (names != nullptr) {
    names->clear();
    for (std::size_t c : idx) names->push_back(trim(table.header[c]));
  }
  return m;
}

Matrix read_matrix_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Data, "cannot open matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<std::string> fields;
  if (has_header) next_record(in, fields);
  while (next_record(in, fields)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    std::vector<double> row;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      require(parse_double(fields[c], v), ErrorKind::Data,
              path.string() + ": non-numeric value at row " + std::to_string(rows.size() + 1) + ", column " +
                  std::to_string(c + 1));
      row.push_back(v);
    }
    require(rows.empty() || row.size() == rows.front().size(), ErrorKind::Data, path.string() + ": ragged matrix");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorKind::Data, path.string() + ": empty matrix");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

void write_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Data, "cannot write " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  char buf[32];
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m(r, c));
      out << (c ? "," : "") << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

Matrix Standardizer::apply(const Matrix& x) const {
  Matrix out = x;
  for (Index r = 0; r < out.rows(); ++r)
    out.row(r) = ((x.row(r).transpose() - mean).cwiseQuotient(scale)).transpose();
  return out;
}

Vector Standardizer::apply(const Vector& x) const { return (x - mean).cwiseQuotient(scale); }

Standardizer fit_standardizer(const Matrix& x, const std::vector<std::string>& names) {
  require(x.rows() >= 2, ErrorKind::Data, "standardization needs at least 2 rows");
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.scale = Vector(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean[c]).square().sum() / static_cast<double>(x.rows() - 1);
    const std::string name = c < static_cast<Index>(names.size()) ? names[c] : std::to_string(c + 1);
    require(var > 0.0, ErrorKind::Data, "column " + name + " has zero variance");
    s.scale[c] = std::sqrt(var);
  }
  return s;
}

}  // namespace statknn::io
