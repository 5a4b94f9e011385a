#pragma once

// Immutable named-column datasets and CSV I/O. The CSV dialect is
// comma-separated with a mandatory header row, '.' decimal point and no
// quoting; every body cell must parse as a number in full.

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace causalglm {

// Malformed input data (ragged rows, non-numeric cells, missing columns).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::string generator;    // e.g. "fig1", "fig3", "fig4", "spec", "csv"
  std::string shift;        // human-readable shift descriptor, empty if none
  std::string scm_json;     // serialized generator spec, empty for raw CSV
};

struct Dataset {
  std::vector<std::string> names;            // column order as stored/emitted
  std::vector<Eigen::VectorXd> columns;      // aligned with names
  std::string target_name;
  DatasetMeta meta;

  Eigen::Index n() const { return columns.empty() ? 0 : columns.front().size(); }

  int index_of(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return static_cast<int>(j);
    return -1;
  }

  const Eigen::VectorXd& column(const std::string& name) const {
    const int j = index_of(name);
    if (j < 0) throw DataError("dataset: no column named '" + name + "'");
    return columns[static_cast<std::size_t>(j)];
  }

  const Eigen::VectorXd& target() const { return column(target_name); }

  // Covariate names in stored order, excluding the target column.
  std::vector<std::string> covariate_names() const {
    std::vector<std::string> out;
    for (const auto& name : names)
      if (name != target_name) out.push_back(name);
    return out;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) {
    std::ostringstream msg;
    msg << "csv: non-numeric cell at row " << row + 1 << ", column " << col + 1
        << ": '" << cell << "'";
    throw DataError(msg.str());
  }
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace detail

inline void write_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.names.size(); ++j) {
    if (j) out << ',';
    out << data.names[j];
  }
  out << '\n';
  const Eigen::Index n = data.n();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < data.columns.size(); ++j) {
      if (j) out << ',';
      out << detail::format_double(data.columns[j][i]);
    }
    out << '\n';
  }
}

inline void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot open for writing: " + path);
  write_csv(data, out);
}

inline Dataset read_csv(std::istream& in) {
  Dataset data;
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty input, header row required");
  data.names = detail::split_csv_line(line);
  if (data.names.size() == 1 && data.names[0].empty())
    throw DataError("csv: empty header row");
  for (const auto& name : data.names)
    if (name.empty()) throw DataError("csv: empty column name in header");

  const std::size_t width = data.names.size();
  std::vector<std::vector<double>> cols(width);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.eof()) break;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != width) {
      std::ostringstream msg;
      msg << "csv: ragged row " << row + 1 << " has " << cells.size()
          << " cells, expected " << width;
      throw DataError(msg.str());
    }
    for (std::size_t j = 0; j < width; ++j)
      cols[j].push_back(detail::parse_cell(cells[j], row, j));
    ++row;
  }

  data.columns.reserve(width);
  for (auto& c : cols)
    data.columns.push_back(Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
  data.meta.generator = "csv";
  return data;
}

inline Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open for reading: " + path);
  return read_csv(in);
}

}  // namespace causalglm
