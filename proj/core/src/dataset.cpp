#include "mirror_em/dataset.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mirror_em/errors.hpp"

namespace mirror_em {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, Eigen::Index row, std::size_t col) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ConfigError("csv row " + std::to_string(row) + ", column " + std::to_string(col) +
                      ": cell '" + cell + "' is not numeric");
  }
  while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
  if (used != cell.size()) {
    throw ConfigError("csv row " + std::to_string(row) + ", column " + std::to_string(col) +
                      ": trailing junk in cell '" + cell + "'");
  }
  if (!std::isfinite(value)) {
    throw ConfigError("csv row " + std::to_string(row) + ", column " + std::to_string(col) +
                      ": non-finite value");
  }
  return value;
}

}  // namespace

Dataset make_dataset(Mat rows, std::vector<std::string> column_names) {
  if (rows.rows() < 1 || rows.cols() < 1) {
    throw ConfigError("dataset needs at least one row and one column");
  }
  if (!rows.allFinite()) throw ConfigError("dataset contains non-finite values");
  if (column_names.empty()) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      column_names.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(column_names.size()) != rows.cols()) {
    throw ConfigError("dataset has " + std::to_string(rows.cols()) + " columns but " +
                      std::to_string(column_names.size()) + " column names");
  }
  return Dataset{std::move(rows), std::move(column_names)};
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> names = split_line(line);
  const std::size_t width = names.size();
  if (width == 0) throw ConfigError("csv header row is empty: " + path);

  std::vector<double> cells;
  Eigen::Index n = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> row = split_line(line);
    if (row.size() != width) {
      throw ConfigError("csv row " + std::to_string(n + 1) + " has " +
                        std::to_string(row.size()) + " cells, expected " +
                        std::to_string(width));
    }
    for (std::size_t j = 0; j < width; ++j) cells.push_back(parse_cell(row[j], n + 1, j));
    ++n;
  }
  if (n == 0) throw ConfigError("csv file has a header but no data rows: " + path);

  Mat rows(n, static_cast<Eigen::Index>(width));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j)
      rows(i, static_cast<Eigen::Index>(j)) = cells[i * width + j];
  return make_dataset(std::move(rows), names);
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write csv file: " + path);
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    if (j) out << ',';
    out << data.column_names[j];
  }
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", data.rows(i, j));
      out << buf;
    }
    out << '\n';
  }
}

Dataset standardize(const Dataset& data) {
  Mat rows = data.rows;
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double mean = rows.col(j).mean();
    const double sd = std::sqrt((rows.col(j).array() - mean).square().mean());
    if (!(sd > 0.0)) {
      throw NumericalError("standardize: column " + std::to_string(j) + " is constant");
    }
    rows.col(j) = (rows.col(j).array() - mean) / sd;
  }
  return Dataset{std::move(rows), data.column_names};
}

}  // namespace mirror_em
