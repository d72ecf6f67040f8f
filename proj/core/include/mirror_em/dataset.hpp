#pragma once

#include <string>
#include <vector>

#include "mirror_em/util.hpp"

namespace mirror_em {

// In-memory numeric table. Rows are observations, columns are variables.
struct Dataset {
  Mat rows;
  std::vector<std::string> column_names;

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
};

// Builds a dataset from a matrix, checking shape and finiteness.
Dataset make_dataset(Mat rows, std::vector<std::string> column_names = {});

// Reads a CSV file with a header row and numeric body. Throws ConfigError on
// ragged rows, non-numeric cells, non-finite values, or an empty body.
Dataset load_csv(const std::string& path);

// Writes the dataset back out as CSV (17 significant digits).
void save_csv(const Dataset& data, const std::string& path);

// Column-wise z-scoring with population (1/n) standard deviations. Throws
// NumericalError if a column is constant.
Dataset standardize(const Dataset& data);

}  // namespace mirror_em
