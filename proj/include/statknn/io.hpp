#pragma once

// CSV reading/writing (RFC 4180, header row required) and standardization.

#include "statknn/core_model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace statknn::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Throws Error(Data) on a missing file, missing header or ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

/// Numeric matrix from the named columns (all columns when `columns` is
/// empty). A non-numeric cell is reported with its 1-based row and column.
Matrix numeric_columns(const CsvTable& table, const std::vector<std::string>& columns,
                       std::vector<std::string>* names = nullptr);

/// Headerless or headed square matrix file, e.g. a covariance.
Matrix read_matrix_csv(const std::filesystem::path& path, bool has_header = false);

void write_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header);

struct Standardizer {
  Vector mean;
  Vector scale;  // sample standard deviation

  Matrix apply(const Matrix& x) const;
  Vector apply(const Vector& x) const;
};

/// Column means and sample standard deviations; a zero-variance column is an Error(Data).
Standardizer fit_standardizer(const Matrix& x, const std::vector<std::string>& names = {});

}  // namespace statknn::io
