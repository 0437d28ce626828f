#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace sphcov {

// Compressed sparse rows with sorted column indices per row.
struct SparseMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int64_t> row_offsets;  // size rows + 1
  std::vector<std::int32_t> col_indices;
  std::vector<double> values;

  std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }
  double nnz_fraction() const;

  // y = A x, parallel over rows.
  void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
  Eigen::VectorXd diagonal() const;
  Eigen::MatrixXd to_dense() const;
};

// Structural consistency: offsets monotone, indices in range and strictly
// increasing within each row. Throws on violation.
void validate_sparse(const SparseMatrix& a);

// Value-level symmetry check for matrices flagged symmetric.
bool is_value_symmetric(const SparseMatrix& a, double tol);

// Restriction to sorted row/column subsets.
SparseMatrix submatrix(const SparseMatrix& a,
                       const std::vector<std::int32_t>& keep_rows,
                       const std::vector<std::int32_t>& keep_cols);

// Coordinate-format text: one JSON header line {rows, cols, nnz}, then
// "row col value" lines (0-based indices).
void save_coordinate_format(const SparseMatrix& a, const std::string& path);
SparseMatrix load_coordinate_format(const std::string& path);

}  // namespace sphcov
