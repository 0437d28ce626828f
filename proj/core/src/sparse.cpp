#include "sphcov/sparse.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sphcov/errors.hpp"
#include "sphcov/parallel.hpp"

namespace sphcov {

double SparseMatrix::nnz_fraction() const {
  if (rows == 0 || cols == 0) return 0.0;
  return static_cast<double>(nnz()) /
         (static_cast<double>(rows) * static_cast<double>(cols));
}

void SparseMatrix::multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
  if (x.size() != cols) {
    throw std::invalid_argument("sparse multiply: dimension mismatch");
  }
  y.resize(rows);
  const double* xv = x.data();
  double* yv = y.data();
  parallel_for(static_cast<std::size_t>(rows), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double acc = 0.0;
      for (std::int64_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
        acc += values[static_cast<std::size_t>(k)] *
               xv[col_indices[static_cast<std::size_t>(k)]];
      }
      yv[i] = acc;
    }
  });
}

Eigen::VectorXd SparseMatrix::diagonal() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(rows);
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t k = row_offsets[static_cast<std::size_t>(i)];
         k < row_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
      if (col_indices[static_cast<std::size_t>(k)] == i) {
        d[i] = values[static_cast<std::size_t>(k)];
        break;
      }
    }
  }
  return d;
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t k = row_offsets[static_cast<std::size_t>(i)];
         k < row_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
      m(i, col_indices[static_cast<std::size_t>(k)]) =
          values[static_cast<std::size_t>(k)];
    }
  }
  return m;
}

void validate_sparse(const SparseMatrix& a) {
  if (a.rows < 0 || a.cols < 0 ||
      a.row_offsets.size() != static_cast<std::size_t>(a.rows) + 1 ||
      a.row_offsets.front() != 0 ||
      a.row_offsets.back() != a.nnz() ||
      a.col_indices.size() != a.values.size()) {
    throw std::invalid_argument("sparse matrix: inconsistent structure");
  }
  for (std::int64_t i = 0; i < a.rows; ++i) {
    if (a.row_offsets[static_cast<std::size_t>(i)] >
        a.row_offsets[static_cast<std::size_t>(i) + 1]) {
      throw std::invalid_argument("sparse matrix: offsets not monotone");
    }
    std::int32_t prev = -1;
    for (std::int64_t k = a.row_offsets[static_cast<std::size_t>(i)];
         k < a.row_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
      const std::int32_t c = a.col_indices[static_cast<std::size_t>(k)];
      if (c <= prev || c >= a.cols) {
        throw std::invalid_argument(
            "sparse matrix: columns not strictly increasing within a row");
      }
      prev = c;
    }
  }
}

bool is_value_symmetric(const SparseMatrix& a, double tol) {
  if (a.rows != a.cols) return false;
  const Eigen::MatrixXd d = a.to_dense();
  return (d - d.transpose()).cwiseAbs().maxCoeff() <= tol;
}

SparseMatrix submatrix(const SparseMatrix& a,
                       const std::vector<std::int32_t>& keep_rows,
                       const std::vector<std::int32_t>& keep_cols) {
  std::vector<std::int32_t> col_map(static_cast<std::size_t>(a.cols), -1);
  for (std::size_t j = 0; j < keep_cols.size(); ++j) {
    col_map[static_cast<std::size_t>(keep_cols[j])] = static_cast<std::int32_t>(j);
  }
  SparseMatrix out;
  out.rows = static_cast<std::int64_t>(keep_rows.size());
  out.cols = static_cast<std::int64_t>(keep_cols.size());
  out.row_offsets.assign(keep_rows.size() + 1, 0);

  std::vector<std::int64_t> counts(keep_rows.size(), 0);
  parallel_for(keep_rows.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const std::int32_t row = keep_rows[i];
      std::int64_t cnt = 0;
      for (std::int64_t k = a.row_offsets[static_cast<std::size_t>(row)];
           k < a.row_offsets[static_cast<std::size_t>(row) + 1]; ++k) {
        if (col_map[static_cast<std::size_t>(
                a.col_indices[static_cast<std::size_t>(k)])] >= 0) {
          ++cnt;
        }
      }
      counts[i] = cnt;
    }
  });
  for (std::size_t i = 0; i < keep_rows.size(); ++i) {
    out.row_offsets[i + 1] = out.row_offsets[i] + counts[i];
  }
  out.col_indices.resize(static_cast<std::size_t>(out.row_offsets.back()));
  out.values.resize(static_cast<std::size_t>(out.row_offsets.back()));
  parallel_for(keep_rows.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const std::int32_t row = keep_rows[i];
      std::int64_t pos = out.row_offsets[i];
      for (std::int64_t k = a.row_offsets[static_cast<std::size_t>(row)];
           k < a.row_offsets[static_cast<std::size_t>(row) + 1]; ++k) {
        const std::int32_t mapped = col_map[static_cast<std::size_t>(
            a.col_indices[static_cast<std::size_t>(k)])];
        if (mapped >= 0) {
          out.col_indices[static_cast<std::size_t>(pos)] = mapped;
          out.values[static_cast<std::size_t>(pos)] =
              a.values[static_cast<std::size_t>(k)];
          ++pos;
        }
      }
    }
  });
  return out;
}

void save_coordinate_format(const SparseMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");
  nlohmann::json header{{"rows", a.rows}, {"cols", a.cols}, {"nnz", a.nnz()}};
  out << header.dump() << "\n";
  char buf[64];
  for (std::int64_t i = 0; i < a.rows; ++i) {
    for (std::int64_t k = a.row_offsets[static_cast<std::size_t>(i)];
         k < a.row_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    a.values[static_cast<std::size_t>(k)]);
      out << i << ' ' << a.col_indices[static_cast<std::size_t>(k)] << ' '
          << buf << "\n";
    }
  }
  if (!out) throw io_error("failed while writing " + path);
}

SparseMatrix load_coordinate_format(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty file " + path);
  const auto header = nlohmann::json::parse(line);
  SparseMatrix out;
  out.rows = header.at("rows").get<std::int64_t>();
  out.cols = header.at("cols").get<std::int64_t>();
  const auto nnz = header.at("nnz").get<std::int64_t>();

  struct Entry {
    std::int64_t row;
    std::int32_t col;
    double value;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  std::int64_t row;
  std::int64_t col;
  double value;
  while (in >> row >> col >> value) {
    if (row < 0 || row >= out.rows || col < 0 || col >= out.cols) {
      throw io_error("coordinate entry out of range in " + path);
    }
    entries.push_back({row, static_cast<std::int32_t>(col), value});
  }
  if (static_cast<std::int64_t>(entries.size()) != nnz) {
    throw io_error("nnz mismatch in " + path);
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  out.row_offsets.assign(static_cast<std::size_t>(out.rows) + 1, 0);
  out.col_indices.reserve(entries.size());
  out.values.reserve(entries.size());
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (e > 0 && entries[e].row == entries[e - 1].row &&
        entries[e].col == entries[e - 1].col) {
      throw io_error("duplicate coordinate entry in " + path);
    }
    ++out.row_offsets[static_cast<std::size_t>(entries[e].row) + 1];
    out.col_indices.push_back(entries[e].col);
    out.values.push_back(entries[e].value);
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(out.rows); ++i) {
    out.row_offsets[i + 1] += out.row_offsets[i];
  }
  validate_sparse(out);
  return out;
}

}  // namespace sphcov
