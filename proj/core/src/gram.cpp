#include "sphcov/gram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sphcov/parallel.hpp"

namespace sphcov {

namespace {

void check_spec(const VectorizationSpec& spec) {
  if (spec.n < 1 || spec.r < 2) {
    throw std::invalid_argument("vectorization: need n >= 1 and r >= 2");
  }
}

// 0-based off-diagonal position of (j, k) inside a block, k-major.
inline std::int64_t local_offdiag(int j0, int k0, int r) {
  return static_cast<std::int64_t>(k0) * (r - 1) + j0 - (j0 > k0 ? 1 : 0);
}

}  // namespace

std::int64_t vec_index(int i, int j, int k, const VectorizationSpec& spec) {
  check_spec(spec);
  if (i < 1 || i > spec.n || j < 1 || j > spec.r || k < 1 || k > spec.r) {
    throw std::invalid_argument("vec_index: index out of range");
  }
  if (j == k) {
    throw std::invalid_argument(
        "vec_index: diagonal pair (j == k) has no off-diagonal index");
  }
  return static_cast<std::int64_t>(i - 1) * spec.r * (spec.r - 1) +
         static_cast<std::int64_t>(k - 1) * (spec.r - 1) + j - (j > k ? 1 : 0);
}

IndexTriple inv_vec_index(std::int64_t l, const VectorizationSpec& spec) {
  check_spec(spec);
  if (l < 1 || l > spec.length()) {
    throw std::invalid_argument("inv_vec_index: index outside [1, L]");
  }
  // Floor-divide/remainder on the 0-based index; the offset j - 1{j > k}
  // inside a (i, k) run spans 1..r-1.
  const std::int64_t l0 = l - 1;
  const std::int64_t block = static_cast<std::int64_t>(spec.r) * (spec.r - 1);
  IndexTriple out;
  out.i = static_cast<int>(l0 / block) + 1;
  const std::int64_t rem = l0 % block;
  out.k = static_cast<int>(rem / (spec.r - 1)) + 1;
  const int offset = static_cast<int>(rem % (spec.r - 1)) + 1;
  out.j = offset + (offset >= out.k ? 1 : 0);
  return out;
}

namespace {

std::vector<SphericalPoint> flatten_constant_r(
    const std::vector<std::vector<SphericalPoint>>& locations, int& n, int& r) {
  n = static_cast<int>(locations.size());
  if (n < 1) throw std::invalid_argument("build_J: no replicates");
  r = static_cast<int>(locations.front().size());
  for (const auto& rep : locations) {
    if (static_cast<int>(rep.size()) != r) {
      throw std::invalid_argument(
          "build_J: replicate sizes differ; the Khatri-Rao fast path needs "
          "constant r (use the dense general path)");
    }
  }
  if (r < 1) throw std::invalid_argument("build_J: empty replicate");
  std::vector<SphericalPoint> flat;
  flat.reserve(static_cast<std::size_t>(n) * r);
  for (const auto& rep : locations) {
    flat.insert(flat.end(), rep.begin(), rep.end());
  }
  return flat;
}

}  // namespace

SparseMatrix build_J(const std::vector<std::vector<SphericalPoint>>& locations,
                     const ZonalKernel& kernel, double threshold_frac) {
  if (threshold_frac < 0.0 || threshold_frac >= 1.0) {
    throw std::invalid_argument("build_J: threshold_frac must be in [0, 1)");
  }
  int n = 0, r = 0;
  const std::vector<SphericalPoint> pts = flatten_constant_r(locations, n, r);
  const std::int64_t dim = static_cast<std::int64_t>(n) * r;
  const double cutoff = threshold_frac * kernel(1.0);

  SparseMatrix j;
  j.rows = dim;
  j.cols = dim;
  j.row_offsets.assign(static_cast<std::size_t>(dim) + 1, 0);

  std::vector<std::vector<std::int32_t>> cols(static_cast<std::size_t>(dim));
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(dim));
  parallel_for(static_cast<std::size_t>(dim), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t a = lo; a < hi; ++a) {
      auto& c = cols[a];
      auto& v = vals[a];
      for (std::int64_t b = 0; b < dim; ++b) {
        const double value =
            kernel(dot(pts[a], pts[static_cast<std::size_t>(b)]));
        // |value| < cutoff becomes a structural zero; threshold 0 keeps
        // everything, and the diagonal psi(1) always survives.
        if (std::abs(value) >= cutoff) {
          c.push_back(static_cast<std::int32_t>(b));
          v.push_back(value);
        }
      }
    }
  });
  for (std::size_t a = 0; a < static_cast<std::size_t>(dim); ++a) {
    j.row_offsets[a + 1] =
        j.row_offsets[a] + static_cast<std::int64_t>(cols[a].size());
  }
  j.col_indices.reserve(static_cast<std::size_t>(j.row_offsets.back()));
  j.values.reserve(static_cast<std::size_t>(j.row_offsets.back()));
  for (std::size_t a = 0; a < static_cast<std::size_t>(dim); ++a) {
    j.col_indices.insert(j.col_indices.end(), cols[a].begin(), cols[a].end());
    j.values.insert(j.values.end(), vals[a].begin(), vals[a].end());
  }
  return j;
}

Eigen::MatrixXd build_kernel_matrix_dense(
    const std::vector<std::vector<SphericalPoint>>& locations,
    const ZonalKernel& kernel, double threshold_frac) {
  if (threshold_frac < 0.0 || threshold_frac >= 1.0) {
    throw std::invalid_argument(
        "build_kernel_matrix_dense: threshold_frac must be in [0, 1)");
  }
  int n = 0, r = 0;
  const std::vector<SphericalPoint> pts = flatten_constant_r(locations, n, r);
  const std::int64_t dim = static_cast<std::int64_t>(n) * r;
  const double cutoff = threshold_frac * kernel(1.0);
  Eigen::MatrixXd m(dim, dim);
  parallel_for(static_cast<std::size_t>(dim), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t a = lo; a < hi; ++a) {
      for (std::int64_t b = 0; b < dim; ++b) {
        const double value =
            kernel(dot(pts[a], pts[static_cast<std::size_t>(b)]));
        m(static_cast<std::int64_t>(a), b) =
            std::abs(value) >= cutoff ? value : 0.0;
      }
    }
  });
  return m;
}

namespace {

// Per-row offsets of each column block inside a block-structured CSR matrix:
// seg[row * (n_blocks + 1) + q] is the position (relative to the row start)
// of the first entry with column >= q * r.
std::vector<std::int32_t> block_segments(const SparseMatrix& j, int n_blocks,
                                         int r) {
  std::vector<std::int32_t> seg(
      static_cast<std::size_t>(j.rows) * (n_blocks + 1), 0);
  parallel_for(static_cast<std::size_t>(j.rows), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t a = lo; a < hi; ++a) {
      const std::int64_t begin = j.row_offsets[a];
      const std::int64_t end = j.row_offsets[a + 1];
      std::int32_t* s = &seg[a * (n_blocks + 1)];
      std::int64_t k = begin;
      for (int q = 0; q <= n_blocks; ++q) {
        const std::int32_t bound = static_cast<std::int32_t>(q) * r;
        while (k < end && j.col_indices[static_cast<std::size_t>(k)] < bound) {
          ++k;
        }
        s[q] = static_cast<std::int32_t>(k - begin);
      }
    }
  });
  return seg;
}

}  // namespace

std::int64_t estimate_H_nnz(const SparseMatrix& j,
                            const VectorizationSpec& spec) {
  check_spec(spec);
  const int n = spec.n;
  const int r = spec.r;
  if (j.rows != static_cast<std::int64_t>(n) * r || j.rows != j.cols) {
    throw std::invalid_argument("estimate_H_nnz: J dimension mismatch");
  }
  // nnz(J_pq) from row block sums, then sum of squares.
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
  for (std::int64_t a = 0; a < j.rows; ++a) {
    const int p = static_cast<int>(a / r);
    for (std::int64_t k = j.row_offsets[static_cast<std::size_t>(a)];
         k < j.row_offsets[static_cast<std::size_t>(a) + 1]; ++k) {
      counts(p, j.col_indices[static_cast<std::size_t>(k)] / r) += 1.0;
    }
  }
  double total = 0.0;
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) total += counts(p, q) * counts(p, q);
  }
  return static_cast<std::int64_t>(total);
}

SparseMatrix build_H_sparse(const SparseMatrix& j,
                            const VectorizationSpec& spec) {
  check_spec(spec);
  const int n = spec.n;
  const int r = spec.r;
  if (j.rows != static_cast<std::int64_t>(n) * r || j.rows != j.cols) {
    throw std::invalid_argument("build_H_sparse: J must be nr x nr");
  }
  const std::int64_t dim = spec.length();
  const std::int64_t block = static_cast<std::int64_t>(r) * (r - 1);
  const std::vector<std::int32_t> seg = block_segments(j, n, r);
  const auto row_entries = [&](std::int64_t a, int q, const std::int32_t*& c,
                               const double*& v, int& count) {
    const std::int64_t begin = j.row_offsets[static_cast<std::size_t>(a)];
    const std::int32_t* s = &seg[static_cast<std::size_t>(a) * (n + 1)];
    c = j.col_indices.data() + begin + s[q];
    v = j.values.data() + begin + s[q];
    count = s[q + 1] - s[q];
  };

  SparseMatrix h;
  h.rows = dim;
  h.cols = dim;
  h.row_offsets.assign(static_cast<std::size_t>(dim) + 1, 0);

  // Pass 1: exact per-row counts. Row (p, j1, k1) of H draws from J rows
  // (p, j1) and (p, k1); within block q every column pair (j2, k2) with
  // j2 != k2 contributes, so the count is the product minus the overlap of
  // equal columns.
  std::vector<std::int64_t> row_nnz(static_cast<std::size_t>(dim), 0);
  parallel_for(static_cast<std::size_t>(dim), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t m = lo; m < hi; ++m) {
      const int p = static_cast<int>(m / block);
      const std::int64_t loc = static_cast<std::int64_t>(m) % block;
      const int k0 = static_cast<int>(loc / (r - 1));
      const int off = static_cast<int>(loc % (r - 1));
      const int j0 = off + (off >= k0 ? 1 : 0);
      const std::int64_t row_j = static_cast<std::int64_t>(p) * r + j0;
      const std::int64_t row_k = static_cast<std::int64_t>(p) * r + k0;
      std::int64_t cnt = 0;
      for (int q = 0; q < n; ++q) {
        const std::int32_t* cj;
        const double* vj;
        int nj;
        row_entries(row_j, q, cj, vj, nj);
        const std::int32_t* ck;
        const double* vk;
        int nk;
        row_entries(row_k, q, ck, vk, nk);
        if (nj == 0 || nk == 0) continue;
        int overlap = 0;
        int a = 0, b = 0;
        while (a < nj && b < nk) {
          if (cj[a] == ck[b]) {
            ++overlap;
            ++a;
            ++b;
          } else if (cj[a] < ck[b]) {
            ++a;
          } else {
            ++b;
          }
        }
        cnt += static_cast<std::int64_t>(nj) * nk - overlap;
      }
      row_nnz[m] = cnt;
    }
  });
  for (std::size_t m = 0; m < static_cast<std::size_t>(dim); ++m) {
    h.row_offsets[m + 1] = h.row_offsets[m] + row_nnz[m];
  }
  h.col_indices.resize(static_cast<std::size_t>(h.row_offsets.back()));
  h.values.resize(static_cast<std::size_t>(h.row_offsets.back()));

  // Pass 2: fill. Iterating k2 ascending then j2 ascending emits sorted
  // columns q * r(r-1) + local_offdiag(j2, k2).
  parallel_for(static_cast<std::size_t>(dim), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t m = lo; m < hi; ++m) {
      const int p = static_cast<int>(m / block);
      const std::int64_t loc = static_cast<std::int64_t>(m) % block;
      const int k0 = static_cast<int>(loc / (r - 1));
      const int off = static_cast<int>(loc % (r - 1));
      const int j0 = off + (off >= k0 ? 1 : 0);
      const std::int64_t row_j = static_cast<std::int64_t>(p) * r + j0;
      const std::int64_t row_k = static_cast<std::int64_t>(p) * r + k0;
      std::int64_t pos = h.row_offsets[m];
      for (int q = 0; q < n; ++q) {
        const std::int32_t* cj;
        const double* vj;
        int nj;
        row_entries(row_j, q, cj, vj, nj);
        const std::int32_t* ck;
        const double* vk;
        int nk;
        row_entries(row_k, q, ck, vk, nk);
        if (nj == 0 || nk == 0) continue;
        const std::int64_t base = static_cast<std::int64_t>(q) * block;
        for (int b = 0; b < nk; ++b) {
          const int k2 = ck[b] - q * r;
          const double wk = vk[b];
          for (int a = 0; a < nj; ++a) {
            const int j2 = cj[a] - q * r;
            if (j2 == k2) continue;
            h.col_indices[static_cast<std::size_t>(pos)] =
                static_cast<std::int32_t>(base + local_offdiag(j2, k2, r));
            h.values[static_cast<std::size_t>(pos)] = vj[a] * wk;
            ++pos;
          }
        }
      }
    }
  });
  return h;
}

Eigen::MatrixXd build_mean_gram(const Dataset& data, const ZonalKernel& kernel) {
  validate_dataset(data, /*for_covariance=*/false);
  const std::size_t total = data.total_samples();
  std::vector<SphericalPoint> pts;
  std::vector<double> inv_sqrt_r;
  pts.reserve(total);
  inv_sqrt_r.reserve(total);
  for (const auto& rep : data.replicates) {
    const double w = 1.0 / std::sqrt(static_cast<double>(rep.locations.size()));
    for (const auto& u : rep.locations) {
      pts.push_back(u);
      inv_sqrt_r.push_back(w);
    }
  }
  Eigen::MatrixXd g(total, total);
  parallel_for(total, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t a = lo; a < hi; ++a) {
      for (std::size_t b = 0; b < total; ++b) {
        g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            kernel(dot(pts[a], pts[b])) * inv_sqrt_r[a] * inv_sqrt_r[b];
      }
    }
  });
  return g;
}

Eigen::MatrixXd build_H_general(const Dataset& data, const ZonalKernel& kernel) {
  validate_dataset(data, /*for_covariance=*/true);
  struct PairRef {
    const SphericalPoint* x;
    const SphericalPoint* y;
    double norm;  // 1 / sqrt(r_i (r_i - 1))
  };
  std::vector<PairRef> pairs;
  for (const auto& rep : data.replicates) {
    const int ri = static_cast<int>(rep.locations.size());
    const double norm = 1.0 / std::sqrt(static_cast<double>(ri) * (ri - 1));
    for (int k = 0; k < ri; ++k) {
      for (int j = 0; j < ri; ++j) {
        if (j == k) continue;
        pairs.push_back({&rep.locations[static_cast<std::size_t>(j)],
                         &rep.locations[static_cast<std::size_t>(k)], norm});
      }
    }
  }
  const std::size_t dim = pairs.size();
  Eigen::MatrixXd h(dim, dim);
  parallel_for(dim, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t a = lo; a < hi; ++a) {
      for (std::size_t b = 0; b < dim; ++b) {
        h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            kernel(dot(*pairs[a].x, *pairs[b].x)) *
            kernel(dot(*pairs[a].y, *pairs[b].y)) * pairs[a].norm *
            pairs[b].norm;
      }
    }
  });
  return h;
}

KhatriRaoOperator::KhatriRaoOperator(Eigen::MatrixXd kernel_matrix, int n,
                                     int r, int lag)
    : kern_(std::move(kernel_matrix)), n_(n), r_(r), lag_(lag) {
  if (n_ < 1 || r_ < 1 || lag_ < 0 || lag_ > n_ - 1) {
    throw std::invalid_argument("KhatriRaoOperator: bad (n, r, lag)");
  }
  if (lag_ == 0 && r_ < 2) {
    throw std::invalid_argument("KhatriRaoOperator: lag 0 needs r >= 2");
  }
  if (kern_.rows() != static_cast<Eigen::Index>(n_) * r_ ||
      kern_.cols() != kern_.rows()) {
    throw std::invalid_argument("KhatriRaoOperator: kernel matrix must be "
                                "nr x nr");
  }
}

std::int64_t KhatriRaoOperator::dim() const {
  if (lag_ == 0) return static_cast<std::int64_t>(n_) * r_ * (r_ - 1);
  return static_cast<std::int64_t>(n_ - lag_) * r_ * r_;
}

void KhatriRaoOperator::set_mask(std::vector<std::uint8_t> keep) {
  if (!keep.empty() && static_cast<std::int64_t>(keep.size()) != dim()) {
    throw std::invalid_argument("KhatriRaoOperator: mask size mismatch");
  }
  keep_ = std::move(keep);
}

void KhatriRaoOperator::apply(const Eigen::VectorXd& x,
                              Eigen::VectorXd& y) const {
  const std::int64_t d = dim();
  if (x.size() != d) {
    throw std::invalid_argument("KhatriRaoOperator: vector size mismatch");
  }
  const int blocks = n_ - lag_;
  const std::int64_t per_block =
      lag_ == 0 ? static_cast<std::int64_t>(r_) * (r_ - 1)
                : static_cast<std::int64_t>(r_) * r_;

  // Scatter coordinates into per-block r x r matrices (zero diagonal for the
  // lag-0 off-diagonal system), honoring the keep-mask.
  std::vector<Eigen::MatrixXd> m(static_cast<std::size_t>(blocks));
  for (int t = 0; t < blocks; ++t) {
    auto& mt = m[static_cast<std::size_t>(t)];
    mt = Eigen::MatrixXd::Zero(r_, r_);
    const std::int64_t base = static_cast<std::int64_t>(t) * per_block;
    for (int k0 = 0; k0 < r_; ++k0) {
      for (int j0 = 0; j0 < r_; ++j0) {
        if (lag_ == 0 && j0 == k0) continue;
        const std::int64_t idx =
            base + (lag_ == 0 ? local_offdiag(j0, k0, r_)
                              : static_cast<std::int64_t>(k0) * r_ + j0);
        if (!keep_.empty() && !keep_[static_cast<std::size_t>(idx)]) continue;
        mt(j0, k0) = x[idx];
      }
    }
  }

  y.resize(d);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t lo, std::size_t hi) {
    Eigen::MatrixXd acc(r_, r_);
    for (std::size_t t1 = lo; t1 < hi; ++t1) {
      acc.setZero();
      // Block row t1 of S (J*J) S^T: sum_t2 J_{t1+h, t2+h} M_t2 J_{t1, t2}^T.
      for (int t2 = 0; t2 < blocks; ++t2) {
        acc.noalias() +=
            kern_.block((static_cast<Eigen::Index>(t1) + lag_) * r_,
                        (static_cast<Eigen::Index>(t2) + lag_) * r_, r_, r_) *
            m[static_cast<std::size_t>(t2)] *
            kern_.block(static_cast<Eigen::Index>(t1) * r_,
                        static_cast<Eigen::Index>(t2) * r_, r_, r_)
                .transpose();
      }
      const std::int64_t base = static_cast<std::int64_t>(t1) * per_block;
      for (int k0 = 0; k0 < r_; ++k0) {
        for (int j0 = 0; j0 < r_; ++j0) {
          if (lag_ == 0 && j0 == k0) continue;
          const std::int64_t idx =
              base + (lag_ == 0 ? local_offdiag(j0, k0, r_)
                                : static_cast<std::int64_t>(k0) * r_ + j0);
          y[idx] = (!keep_.empty() && !keep_[static_cast<std::size_t>(idx)])
                       ? 0.0
                       : acc(j0, k0);
        }
      }
    }
  });
}

Eigen::VectorXd KhatriRaoOperator::diagonal() const {
  const std::int64_t d = dim();
  Eigen::VectorXd diag(d);
  const int blocks = n_ - lag_;
  const std::int64_t per_block =
      lag_ == 0 ? static_cast<std::int64_t>(r_) * (r_ - 1)
                : static_cast<std::int64_t>(r_) * r_;
  for (int t = 0; t < blocks; ++t) {
    const std::int64_t base = static_cast<std::int64_t>(t) * per_block;
    for (int k0 = 0; k0 < r_; ++k0) {
      for (int j0 = 0; j0 < r_; ++j0) {
        if (lag_ == 0 && j0 == k0) continue;
        const std::int64_t idx =
            base + (lag_ == 0 ? local_offdiag(j0, k0, r_)
                              : static_cast<std::int64_t>(k0) * r_ + j0);
        const Eigen::Index a = (static_cast<Eigen::Index>(t) + lag_) * r_ + j0;
        const Eigen::Index b = static_cast<Eigen::Index>(t) * r_ + k0;
        double v = kern_(a, a) * kern_(b, b);
        if (!keep_.empty() && !keep_[static_cast<std::size_t>(idx)]) v = 0.0;
        diag[idx] = v;
      }
    }
  }
  return diag;
}

}  // namespace sphcov
